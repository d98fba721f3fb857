"""
Biorthogonales Orakel

Der explizite (nicht rekursive) Weg zu biorthogonalen Basen und schiefen
Projektionen: LR-Zerlegung von Ŵ^H·V̂, Ein-Matrix-Projektion Z = W^H·A·V,
tridiagonales Pencil (T, S) und Strukturprüfungen. Dient als Referenz für
die rationale Lanczos-Iteration.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg as la

from .exceptions import BreakdownError, StructureMismatchError
from .pencils import (
    HessenbergPencil,
    InvHessenbergPencil,
    ProjectivePole,
    TridiagonalPencil,
    decompose_qr_plus_d,
    shape_order_for_poles,
    to_inv_hessenberg,
)
from .rational_arnoldi import KrylovDecomposition, rational_arnoldi
from .rational_lanczos import recover_poles_super
from .structured_core import (
    BreakdownKind,
    BreakdownReport,
    ShiftedSolver,
    as_matrix,
    as_vector,
    rank_profile_lower,
    spectral_norm,
    structural_bottom,
)

logger = logging.getLogger(__name__)

LR_PIVOT_TOL = 1e-12
STRUCTURE_TOL = 1e-8
RESIDUAL_TOL = 1e-9
POLE_MATCH_TOL = 1e-6


@dataclass
class LRFactors:
    """Nicht pivotisierte LR-Zerlegung des führenden completed_size-Blocks."""
    L: np.ndarray
    R: np.ndarray
    completed_size: int
    dimension: int

    @property
    def complete(self) -> bool:
        return self.completed_size == self.dimension


def lr_decompose(M: np.ndarray, tol: float = LR_PIVOT_TOL) -> LRFactors:
    """
    Gauß-Elimination ohne Pivotisierung.

    Bricht am ersten führenden Hauptminor ab, dessen Pivot betragsmäßig kleiner
    als tol·||M|| ist; ein Abbruch ist ein Ergebnis, kein Fehler.

    Args:
        M: Quadratische Matrix
        tol: Relative Pivot-Schwelle

    Returns:
        LRFactors mit L (unipotent untere Dreiecksmatrix) und R (obere Dreiecksmatrix)
    """
    M = as_matrix(M, "M")
    n = M.shape[0]
    if M.shape[1] != n:
        raise ValueError(f"Quadratische Matrix erwartet, nicht {M.shape}")

    threshold = tol * spectral_norm(M)
    work = M.copy()
    L = np.eye(n, dtype=complex)
    completed = 0
    for k in range(n):
        pivot = work[k, k]
        if abs(pivot) <= threshold:
            logger.debug(f"LR-Zerlegung bricht bei Pivot {k + 1} ab (|Pivot| = {abs(pivot):.2e})")
            break
        L[k + 1:, k] = work[k + 1:, k] / pivot
        work[k + 1:, k:] -= np.outer(L[k + 1:, k], work[k, k:])
        completed = k + 1

    return LRFactors(L[:completed, :completed], np.triu(work[:completed, :completed]), completed, n)


@dataclass
class BiorthogonalPair:
    """Biorthogonale Basen V, W (W^H V = I) samt Polen der erzeugenden Räume."""
    V: np.ndarray
    W: np.ndarray
    poles_k: List[ProjectivePole]
    poles_l: List[ProjectivePole]
    lr: Optional[LRFactors] = None
    breakdown: Optional[BreakdownReport] = None

    @property
    def size(self) -> int:
        return self.V.shape[1]

    def biorthogonality_defect(self) -> float:
        return spectral_norm(self.W.conj().T @ self.V - np.eye(self.size))


def biorthogonalize(Vhat: np.ndarray, What: np.ndarray,
                    poles_k: Sequence[ProjectivePole] = (),
                    poles_l: Sequence[ProjectivePole] = (),
                    tol: float = LR_PIVOT_TOL) -> BiorthogonalPair:
    """
    Macht geschachtelte Basen biorthogonal: V = V̂·R^{-1}, W = Ŵ·L^{-H} mit Ŵ^H V̂ = L·R.

    Dreiecksfaktoren von rechts erhalten die Schachtelung. Bricht die
    LR-Zerlegung nach k Schritten ab, wird das Paar auf k Spalten gekürzt.

    Args:
        Vhat: Geschachtelte Basis von K
        What: Geschachtelte Basis von L, gleiche Größe
        poles_k: Pole von K (werden passend gekürzt gespeichert)
        poles_l: Pole von L
        tol: Pivot-Schwelle der LR-Zerlegung

    Returns:
        BiorthogonalPair, bei Zusammenbruch mit Bericht

    Raises:
        BreakdownError: w^H v ist (numerisch) null
    """
    Vhat = as_matrix(Vhat, "V̂")
    What = as_matrix(What, "Ŵ")
    if Vhat.shape != What.shape:
        raise ValueError(f"V̂ {Vhat.shape} und Ŵ {What.shape} haben verschiedene Größen")

    M = What.conj().T @ Vhat
    if abs(M[0, 0]) <= tol * la.norm(Vhat[:, 0]) * la.norm(What[:, 0]):
        raise BreakdownError("w^H v verschwindet: keine biorthogonalen Basen möglich")

    lr = lr_decompose(M, tol)
    c = lr.completed_size
    V = la.solve_triangular(lr.R.T, Vhat[:, :c].T, lower=True).T
    W = la.solve_triangular(lr.L.conj(), What[:, :c].T, lower=True, unit_diagonal=True).T

    breakdown = None
    if c < lr.dimension:
        breakdown = BreakdownReport(
            BreakdownKind.SERIOUS, c + 1, float(abs(lr.R[-1, -1]) if c else 0.0),
            f"Führender Hauptminor {c + 1} von Ŵ^H V̂ ist singulär"
        )
        logger.warning(f"Ernsthafter Zusammenbruch: LR-Zerlegung nach {c} Schritten beendet")

    return BiorthogonalPair(V, W, list(poles_k)[:max(c - 1, 0)], list(poles_l)[:max(c - 1, 0)],
                            lr, breakdown)


# ---------------------------------------------------------------------------
# Ein-Matrix-Darstellung
# ---------------------------------------------------------------------------

def _check_side(z: np.ndarray, poles: Sequence[ProjectivePole], label: str, tol: float) -> None:
    n = z.shape[0]
    if n < 2:
        return
    if len(poles) < n - 1:
        raise ValueError(f"{label}: {n - 1} Pole benötigt, {len(poles)} vorhanden")
    order = shape_order_for_poles(poles, n)
    bottom = structural_bottom(order, n)
    scale = max(spectral_norm(z), np.finfo(float).tiny)
    for j in range(1, n + 1):
        below = z[bottom[j]:, j - 1]
        if below.size and la.norm(below) > tol * scale:
            raise StructureMismatchError(
                f"{label}: Spalte {j} hat Einträge unterhalb von Zeile {bottom[j]} "
                f"({la.norm(below) / scale:.2e})"
            )
    decompose_qr_plus_d(z, poles, tol)


def validate_oblique_structure(z: np.ndarray, poles_k: Sequence[ProjectivePole],
                               poles_l: Sequence[ProjectivePole], tol: float = STRUCTURE_TOL) -> None:
    """
    Prüft die Struktur einer schiefen Projektion.

    Unterhalb der Diagonale bestimmen die Pole von K die Struktur (Nullmuster und
    Rang über Z - D_Xi = QR), oberhalb die Pole von L (dieselbe Prüfung für Z^H).

    Raises:
        StructureMismatchError: Die Struktur passt nicht zu den Polen
    """
    z = as_matrix(z, "Z")
    _check_side(z, poles_k, "K-Seite", tol)
    _check_side(z.conj().T, poles_l, "L-Seite", tol)


def oblique_single(A: np.ndarray, pair: BiorthogonalPair, validate: bool = True,
                   tol: float = STRUCTURE_TOL) -> np.ndarray:
    """
    Schiefe Projektion Z = W^H·A·V in Ein-Matrix-Darstellung.

    Raises:
        StructureMismatchError: Z passt nicht zu den Polen (nur bei validate=True)
    """
    A = as_matrix(A, "A")
    z = pair.W.conj().T @ A @ pair.V
    if validate:
        validate_oblique_structure(z, pair.poles_k, pair.poles_l, tol)
    return z


def unitary_structure_ranks(z: np.ndarray, tol: float = STRUCTURE_TOL) -> List[int]:
    """
    Ränge der Blöcke oberhalb der Diagonale, z(1:i, i+1:n) für i = 1..n-1.

    Für die Projektion einer unitären Matrix auf einen Standard-Krylov-Raum sind
    alle diese Ränge <= 1 (inv-Hessenberg-Struktur oberhalb der Diagonale).
    """
    z = as_matrix(z, "Z")
    n = z.shape[0]
    scale = spectral_norm(z)
    ranks = []
    for i in range(1, n):
        sv = la.svdvals(z[:i, i:])
        ranks.append(int(np.sum(sv > tol * scale)))
    return ranks


# ---------------------------------------------------------------------------
# Pencil-Darstellung
# ---------------------------------------------------------------------------

def _split_report(step: int, measure: float, message: str) -> BreakdownReport:
    return BreakdownReport(BreakdownKind.RL_SPLIT, step, measure, message)


def _right_factor(X: np.ndarray, Y: np.ndarray, free_pole: ProjectivePole,
                  tol: float) -> np.ndarray:
    """
    Obere Dreiecksmatrix R_B, sodass X·R_B und Y·R_B tridiagonal sind.

    Spalte j wird aus dem Kern der Zeilen 1..j-2 von X und Y bestimmt; Spalte 2
    legt über den freien Pol das Verhältnis der Einträge (1, 2) fest.
    """
    n = X.shape[1]
    rb = np.zeros((n, n), dtype=complex)
    rb[0, 0] = 1.0
    for j in range(2, n + 1):
        if j == 2:
            a = np.conj(free_pole.nu) * X[0, :2] - np.conj(free_pole.mu) * Y[0, :2]
            col = np.array([a[1], -a[0]]) if np.any(a) else np.array([0.0, 1.0])
        else:
            stacked = np.vstack([X[:j - 2, :j], Y[:j - 2, :j]])
            _, s, vh = la.svd(stacked)
            if j >= 4 and s[-1] > tol * s[0]:
                report = _split_report(j, float(s[-1] / s[0]), "Kein Kern für tridiagonale Spalte")
                raise BreakdownError(f"RL-Zerlegung existiert nicht in Spalte {j}", report)
            col = vh[-1].conj()
        norm = la.norm(col)
        if abs(col[-1]) <= 1e-14 * norm:
            report = _split_report(j, float(abs(col[-1]) / norm), "Diagonaleintrag von R_B verschwindet")
            raise BreakdownError(f"RL-Zerlegung existiert nicht in Spalte {j}", report)
        rb[:j, j - 1] = col / norm
    return rb


def dual_inv_hessenberg(dec_W: KrylovDecomposition, n: int,
                        structure_tol: float = STRUCTURE_TOL) -> InvHessenbergPencil:
    """
    inv-Hessenberg-Form des führenden n x n Pencils von L.

    Raises:
        StructureMismatchError: Pencil nicht echt oder Ergebnis ohne inv-Hessenberg-Struktur
        SingularMatrixError: Ein Dreiecksfaktor ist singulär
    """
    if dec_W.n < n:
        raise ValueError(f"Die Zerlegung von L hat nur {dec_W.n} Schritte, {n} benötigt")
    square = HessenbergPencil(dec_W.Hext[:n, :n], dec_W.Kext[:n, :n])
    inverse = to_inv_hessenberg(square)
    for name, z in (("H", inverse.H_inv), ("K", inverse.K_inv)):
        ranks = rank_profile_lower(z, structure_tol) if n > 1 else []
        if max(ranks, default=0) > 1:
            raise StructureMismatchError(f"{name} von L ist nicht inv-Hessenberg: Ränge {ranks}")
    return inverse


def oblique_pencil(A: np.ndarray, pair: BiorthogonalPair, dec_V: KrylovDecomposition,
                   dec_W: Optional[KrylovDecomposition] = None,
                   free_pole: Optional[ProjectivePole] = None,
                   tol: float = RESIDUAL_TOL,
                   structure_tol: float = STRUCTURE_TOL) -> TridiagonalPencil:
    """
    Tridiagonales Pencil (T̲, S̲) der schiefen Projektion.

    Mit V̂ = V·R gilt A·V·(R·K̲_V) = V·(R·H̲_V). Eine obere Dreiecksmatrix R_B von
    rechts macht beide Faktoren tridiagonal; sie wird Spalte für Spalte bestimmt.

    Args:
        A: Matrix
        pair: Biorthogonales Paar mit n+1 Spalten (aus dec_V.V und einer Basis von L)
        dec_V: Rationale Arnoldi-Zerlegung von K mit mindestens n Schritten
        dec_W: Zerlegung von L; wird in inv-Hessenberg-Form gebracht, ihre Pole
            müssen auf der Superdiagonale wiedererscheinen
        free_pole: Freier Pol für das Verhältnis T(1,2)/S(1,2) (konjugiert); Standard unendlich
        tol: Zulässiger Rest ||W^H A V S̲ - T̲|| / (||A||·||S̲||)
        structure_tol: Zulässiger Anteil außerhalb des Bandes

    Returns:
        Erweitertes TridiagonalPencil ((n+1) x n)

    Raises:
        BreakdownError: Die RL-Zerlegung existiert nicht (mit RL_SPLIT-Bericht)
        StructureMismatchError: Band-, Rest- oder Polprüfung fehlgeschlagen
        SingularMatrixError: Das Pencil von L lässt sich nicht umformen
    """
    A = as_matrix(A, "A")
    free_pole = free_pole or ProjectivePole.infinity()
    n = pair.size - 1
    if n < 1:
        raise ValueError("Das biorthogonale Paar braucht mindestens zwei Spalten")
    if pair.lr is None or pair.lr.completed_size < n + 1:
        raise ValueError("Das Paar enthält keine vollständigen LR-Faktoren")
    if dec_V.n < n:
        raise ValueError(f"Die Zerlegung von K hat nur {dec_V.n} Schritte, {n} benötigt")

    R = pair.lr.R[:n + 1, :n + 1]
    X = R @ dec_V.Hext[:n + 1, :n]
    Y = R @ dec_V.Kext[:n + 1, :n]
    rb = _right_factor(X, Y, free_pole, structure_tol)
    T = X @ rb
    S = Y @ rb

    pencil = TridiagonalPencil.from_dense(T, S, tol=structure_tol)

    projected = pair.W.conj().T @ A @ pair.V
    T_band, S_band = pencil.dense_T(), pencil.dense_S()
    residual = spectral_norm(projected @ S_band - T_band) / (spectral_norm(A) * spectral_norm(S_band))
    logger.debug(f"Schiefes Pencil: n = {n}, Rest {residual:.2e}")
    if residual > tol:
        raise StructureMismatchError(f"W^H A V S - T ist zu groß ({residual:.2e})")

    if dec_W is not None:
        dual_inv_hessenberg(dec_W, n, structure_tol)
        if n >= 3:
            recovered = recover_poles_super(pencil)
            errors = [p.cross_ratio_error(q) for p, q in zip(recovered, dec_W.poles)]
            mismatch = [k + 1 for k, e in enumerate(errors) if e > POLE_MATCH_TOL]
            if mismatch:
                raise StructureMismatchError(
                    f"Superdiagonale passt nicht zu den Polen von L an {mismatch} (max. {max(errors):.2e})"
                )
            if max(errors, default=0.0) > 1e-8:
                logger.warning(f"Superdiagonal-Pole nur auf {max(errors):.2e} genau")
    return pencil


@dataclass
class OracleResult:
    """Alle Zwischenergebnisse des expliziten Orakels."""
    dec_V: KrylovDecomposition
    dec_W: KrylovDecomposition
    pair: BiorthogonalPair
    pencil: Optional[TridiagonalPencil] = None
    breakdown: Optional[BreakdownReport] = None
    notes: List[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.pencil.n if self.pencil is not None else 0


def build_oracle(A: np.ndarray, v: np.ndarray, w: np.ndarray,
                 poles_k: Sequence[ProjectivePole], poles_l: Sequence[ProjectivePole],
                 n: int, free_pole: Optional[ProjectivePole] = None,
                 lr_tol: float = LR_PIVOT_TOL) -> OracleResult:
    """
    Explizites Orakel: rationale Arnoldi-Iteration für A und A^H, LR-Zerlegung,
    biorthogonale Basen und tridiagonales Pencil.

    Args:
        A: Matrix m x m
        v: Startvektor von K
        w: Startvektor von L (wird so skaliert, dass w^H v = 1)
        poles_k: Pole von K (mindestens n)
        poles_l: Pole von L bezüglich A^H (mindestens n)
        n: Anzahl Pencil-Spalten
        free_pole: Freier Pol des Pencils
        lr_tol: Pivot-Schwelle

    Returns:
        OracleResult; nach einem Zusammenbruch mit verkürztem Pencil

    Raises:
        BreakdownError: w^H v = 0
    """
    A = as_matrix(A, "A")
    v = as_vector(v, "v")
    w = as_vector(w, "w")
    if len(poles_k) < n or len(poles_l) < n:
        raise ValueError(f"Für n = {n} werden je {n} Pole benötigt")
    v = v / la.norm(v)
    s = np.vdot(w, v)
    if abs(s) <= 1e-14 * la.norm(w):
        raise BreakdownError("w^H v verschwindet")
    w = w / np.conj(s)

    dec_V = rational_arnoldi(A, v, poles_k[:n], solver=ShiftedSolver(A))
    dec_W = rational_arnoldi(A.conj().T, w, poles_l[:n], solver=ShiftedSolver(A.conj().T))
    size = min(dec_V.V.shape[1], dec_W.V.shape[1])
    pair = biorthogonalize(dec_V.V[:, :size], dec_W.V[:, :size], dec_V.poles, dec_W.poles, lr_tol)

    breakdown = pair.breakdown or dec_V.breakdown or dec_W.breakdown
    result = OracleResult(dec_V, dec_W, pair, breakdown=breakdown)
    if pair.size < 2:
        result.notes.append("Kein Pencil: weniger als zwei biorthogonale Spalten")
        return result
    try:
        result.pencil = oblique_pencil(A, pair, dec_V, dec_W, free_pole)
    except BreakdownError as e:
        result.breakdown = e.report
        result.notes.append(str(e))
        logger.warning(f"Orakel ohne Pencil: {e}")
    return result


"""
Rationale Arnoldi-Iteration

Baut orthonormale, geschachtelte Basen rationaler Krylov-Räume und das
zugehörige (n+1) x n Hessenberg-Pencil mit A·V·K̲ = V·H̲ auf.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from .exceptions import PoleOnSpectrumError
from .pencils import ContinuationPair, HessenbergPencil, ProjectivePole
from .structured_core import (
    BreakdownKind,
    BreakdownReport,
    ShiftedSolver,
    as_matrix,
    as_vector,
    spectral_norm,
)

logger = logging.getLogger(__name__)

BREAKDOWN_TOL = 1e-13


@dataclass
class KrylovDecomposition:
    """
    Ergebnis der rationalen Arnoldi-Iteration.

    V hat n+1 orthonormale Spalten, Hext und Kext sind (n+1) x n Hessenberg.
    Nach einem Zusammenbruch ist n kleiner als die Zahl der angefragten Pole
    und ``breakdown`` beschreibt den Abbruch.
    """
    V: np.ndarray
    Hext: np.ndarray
    Kext: np.ndarray
    poles: List[ProjectivePole]
    continuation: List[ContinuationPair] = field(default_factory=list)
    breakdown: Optional[BreakdownReport] = None

    @property
    def n(self) -> int:
        return self.Hext.shape[1]

    @property
    def completed(self) -> bool:
        return self.breakdown is None

    def pencil(self) -> HessenbergPencil:
        return HessenbergPencil(self.Hext, self.Kext)

    def orthogonality_defect(self) -> float:
        """||V^H V - I||."""
        k = self.V.shape[1]
        return spectral_norm(self.V.conj().T @ self.V - np.eye(k))

    def residual(self, a: np.ndarray) -> float:
        """||A·V·Kext - V·Hext|| / ||A||."""
        if self.n == 0:
            return 0.0
        return spectral_norm(a @ self.V @ self.Kext - self.V @ self.Hext) / spectral_norm(a)

    def projection(self, a: np.ndarray) -> np.ndarray:
        """Explizite Projektion V_n^H A V_n auf die ersten n Basisvektoren."""
        vn = self.V[:, :self.n]
        return vn.conj().T @ a @ vn


def reorthogonalize(V: np.ndarray, candidate: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Ein klassischer Gram-Schmidt-Durchgang gegen die Spalten von V.

    Args:
        V: Matrix mit orthonormalen Spalten
        candidate: Zu orthogonalisierender Vektor

    Returns:
        Tuple aus (orthogonalisierter Vektor, Koeffizienten V^H·candidate)
    """
    coefficients = V.conj().T @ candidate
    return candidate - V @ coefficients, coefficients


def _default_continuation(poles: Sequence[ProjectivePole],
                          continuation: Optional[Sequence[ContinuationPair]]) -> List[ContinuationPair]:
    if continuation is None:
        return [ContinuationPair.default_for(p) for p in poles]
    continuation = list(continuation)
    if len(continuation) != len(poles):
        raise ValueError(
            f"{len(continuation)} Fortsetzungspaare für {len(poles)} Pole angegeben"
        )
    for k, (pair, pole) in enumerate(zip(continuation, poles), start=1):
        if not pair.is_admissible_for(pole):
            raise ValueError(f"Fortsetzungspaar {k} ({pair.rho}, {pair.eta}) passt zum Pol {pole}")
    return continuation


def rational_arnoldi(A: np.ndarray, v: np.ndarray, poles: Sequence[ProjectivePole],
                     continuation: Optional[Sequence[ContinuationPair]] = None,
                     reorth: bool = True,
                     tol: float = BREAKDOWN_TOL,
                     solver: Optional[ShiftedSolver] = None) -> KrylovDecomposition:
    """
    Rationale Arnoldi-Iteration.

    Schritt k setzt x = (nu_k·A - mu_k·I)^{-1} (rho_k·A - eta_k·I) v_k, orthogonalisiert
    gegen v_1..v_k und normiert mit h_{k+1,k}. Aus x = V·h folgen die Spalten
    K̲(:,k) = nu_k·h - rho_k·e_k und H̲(:,k) = mu_k·h - eta_k·e_k.

    Ein glücklicher Zusammenbruch liegt vor, wenn h_{k+1,k} <= tol·||x|| mit x vor
    der Orthogonalisierung. Gemessen wird also nicht an ||A||: bei einem Pol nahe
    am Spektrum ist ||x|| viel größer als ||A||·||v_k||, bei einem Pol weit weg kleiner.

    Args:
        A: Quadratische m x m Matrix
        v: Startvektor (wird normiert)
        poles: Pole xi_1..xi_n, n < m
        continuation: Fortsetzungspaare; Standard siehe ContinuationPair.default_for
        reorth: Zweiten Gram-Schmidt-Durchgang ausführen
        tol: Schwelle für den glücklichen Zusammenbruch relativ zur Norm vor der Orthogonalisierung
        solver: Vorhandener ShiftedSolver (Faktorisierungen werden geteilt)

    Returns:
        KrylovDecomposition, bei Zusammenbruch verkürzt

    Raises:
        ValueError: Ungültige Eingaben
        PoleOnSpectrumError: Ein Pol liegt (numerisch) auf dem Spektrum von A
    """
    A = as_matrix(A, "A")
    m = A.shape[0]
    if A.shape[1] != m:
        raise ValueError(f"A muss quadratisch sein, nicht {A.shape}")
    v = as_vector(v, "Startvektor")
    if v.size != m:
        raise ValueError(f"Startvektor hat Länge {v.size}, erwartet {m}")
    poles = list(poles)
    n = len(poles)
    if n >= m:
        raise ValueError(f"Zu viele Pole: n = {n} muss kleiner als m = {m} sein")
    v_norm = la.norm(v)
    if v_norm == 0:
        raise ValueError("Startvektor ist null")
    pairs = _default_continuation(poles, continuation)
    solver = solver or ShiftedSolver(A)

    V = np.zeros((m, n + 1), dtype=complex)
    H = np.zeros((n + 1, n), dtype=complex)
    K = np.zeros((n + 1, n), dtype=complex)
    V[:, 0] = v / v_norm

    for k in range(n):
        pole, pair = poles[k], pairs[k]
        vk = V[:, k]
        rhs = pair.rho * (A @ vk) - pair.eta * vk
        try:
            x = solver.solve(pole.mu, pole.nu, rhs)
        except PoleOnSpectrumError:
            logger.error(f"Schritt {k + 1}: Pol {pole} liegt auf dem Spektrum von A")
            raise

        initial_norm = la.norm(x)
        basis = V[:, :k + 1]
        x, h = reorthogonalize(basis, x)
        if reorth:
            x, correction = reorthogonalize(basis, x)
            h = h + correction
        beta = la.norm(x)
        logger.debug(f"Schritt {k + 1}: Pol {pole}, h_(k+1,k) = {beta:.3e}")

        if beta <= tol * initial_norm:
            report = BreakdownReport(
                BreakdownKind.LUCKY, k + 1, float(beta / initial_norm) if initial_norm else 0.0,
                "Invarianter Unterraum erreicht"
            )
            logger.warning(f"Glücklicher Zusammenbruch in Schritt {k + 1} (Maß {report.measure:.2e})")
            return KrylovDecomposition(V[:, :k + 1], H[:k + 1, :k], K[:k + 1, :k],
                                       poles[:k], pairs[:k], report)

        column = np.zeros(n + 1, dtype=complex)
        column[:k + 1] = h
        column[k + 1] = beta
        K[:, k] = pole.nu * column
        K[k, k] -= pair.rho
        H[:, k] = pole.mu * column
        H[k, k] -= pair.eta
        V[:, k + 1] = x / beta

    decomposition = KrylovDecomposition(V, H, K, poles, pairs)
    logger.info(
        f"Rationale Arnoldi-Iteration: n = {n}, Orthogonalität {decomposition.orthogonality_defect():.2e}, "
        f"Rest {decomposition.residual(A):.2e}"
    )
    return decomposition


def extended_krylov_basis(A: np.ndarray, v: np.ndarray, exponents: Sequence[int]) -> np.ndarray:
    """
    Orthonormale Basis von span{A^{e_1} v, A^{e_2} v, ...} durch explizite Potenzen.

    Nur für kleine Vergleichsrechnungen gedacht; negative Potenzen über dichte Lösungen.
    """
    A = as_matrix(A, "A")
    v = as_vector(v)
    columns = []
    for e in exponents:
        x = v.copy()
        for _ in range(abs(e)):
            x = A @ x if e > 0 else la.solve(A, x)
        columns.append(x)
    q, _ = la.qr(np.column_stack(columns), mode='economic')
    return q


@dataclass
class ImplicitQReport:
    """Vergleich zweier Zerlegungen nach dem impliziten Q-Satz."""
    correlations: np.ndarray
    column_match: bool
    pencil_residual: float
    triangular_defect: float
    tol: float

    @property
    def essentially_equal(self) -> bool:
        return self.column_match and self.pencil_residual <= self.tol and self.triangular_defect <= self.tol

    def worst_correlation_error(self) -> float:
        return float(np.max(np.abs(np.abs(self.correlations) - 1.0)))


def implicit_q_compare(d1: KrylovDecomposition, d2: KrylovDecomposition,
                       tol: float = 1e-10) -> ImplicitQReport:
    """
    Prüft, ob zwei Zerlegungen im Wesentlichen gleich sind.

    Spaltenweise muss v1_i^H v2_i unimodular sein. Mit D = diag(v1_i^H v2_i) wird
    außerdem (K2, H2) = D^H·(K1, H1)·U mit oberer Dreiecksmatrix U geprüft.

    Raises:
        ValueError: Die Zerlegungen haben verschiedene Größen
    """
    if d1.V.shape != d2.V.shape or d1.Hext.shape != d2.Hext.shape:
        raise ValueError(
            f"Zerlegungen passen nicht zusammen: V {d1.V.shape} / {d2.V.shape}, "
            f"H {d1.Hext.shape} / {d2.Hext.shape}"
        )

    correlations = np.einsum('ij,ij->j', d1.V.conj(), d2.V)
    column_match = bool(np.all(np.abs(np.abs(correlations) - 1.0) <= tol))

    pencil_residual = 0.0
    triangular_defect = 0.0
    if d1.n > 0:
        dh = np.diag(correlations.conj())
        lhs = np.vstack([dh @ d1.Kext, dh @ d1.Hext])
        rhs = np.vstack([d2.Kext, d2.Hext])
        u, *_ = la.lstsq(lhs, rhs)
        scale = max(spectral_norm(rhs), np.finfo(float).tiny)
        pencil_residual = spectral_norm(lhs @ u - rhs) / scale
        triangular_defect = spectral_norm(np.tril(u, -1)) / max(spectral_norm(u), np.finfo(float).tiny)

    report = ImplicitQReport(correlations, column_match, pencil_residual, triangular_defect, tol)
    if not report.essentially_equal:
        logger.info(
            f"Zerlegungen nicht im Wesentlichen gleich: Korrelationsfehler "
            f"{report.worst_correlation_error():.2e}, Pencil-Rest {pencil_residual:.2e}"
        )
    return report

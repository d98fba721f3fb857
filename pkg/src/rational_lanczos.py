"""
Nichthermitesche rationale Lanczos-Iteration

Sechs-Term-Rekursion für biorthogonale Basen V, W der Räume K(A, v; Xi) und
L(A^H, w; Psi) sowie das erweiterte tridiagonale Pencil (T̲, S̲) mit
A·V_{n+1}·S̲ = V_{n+1}·T̲. Innere Produkte sind (x, y) = y^H x.

Pole werden projektiv als Paare übergeben: Xi als (b, l) mit Pol b/l und
Psi als (lambda, beta) mit Pol lambda/beta; unendlich heißt l = 0 bzw. beta = 0.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la

from .exceptions import BreakdownError, StructureMismatchError
from .pencils import ProjectivePole, TridiagonalPencil
from .structured_core import BreakdownKind, BreakdownReport, ShiftedSolver, as_matrix, as_vector

logger = logging.getLogger(__name__)

BREAKDOWN_TOL = 1e-13
IMPROPER_TOL = 1e-14


def _ip(x: np.ndarray, y: np.ndarray) -> complex:
    """(x, y) = y^H x."""
    return complex(np.vdot(y, x))


@dataclass
class LanczosStep:
    """Skalare eines Schritts; bei i = 1 ist (d, c, gamma, delta) = (u, u·temp1, alpha, alpha·temp2)."""
    index: int
    d: complex
    c: complex
    gamma: complex
    delta: complex
    u: complex
    alpha: complex
    normalization_product: complex
    pole_v: ProjectivePole
    pole_w: ProjectivePole


@dataclass
class LanczosState:
    """
    Laufender Zustand: nur die letzten zwei Basisvektoren je Seite und die
    Hilfsvektoren des aktuellen Schritts.
    """
    v_prev: Optional[np.ndarray] = None
    v_cur: Optional[np.ndarray] = None
    w_prev: Optional[np.ndarray] = None
    w_cur: Optional[np.ndarray] = None
    v_bar: Optional[np.ndarray] = None
    w_bar: Optional[np.ndarray] = None
    v_tilde: Optional[np.ndarray] = None
    w_tilde: Optional[np.ndarray] = None
    step: int = 0

    def held_vectors(self) -> int:
        return sum(x is not None for x in (
            self.v_prev, self.v_cur, self.w_prev, self.w_cur,
            self.v_bar, self.w_bar, self.v_tilde, self.w_tilde,
        ))

    def advance(self, v_next: np.ndarray, w_next: np.ndarray) -> None:
        self.v_prev, self.v_cur = self.v_cur, v_next
        self.w_prev, self.w_cur = self.w_cur, w_next
        self.step += 1


@dataclass
class LanczosResult:
    """
    Ergebnis von rat_lan.

    V und W haben k+1 Spalten, das Pencil ist (k+1) x k. Nach einem
    Zusammenbruch in Schritt i ist k = i - 1.

    Jede Spalte von (T̲, S̲) ist auf Einheitsnorm des gestapelten Paares
    skaliert. Das ändert weder A·V·S̲ = V·T̲ noch Pole oder Ritz-Werte, hält
    aber das Projektionsresiduum unabhängig von der Größe von |u| und der Pole.
    Die Rohwerte der Rekursion stehen in steps.
    """
    V: np.ndarray
    W: np.ndarray
    pencil: TridiagonalPencil
    poles_k: List[ProjectivePole]
    poles_l: List[ProjectivePole]
    free_pole_v: ProjectivePole
    free_pole_w: ProjectivePole
    steps: List[LanczosStep] = field(default_factory=list)
    breakdown: Optional[BreakdownReport] = None
    max_held_vectors: int = 0

    @property
    def n(self) -> int:
        return self.pencil.n

    @property
    def completed(self) -> bool:
        return self.breakdown is None

    @property
    def T(self) -> np.ndarray:
        return self.pencil.dense_T()

    @property
    def S(self) -> np.ndarray:
        return self.pencil.dense_S()

    def biorthogonality(self, k: Optional[int] = None) -> float:
        """||W_k^H V_k - I|| für die ersten k Spalten (Standard: k = n)."""
        k = self.n if k is None else k
        return float(la.norm(self.W[:, :k].conj().T @ self.V[:, :k] - np.eye(k), 2))

    def projection_residual(self, a: np.ndarray, k: Optional[int] = None) -> float:
        """||W_{k+1}^H A V_{k+1} S̲_k - T̲_k||."""
        k = self.n if k is None else k
        sub = self.pencil.extended(k)
        v, w = self.V[:, :k + 1], self.W[:, :k + 1]
        return float(la.norm(w.conj().T @ a @ v @ sub.dense_S() - sub.dense_T(), 2))


class RationalLanczos:
    """
    Rationale Lanczos-Iteration für eine feste Matrix.

    Faktorisierungen der verschobenen Systeme werden über mehrere Läufe hinweg
    im ShiftedSolver geteilt.
    """

    def __init__(self, A: np.ndarray,
                 free_pole_v: Optional[ProjectivePole] = None,
                 free_pole_w: Optional[ProjectivePole] = None,
                 tol: float = BREAKDOWN_TOL,
                 rebiorth: bool = False,
                 solver: Optional[ShiftedSolver] = None):
        """
        Args:
            A: Quadratische Matrix
            free_pole_v: Freies Paar (b_1, l_1); Standard unendlich
            free_pole_w: Freies Paar (lambda_1, beta_1); Standard unendlich
            tol: Relative Schwelle für den ernsthaften Zusammenbruch
            rebiorth: Volle Rebiorthogonalisierung (nur zur Fehlersuche)
            solver: Vorhandener ShiftedSolver für A
        """
        self.A = as_matrix(A, "A")
        if self.A.shape[0] != self.A.shape[1]:
            raise ValueError(f"A muss quadratisch sein, nicht {self.A.shape}")
        self.AH = self.A.conj().T
        self.free_pole_v = free_pole_v or ProjectivePole.infinity()
        self.free_pole_w = free_pole_w or ProjectivePole.infinity()
        self.tol = tol
        self.rebiorth = rebiorth
        self.solver = solver or ShiftedSolver(self.A)

    # -- verschobene Systeme ------------------------------------------------

    def _solve_v(self, b: complex, l: complex, x: np.ndarray) -> np.ndarray:
        """(l·A - b·I)^{-1} x"""
        return self.solver.solve(b, l, x)

    def _solve_w(self, lam: complex, beta: complex, x: np.ndarray) -> np.ndarray:
        """(beta·A^H - lambda·I)^{-1} x"""
        return self.solver.solve(lam, beta, x, adjoint=True)

    # -- Normierung ---------------------------------------------------------

    def _normalize(self, vh: np.ndarray, wh: np.ndarray, step: int) -> Tuple[complex, complex, complex]:
        """
        Teilt 1/(v̂, ŵ) = conj(alpha)·u so auf, dass ||u·v̂|| = ||alpha·ŵ||.

        Raises:
            BreakdownError: (v̂, ŵ) verschwindet (mit SERIOUS-Bericht)
        """
        ip = _ip(vh, wh)
        nv, nw = la.norm(vh), la.norm(wh)
        measure = abs(ip) / (nv * nw) if nv and nw else 0.0
        if measure < self.tol:
            report = BreakdownReport(BreakdownKind.SERIOUS, step, float(measure),
                                     "Inneres Produkt der neuen Vektoren verschwindet")
            raise BreakdownError(f"Ernsthafter Zusammenbruch in Schritt {step}", report)
        pi = 1.0 / ip
        magnitude = np.sqrt(abs(pi) * nw / nv)
        u = magnitude * pi / abs(pi)
        alpha = np.conj(pi / u)
        return u, alpha, np.conj(alpha) * u * ip

    def _denominator(self, value: complex, scale: float, step: int, what: str) -> complex:
        if abs(value) <= self.tol * scale:
            report = BreakdownReport(BreakdownKind.SERIOUS, step, float(abs(value) / scale if scale else 0.0),
                                     f"Nenner {what} verschwindet")
            raise BreakdownError(f"Ernsthafter Zusammenbruch in Schritt {step} ({what})", report)
        return value

    # -- Iteration ----------------------------------------------------------

    def run(self, v: np.ndarray, w: np.ndarray, poles_k: Sequence[ProjectivePole],
            poles_l: Sequence[ProjectivePole], n: int) -> LanczosResult:
        """
        Führt n Schritte aus.

        Args:
            v: Startvektor von K
            w: Startvektor von L (wird so skaliert, dass w^H v = 1)
            poles_k: Pole xi_1..xi_n (mindestens n, weitere werden ignoriert)
            poles_l: Pole psi_1..psi_n
            n: Anzahl Schritte, n < m

        Returns:
            LanczosResult; nach einem Zusammenbruch verkürzt, mit Bericht

        Raises:
            ValueError: Ungültige Eingaben
            BreakdownError: w^H v = 0
            PoleOnSpectrumError: Ein Pol liegt auf dem Spektrum
        """
        A, AH = self.A, self.AH
        m = A.shape[0]
        v = as_vector(v, "v")
        w = as_vector(w, "w")
        if v.size != m or w.size != m:
            raise ValueError(f"Startvektoren müssen Länge {m} haben")
        if not 1 <= n < m:
            raise ValueError(f"n muss in 1..{m - 1} liegen (ist {n})")
        if len(poles_k) < n or len(poles_l) < n:
            raise ValueError(f"Für n = {n} werden je {n} Pole benötigt")

        # 1-basierte Pollisten: Index 1 frei, Index k+1 für Pol k
        b = [0j, self.free_pole_v.mu] + [p.mu for p in poles_k[:n]]
        l = [0j, self.free_pole_v.nu] + [p.nu for p in poles_k[:n]]
        lam = [0j, self.free_pole_w.mu] + [p.mu for p in poles_l[:n]]
        beta = [0j, self.free_pole_w.nu] + [p.nu for p in poles_l[:n]]

        norm_v = la.norm(v)
        if norm_v == 0:
            raise ValueError("Startvektor v ist null")
        v1 = v / norm_v
        s = _ip(v1, w)
        if abs(s) <= 1e-14 * la.norm(w):
            raise BreakdownError("w^H v verschwindet")
        w1 = w / np.conj(s)

        V = np.zeros((m, n + 1), dtype=complex)
        W = np.zeros((m, n + 1), dtype=complex)
        T = np.zeros((n + 1, n), dtype=complex)
        S = np.zeros((n + 1, n), dtype=complex)
        V[:, 0], W[:, 0] = v1, w1

        state = LanczosState()
        state.advance(v1, w1)
        steps: List[LanczosStep] = []
        max_held = state.held_vectors()
        completed = 0

        try:
            # Schritt 1
            state.v_bar = self._solve_v(b[2], l[2], v1)
            state.w_bar = self._solve_w(lam[2], beta[2], w1)
            Avb = A @ state.v_bar
            AHwb = AH @ state.w_bar
            scale = la.norm(Avb) * la.norm(w1)
            temp1 = _ip(state.v_bar, w1) / self._denominator(_ip(Avb, w1), scale, 1, "(A v̄, w)")
            Av1 = A @ v1
            scale = la.norm(state.w_bar) * la.norm(Av1)
            temp2 = _ip(state.w_bar, v1) / self._denominator(_ip(state.w_bar, Av1), scale, 1, "(w̄, A v)")
            vh = state.v_bar - temp1 * Avb
            wh = state.w_bar - temp2 * AHwb
            vh, wh = self._rebiorthogonalize(vh, wh, V[:, :1], W[:, :1])
            u, alpha, product = self._normalize(vh, wh, 1)
            max_held = max(max_held, state.held_vectors())

            S[0, 0], S[1, 0] = u * temp1, l[2]
            T[0, 0], T[1, 0] = u, b[2]
            steps.append(LanczosStep(1, u, u * temp1, alpha, alpha * temp2, u, alpha, product,
                                     ProjectivePole(b[2], l[2]), ProjectivePole(lam[2], beta[2])))
            state.advance(u * vh, alpha * wh)
            V[:, 1], W[:, 1] = state.v_cur, state.w_cur
            completed = 1
            logger.debug(f"Schritt 1: |u| = {abs(u):.3e}, |alpha| = {abs(alpha):.3e}")

            for i in range(2, n + 1):
                self._step(i, b, l, lam, beta, state, T, S, steps, V, W)
                max_held = max(max_held, state.held_vectors())
                completed = i
        except BreakdownError as e:
            breakdown = e.report
            logger.warning(f"rat_lan: {e} (Maß {breakdown.measure:.2e}), Abbruch nach {completed} Schritten")
            k = completed
            pencil = TridiagonalPencil.from_dense(*_unit_columns(T[:k + 1, :k], S[:k + 1, :k]), tol=None)
            return LanczosResult(V[:, :k + 1], W[:, :k + 1], pencil, list(poles_k[:k]), list(poles_l[:k]),
                                 self.free_pole_v, self.free_pole_w, steps, breakdown, max_held)

        pencil = TridiagonalPencil.from_dense(*_unit_columns(T, S), tol=None)
        logger.info(f"rat_lan: {n} Schritte abgeschlossen, {self.solver.factorizations} LU-Faktorisierungen")
        return LanczosResult(V, W, pencil, list(poles_k[:n]), list(poles_l[:n]),
                             self.free_pole_v, self.free_pole_w, steps, None, max_held)

    def _step(self, i: int, b, l, lam, beta, state: LanczosState,
              T: np.ndarray, S: np.ndarray, steps: List[LanczosStep],
              V: np.ndarray, W: np.ndarray) -> None:
        """Schritt i >= 2: berechnet v_{i+1}, w_{i+1} und Spalte i des Pencils."""
        A, AH = self.A, self.AH
        v_prev, v_cur, w_prev, w_cur = state.v_prev, state.v_cur, state.w_prev, state.w_cur

        if beta[i - 1] != 0:
            p, q = 1.0, np.conj(lam[i - 1]) / np.conj(beta[i - 1])
        else:
            p, q = 0.0, lam[i - 1]
        state.v_tilde = self._solve_v(b[i + 1], l[i + 1], p * (A @ v_prev) - q * v_prev)

        if l[i - 1] != 0:
            pw, qw = 1.0, np.conj(b[i - 1]) / np.conj(l[i - 1])
        else:
            pw, qw = 0.0, np.conj(b[i - 1])
        state.w_tilde = self._solve_w(lam[i + 1], beta[i + 1], pw * (AH @ w_prev) - qw * w_prev)

        state.v_bar = self._solve_v(b[i + 1], l[i + 1], v_cur)
        state.w_bar = self._solve_w(lam[i + 1], beta[i + 1], w_cur)
        Avb = A @ state.v_bar
        AHwb = AH @ state.w_bar
        Av_prev, Av_cur = A @ v_prev, A @ v_cur

        # V-Seite
        a1, a2 = _ip(state.v_tilde, w_prev), _ip(state.v_tilde, w_cur)
        g1, g2 = _ip(state.v_bar, w_prev), _ip(state.v_bar, w_cur)
        e1, e2 = _ip(Avb, w_prev), _ip(Avb, w_cur)
        scale = la.norm(state.v_bar) * la.norm(Avb) * (la.norm(w_prev) + la.norm(w_cur)) ** 2
        tv1 = (a1 * e2 - a2 * e1) / self._denominator(g1 * e2 - g2 * e1, scale, i, "tempv1")
        e2 = self._denominator(e2, la.norm(Avb) * la.norm(w_cur), i, "(A v̄, w_i)")
        tv2 = tv1 * g2 / e2 - a2 / e2

        # W-Seite
        a1, a2 = _ip(state.w_tilde, v_prev), _ip(state.w_tilde, v_cur)
        g1, g2 = _ip(state.w_bar, v_prev), _ip(state.w_bar, v_cur)
        e1, e2 = _ip(state.w_bar, Av_prev), _ip(state.w_bar, Av_cur)
        scale = la.norm(state.w_bar) ** 2 * (la.norm(v_prev) + la.norm(v_cur)) * (la.norm(Av_prev) + la.norm(Av_cur))
        tw1 = (a1 * e2 - a2 * e1) / self._denominator(g1 * e2 - g2 * e1, scale, i, "tempw1")
        e2 = self._denominator(e2, la.norm(state.w_bar) * la.norm(Av_cur), i, "(w̄, A v_i)")
        tw2 = tw1 * g2 / e2 - a2 / e2

        vh = -tv2 * Avb + tv1 * state.v_bar - state.v_tilde
        wh = -tw2 * AHwb + tw1 * state.w_bar - state.w_tilde
        vh, wh = self._rebiorthogonalize(vh, wh, V[:, :i], W[:, :i])
        u, alpha, product = self._normalize(vh, wh, i)

        S[i - 2, i - 1], S[i - 1, i - 1], S[i, i - 1] = p * u, tv2 * u, l[i + 1]
        T[i - 2, i - 1], T[i - 1, i - 1], T[i, i - 1] = q * u, tv1 * u, b[i + 1]
        steps.append(LanczosStep(i, tv1 * u, tv2 * u, tw1 * alpha, tw2 * alpha, u, alpha, product,
                                 ProjectivePole(b[i + 1], l[i + 1]), ProjectivePole(lam[i + 1], beta[i + 1])))

        state.advance(u * vh, alpha * wh)
        V[:, i], W[:, i] = state.v_cur, state.w_cur
        logger.debug(f"Schritt {i}: |u| = {abs(u):.3e}, |alpha| = {abs(alpha):.3e}, "
                     f"|(v, w) - 1| = {abs(_ip(state.v_cur, state.w_cur) - 1):.2e}")

    def _rebiorthogonalize(self, vh: np.ndarray, wh: np.ndarray,
                           V: np.ndarray, W: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if not self.rebiorth:
            return vh, wh
        return vh - V @ (W.conj().T @ vh), wh - W @ (V.conj().T @ wh)


def rat_lan(A: np.ndarray, v: np.ndarray, w: np.ndarray, n: int,
            poles_k: Sequence[ProjectivePole], poles_l: Sequence[ProjectivePole],
            free_pole_v: Optional[ProjectivePole] = None,
            free_pole_w: Optional[ProjectivePole] = None,
            tol: float = BREAKDOWN_TOL, rebiorth: bool = False) -> LanczosResult:
    """Kurzform für RationalLanczos(A, ...).run(v, w, poles_k, poles_l, n)."""
    return RationalLanczos(A, free_pole_v, free_pole_w, tol, rebiorth).run(v, w, poles_k, poles_l, n)


# ---------------------------------------------------------------------------
# Pole aus dem Pencil
# ---------------------------------------------------------------------------

PencilLike = Union[TridiagonalPencil, np.ndarray]


def _unit_columns(T: np.ndarray, S: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Skaliert jede Spalte so, dass [T[:, j]; S[:, j]] Norm 1 hat."""
    norms = np.sqrt(np.sum(np.abs(T) ** 2, axis=0) + np.sum(np.abs(S) ** 2, axis=0))
    norms[norms == 0] = 1.0
    return T / norms, S / norms


def _as_pencil(T: PencilLike, S: Optional[np.ndarray]) -> TridiagonalPencil:
    if isinstance(T, TridiagonalPencil):
        return T
    if S is None:
        raise ValueError("Zu einer dichten Matrix T wird auch S benötigt")
    return TridiagonalPencil.from_dense(T, S)


def _readout(t: np.ndarray, s: np.ndarray, scale: float, label: str, tol: float) -> List[ProjectivePole]:
    poles = []
    for k, (tk, sk) in enumerate(zip(t, s)):
        if abs(tk) <= tol * scale and abs(sk) <= tol * scale:
            raise StructureMismatchError(f"{label}: Pencil ist an Position {k + 1} nicht echt")
        poles.append(ProjectivePole(tk, sk))
    return poles


def _scale(p: TridiagonalPencil) -> float:
    return max(float(np.max(np.abs(np.concatenate([p.dense_T().ravel(), p.dense_S().ravel()])), initial=0.0)),
               np.finfo(float).tiny)


def recover_poles_sub(T: PencilLike, S: Optional[np.ndarray] = None,
                      tol: float = IMPROPER_TOL) -> List[ProjectivePole]:
    """
    Pole von K aus der Subdiagonale: Pol i = (T(i+1, i), S(i+1, i)).

    Raises:
        StructureMismatchError: Beide Subdiagonaleinträge verschwinden an einer Stelle
    """
    p = _as_pencil(T, S)
    return _readout(p.t_sub, p.s_sub, _scale(p), "Subdiagonale", tol)


def recover_poles_super(T: PencilLike, S: Optional[np.ndarray] = None,
                        tol: float = IMPROPER_TOL) -> List[ProjectivePole]:
    """
    Pole von L aus der Superdiagonale: T(i, i+1)/S(i, i+1) = conj(psi_{i-1}) für i = 2..n-1.

    Der freie Eintrag (1, 2) wird übergangen; geliefert wird psi_1..psi_{n-2}.

    Raises:
        StructureMismatchError: Beide Superdiagonaleinträge verschwinden an einer Stelle
    """
    p = _as_pencil(T, S)
    return [pole.conj() for pole in _readout(p.t_super[1:], p.s_super[1:], _scale(p), "Superdiagonale", tol)]

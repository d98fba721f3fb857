"""
Pole und Pencils

Projektive Pole, Fortsetzungspaare, Hessenberg- und Tridiagonal-Pencils, die
Ein-Matrix-Darstellung Z = QR + D und die Umwandlung eines Hessenberg-Pencils
in ein Pencil aus zwei inv-Hessenberg-Matrizen.

Unendliche Pole werden ausschließlich als (mu, nu) = (mu, 0) dargestellt,
nirgends als Gleitkomma-Unendlich.
"""

import logging
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from .exceptions import SingularMatrixError, StructureMismatchError
from .structured_core import (
    CorePattern,
    Transition,
    TransferDirection,
    as_matrix,
    fuse,
    is_hessenberg,
    ordering_from_transitions,
    qr_extended,
    qr_hessenberg,
    spectral_norm,
    transfer_through,
    turnover,
)

logger = logging.getLogger(__name__)

POLE_EQUALITY_TOL = 1e-12
PROPER_TOL = 1e-14

_INFINITY_TOKENS = {'inf', '+inf', 'infinity', '∞'}


def _format_real(x: float) -> str:
    return repr(float(x))


def format_complex(value: complex) -> str:
    """Formatiert eine komplexe Zahl in der Pol-Grammatik (z.B. '3.0-1.0i')."""
    value = complex(value)
    if value.imag == 0:
        return _format_real(value.real)
    sign = '-' if value.imag < 0 else '+'
    return f"{_format_real(value.real)}{sign}{_format_real(abs(value.imag))}i"


@dataclass(frozen=True)
class ProjectivePole:
    """Pol xi = mu/nu auf der erweiterten komplexen Ebene; nu = 0 bedeutet unendlich."""
    mu: complex
    nu: complex = 1.0

    def __post_init__(self):
        mu, nu = complex(self.mu), complex(self.nu)
        if not (np.isfinite(mu) and np.isfinite(nu)):
            raise ValueError(f"Pol-Komponenten müssen endlich sein: ({mu}, {nu})")
        if mu == 0 and nu == 0:
            raise ValueError("(0, 0) ist kein gültiger Pol")
        object.__setattr__(self, 'mu', mu)
        object.__setattr__(self, 'nu', nu)

    @classmethod
    def infinity(cls) -> 'ProjectivePole':
        return cls(1.0, 0.0)

    @classmethod
    def zero(cls) -> 'ProjectivePole':
        return cls(0.0, 1.0)

    @classmethod
    def from_value(cls, value) -> 'ProjectivePole':
        """Pol aus einem Wert; None oder Unendlich ergeben den Pol im Unendlichen."""
        if value is None:
            return cls.infinity()
        value = complex(value)
        if np.isinf(value):
            return cls.infinity()
        return cls(value, 1.0)

    @classmethod
    def parse(cls, token: str) -> 'ProjectivePole':
        """
        Liest einen Pol in der Grammatik 'inf' | 'a' | 'a+bi' | 'a-bi' | 'bi'.

        Raises:
            ValueError: Ungültiges Token
        """
        text = token.strip().lower().replace(' ', '')
        if text in _INFINITY_TOKENS:
            return cls.infinity()
        if not text:
            raise ValueError("Leeres Pol-Token")
        literal = re.sub(r'(^|[+-])i', r'\g<1>1i', text).replace('i', 'j')
        try:
            value = complex(literal)
        except ValueError:
            raise ValueError(f"Ungültiger Pol: {token!r}")
        return cls.from_value(value)

    @property
    def is_infinite(self) -> bool:
        return self.nu == 0

    @property
    def is_finite(self) -> bool:
        return self.nu != 0

    def value(self) -> complex:
        """Wert mu/nu; nur zur Anzeige, unendliche Pole liefern complex(inf)."""
        if self.is_infinite:
            return complex(np.inf, 0.0)
        return self.mu / self.nu

    def conj(self) -> 'ProjectivePole':
        return ProjectivePole(np.conj(self.mu), np.conj(self.nu))

    def cross_ratio_error(self, other: 'ProjectivePole') -> float:
        """|mu1·nu2 - mu2·nu1| / (||(mu1, nu1)||·||(mu2, nu2)||), der Sinus des projektiven Winkels."""
        num = abs(self.mu * other.nu - other.mu * self.nu)
        den = np.hypot(abs(self.mu), abs(self.nu)) * np.hypot(abs(other.mu), abs(other.nu))
        return float(num / den)

    def equals(self, other: 'ProjectivePole', rtol: float = POLE_EQUALITY_TOL) -> bool:
        return self.cross_ratio_error(other) <= rtol

    def __str__(self) -> str:
        if self.is_infinite:
            return 'inf'
        return format_complex(self.value())


def parse_pole_list(text: str) -> List[ProjectivePole]:
    """
    Liest eine kommagetrennte Polliste, z.B. '0,24.1' oder '2,inf,3+1i'.

    Raises:
        ValueError: Leere Liste oder ungültiges Token
    """
    tokens = [t for t in text.split(',') if t.strip()]
    if not tokens:
        raise ValueError("Polliste ist leer")
    return [ProjectivePole.parse(t) for t in tokens]


def format_pole_list(poles: Sequence[ProjectivePole]) -> str:
    return ','.join(str(p) for p in poles)


def cycle_poles(poles: Sequence[ProjectivePole], n: int) -> List[ProjectivePole]:
    """Wiederholt eine Polliste zyklisch auf Länge n."""
    if not poles:
        raise ValueError("Polliste ist leer")
    return [poles[i % len(poles)] for i in range(n)]


def poles_for_extended_space(exponents: Sequence[int]) -> List[ProjectivePole]:
    """
    Pole eines erweiterten Krylov-Raums span{A^{e_1} v, A^{e_2} v, ...} mit e_1 = 0.

    Jede neue positive Potenz entspricht einem Pol im Unendlichen, jede neue
    negative Potenz dem Pol 0.
    """
    if not exponents or exponents[0] != 0:
        raise ValueError("Die Potenzfolge muss mit 0 beginnen")
    return [ProjectivePole.infinity() if e > 0 else ProjectivePole.zero() for e in exponents[1:]]


@dataclass(frozen=True)
class ContinuationPair:
    """Fortsetzungspaar (rho, eta) der Verschiebung (rho·A - eta·I)."""
    rho: complex
    eta: complex

    def __post_init__(self):
        rho, eta = complex(self.rho), complex(self.eta)
        if rho == 0 and eta == 0:
            raise ValueError("(0, 0) ist kein gültiges Fortsetzungspaar")
        object.__setattr__(self, 'rho', rho)
        object.__setattr__(self, 'eta', eta)

    @classmethod
    def default_for(cls, pole: ProjectivePole) -> 'ContinuationPair':
        """(0, -1) für endliche Pole (reines Shift-Invert), (1, 0) für unendliche (Multiplikation mit A)."""
        if pole.is_infinite:
            return cls(1.0, 0.0)
        return cls(0.0, -1.0)

    def is_admissible_for(self, pole: ProjectivePole, tol: float = 1e-14) -> bool:
        """Zulässig, wenn (rho, eta) nicht denselben projektiven Punkt wie (nu, mu) darstellt."""
        num = abs(self.rho * pole.mu - self.eta * pole.nu)
        den = np.hypot(abs(self.rho), abs(self.eta)) * np.hypot(abs(pole.mu), abs(pole.nu))
        return num > tol * den


# ---------------------------------------------------------------------------
# Hessenberg-Pencils
# ---------------------------------------------------------------------------

@dataclass
class HessenbergPencil:
    """Pencil (H, K) zweier oberer Hessenberg-Matrizen, n x n oder (n+1) x n."""
    H: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        self.H = as_matrix(self.H, "H")
        self.K = as_matrix(self.K, "K")
        if self.H.shape != self.K.shape:
            raise ValueError(f"H {self.H.shape} und K {self.K.shape} haben verschiedene Größen")
        rows, cols = self.H.shape
        if rows not in (cols, cols + 1):
            raise ValueError(f"Pencil muss n x n oder (n+1) x n sein, nicht {self.H.shape}")
        if not (is_hessenberg(self.H, 1e-12) and is_hessenberg(self.K, 1e-12)):
            raise StructureMismatchError("H und K müssen obere Hessenberg-Matrizen sein")

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def is_extended(self) -> bool:
        return self.H.shape[0] == self.H.shape[1] + 1

    def subdiagonal_count(self) -> int:
        return self.n if self.is_extended else self.n - 1

    def improper_indices(self, tol: float = PROPER_TOL) -> List[int]:
        """1-basierte Indizes i, an denen H(i+1,i) und K(i+1,i) gleichzeitig verschwinden."""
        scale = spectral_norm(self.H) + spectral_norm(self.K)
        return [
            i + 1 for i in range(self.subdiagonal_count())
            if abs(self.H[i + 1, i]) < tol * scale and abs(self.K[i + 1, i]) < tol * scale
        ]

    def is_proper(self, tol: float = PROPER_TOL) -> bool:
        return not self.improper_indices(tol)

    def square(self) -> 'HessenbergPencil':
        """Führender n x n Teil (letzte Zeile entfernt)."""
        return HessenbergPencil(self.H[:self.n, :], self.K[:self.n, :])

    def times_upper(self, r: np.ndarray) -> 'HessenbergPencil':
        """Rechtsmultiplikation beider Matrizen mit einer oberen Dreiecksmatrix."""
        r = np.triu(as_matrix(r))
        return HessenbergPencil(self.H @ r, self.K @ r)


@dataclass
class InvHessenbergPencil:
    """Pencil aus zwei inv-Hessenberg-Matrizen samt erzeugender Core-Muster."""
    H_inv: np.ndarray
    K_inv: np.ndarray
    ascending: CorePattern
    descending: CorePattern


def pole_sequence(p: HessenbergPencil, tol: float = PROPER_TOL) -> List[ProjectivePole]:
    """
    Liest die Pole aus den Subdiagonalen: Pol i = (H(i+1,i), K(i+1,i)).

    Raises:
        StructureMismatchError: Pencil ist nicht echt (proper)
    """
    improper = p.improper_indices(tol)
    if improper:
        raise StructureMismatchError(f"Pencil ist nicht echt an Index {improper}")
    return [ProjectivePole(p.H[i + 1, i], p.K[i + 1, i]) for i in range(p.subdiagonal_count())]


def normalize_pencil(H: np.ndarray, K: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Skaliert jede Spalte so, dass ihr betragsgrößter Eintrag über (H, K) gemeinsam 1 ist."""
    H = as_matrix(H)
    K = as_matrix(K)
    stacked = np.vstack([H, K])
    pivots = stacked[np.argmax(np.abs(stacked), axis=0), np.arange(stacked.shape[1])]
    pivots = np.where(pivots == 0, 1.0, pivots)
    return H / pivots, K / pivots


def single_matrix_from_pencil(p: HessenbergPencil, cond_limit: float = 1e14) -> np.ndarray:
    """
    Ein-Matrix-Darstellung Z = H·K^{-1} eines quadratischen Pencils.

    Raises:
        SingularMatrixError: K ist numerisch singulär
    """
    if p.is_extended:
        raise ValueError("Quadratisches Pencil erwartet")
    cond = np.linalg.cond(p.K)
    logger.debug(f"Kondition von K: {cond:.3e}")
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularMatrixError(f"K ist numerisch singulär (Kondition {cond:.2e})")
    z = la.solve(p.K.T, p.H.T).T
    residual = spectral_norm(z @ p.K - p.H)
    if residual > 1e-12 * spectral_norm(p.H) * max(1.0, cond * 1e-4):
        logger.warning(f"Rest ||Z·K - H|| = {residual:.2e} ist größer als erwartet")
    return z


# ---------------------------------------------------------------------------
# Z = QR + D
# ---------------------------------------------------------------------------

@dataclass
class PoleDiagonal:
    """Diagonale D mit den endlichen Polen; freie Positionen sind 0."""
    entries: np.ndarray
    pole_mask: np.ndarray

    @classmethod
    def from_poles(cls, poles: Sequence[ProjectivePole], dimension: int) -> 'PoleDiagonal':
        """Pol xi_k (k = 1..n-1) steht an Diagonalposition k+1."""
        entries = np.zeros(dimension, dtype=complex)
        mask = np.zeros(dimension, dtype=bool)
        for k, pole in enumerate(poles[:dimension - 1], start=1):
            if pole.is_finite:
                entries[k] = pole.value()
                mask[k] = True
        return cls(entries, mask)

    def matrix(self) -> np.ndarray:
        return np.diag(self.entries)


def shape_order_for_poles(poles: Sequence[ProjectivePole], dimension: int) -> List[int]:
    """Kanonische Form: aufsteigender Übergang an Position k genau dann, wenn xi_k endlich ist."""
    transitions = [
        Transition.ASCENDING if poles[k].is_finite else Transition.DESCENDING
        for k in range(dimension - 2)
    ]
    return ordering_from_transitions(transitions)


def decompose_qr_plus_d(z: np.ndarray, poles: Sequence[ProjectivePole],
                        tol: float = 1e-10) -> Tuple[CorePattern, np.ndarray, PoleDiagonal]:
    """
    Zerlegt die Ein-Matrix-Projektion als Z = QR + D.

    Args:
        z: n x n Projektion
        poles: Pole xi_1..xi_{n-1} (weitere Einträge werden ignoriert)
        tol: Relative Toleranz für Form und Rekonstruktion

    Returns:
        Tuple aus (Core-Muster Q, obere Dreiecksmatrix R, Poldiagonale D)

    Raises:
        StructureMismatchError: z passt nicht zu den Polen
    """
    z = as_matrix(z)
    n = z.shape[0]
    if len(poles) < n - 1:
        raise ValueError(f"Für eine {n} x {n} Matrix werden {n - 1} Pole benötigt")
    poles = list(poles[:n - 1])

    d = PoleDiagonal.from_poles(poles, n)
    order = shape_order_for_poles(poles, n) if n > 1 else []
    if n == 1:
        return CorePattern([], 1), z - d.matrix(), d

    pattern, r = qr_extended(z - d.matrix(), order, tol)
    residual = spectral_norm(pattern.apply_left(r) + d.matrix() - z) / max(spectral_norm(z), 1e-300)
    if residual > tol:
        raise StructureMismatchError(f"QR + D reproduziert Z nicht (Rest {residual:.2e})")
    return pattern, r, d


# ---------------------------------------------------------------------------
# inv-Hessenberg-Pencil
# ---------------------------------------------------------------------------

def _rq_from_hessenberg(h: np.ndarray) -> Tuple[np.ndarray, CorePattern]:
    """H = R̃·Q̃ mit absteigendem Q̃ (QR-Zerlegung, dann Transfer nach rechts)."""
    pattern, r = qr_hessenberg(h, 1e-12)
    return transfer_through(pattern, r, TransferDirection.LEFT_TO_RIGHT)


def to_inv_hessenberg(p: HessenbergPencil) -> InvHessenbergPencil:
    """
    Wandelt ein echtes quadratisches Hessenberg-Pencil in zwei inv-Hessenberg-Matrizen um.

    Mit H = R_H·Q_H und K = R_K·Q_K wird das Produkt Q_H·Q_K^H per Turnovers in
    aufsteigend·absteigend umsortiert; H_inv = R_H·Q_asc, K_inv = R_K·Q_desc^H.
    Es gilt H_inv·K_inv^{-1} = H·K^{-1}.

    Raises:
        StructureMismatchError: Pencil nicht quadratisch oder nicht echt
        SingularMatrixError: Ein Dreiecksfaktor ist singulär
    """
    if p.is_extended:
        raise StructureMismatchError("Quadratisches Pencil erwartet")
    if not p.is_proper():
        raise StructureMismatchError(f"Pencil ist nicht echt an Index {p.improper_indices()}")

    n = p.n
    r_h, q_h = _rq_from_hessenberg(p.H)
    r_k, q_k = _rq_from_hessenberg(p.K)
    if n == 1:
        return InvHessenbergPencil(r_h, r_k, CorePattern([], 1), CorePattern([], 1))

    c = q_h.cores                       # C_1 ... C_{n-1}
    g = {core.index: core for core in q_k.adjoint().cores}   # G_{n-1} ... G_1

    left = []
    right = []
    middle = fuse(c[n - 2], g[n - 1])
    for k in range(n - 2, 0, -1):
        a, b, c_new = turnover(c[k - 1], middle, g[k])
        left.append(a)
        right.insert(0, c_new)
        middle = b
    left.append(middle)

    ascending = CorePattern(left, n)
    descending = CorePattern(right, n)
    trivial = [core.index for core in ascending if core.is_trivial()]
    if trivial:
        logger.debug(f"Triviale Cores im aufsteigenden Muster an {trivial}")

    h_inv = ascending.apply_right(r_h)
    k_inv = descending.adjoint().apply_right(r_k)
    return InvHessenbergPencil(h_inv, k_inv, ascending, descending)


# ---------------------------------------------------------------------------
# Tridiagonal-Pencils
# ---------------------------------------------------------------------------

@dataclass
class TridiagonalPencil:
    """
    Tridiagonales Pencil (T, S), diagonalweise gespeichert.

    Bei n Spalten hat die Hauptdiagonale n Einträge, die Superdiagonale n-1;
    die Subdiagonale hat n-1 Einträge (quadratisch) oder n (erweitert, (n+1) x n).
    """
    t_sub: np.ndarray
    t_main: np.ndarray
    t_super: np.ndarray
    s_sub: np.ndarray
    s_main: np.ndarray
    s_super: np.ndarray

    def __post_init__(self):
        for name in ('t_sub', 't_main', 't_super', 's_sub', 's_main', 's_super'):
            setattr(self, name, np.array(getattr(self, name), dtype=complex).reshape(-1))
        n = self.t_main.size
        if self.s_main.size != n:
            raise ValueError("Hauptdiagonalen von T und S sind verschieden lang")
        if self.t_super.size != max(n - 1, 0) or self.s_super.size != max(n - 1, 0):
            raise ValueError("Superdiagonale muss n-1 Einträge haben")
        if self.t_sub.size != self.s_sub.size or self.t_sub.size not in (max(n - 1, 0), n):
            raise ValueError("Subdiagonale muss n-1 oder n Einträge haben")

    @property
    def n(self) -> int:
        return self.t_main.size

    @property
    def is_extended(self) -> bool:
        return self.t_sub.size == self.n

    @property
    def rows(self) -> int:
        return self.n + 1 if self.is_extended else self.n

    @staticmethod
    def _dense(rows: int, sub, main, sup) -> np.ndarray:
        n = main.size
        m = np.zeros((rows, n), dtype=complex)
        idx = np.arange(n)
        m[idx, idx] = main
        m[idx[:sup.size], idx[:sup.size] + 1] = sup
        m[idx[:sub.size] + 1, idx[:sub.size]] = sub
        return m

    def dense_T(self) -> np.ndarray:
        return self._dense(self.rows, self.t_sub, self.t_main, self.t_super)

    def dense_S(self) -> np.ndarray:
        return self._dense(self.rows, self.s_sub, self.s_main, self.s_super)

    @classmethod
    def from_dense(cls, T: np.ndarray, S: np.ndarray, tol: Optional[float] = 1e-10) -> 'TridiagonalPencil':
        """
        Liest die drei Diagonalen aus dichten Matrizen.

        Args:
            T, S: n x n oder (n+1) x n
            tol: Zulässiger Anteil außerhalb des Bandes relativ zur Norm; None prüft nicht

        Raises:
            StructureMismatchError: Einträge außerhalb des Bandes zu groß
        """
        T = np.asarray(T, dtype=complex)
        S = np.asarray(S, dtype=complex)
        if T.shape != S.shape:
            raise ValueError(f"T {T.shape} und S {S.shape} haben verschiedene Größen")
        rows, n = T.shape
        if rows not in (n, n + 1):
            raise ValueError(f"Pencil muss n x n oder (n+1) x n sein, nicht {T.shape}")

        if tol is not None:
            band = np.triu(np.tril(np.ones((rows, n), dtype=bool), 1), -1)
            for name, m in (('T', T), ('S', S)):
                off = spectral_norm(np.where(band, 0, m))
                if off > tol * max(spectral_norm(m), 1e-300):
                    raise StructureMismatchError(f"{name} ist nicht tridiagonal (Rest {off:.2e})")

        sub_len = n if rows == n + 1 else n - 1
        idx = np.arange(n)
        return cls(
            t_sub=T[idx[:sub_len] + 1, idx[:sub_len]],
            t_main=T[idx, idx],
            t_super=T[idx[:n - 1], idx[:n - 1] + 1],
            s_sub=S[idx[:sub_len] + 1, idx[:sub_len]],
            s_main=S[idx, idx],
            s_super=S[idx[:n - 1], idx[:n - 1] + 1],
        )

    def leading(self, k: int) -> 'TridiagonalPencil':
        """Führendes k x k Pencil (T_k, S_k)."""
        if not 0 < k <= self.n:
            raise ValueError(f"k muss in 1..{self.n} liegen")
        return TridiagonalPencil(self.t_sub[:k - 1], self.t_main[:k], self.t_super[:k - 1],
                                 self.s_sub[:k - 1], self.s_main[:k], self.s_super[:k - 1])

    def extended(self, k: int) -> 'TridiagonalPencil':
        """Erweitertes (k+1) x k Pencil."""
        limit = self.n if self.is_extended else self.n - 1
        if not 0 < k <= limit:
            raise ValueError(f"k muss in 1..{limit} liegen")
        return TridiagonalPencil(self.t_sub[:k], self.t_main[:k], self.t_super[:k - 1],
                                 self.s_sub[:k], self.s_main[:k], self.s_super[:k - 1])

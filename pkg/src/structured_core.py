"""
Strukturierter Kern

Dichte komplexe Matrix-Hilfsfunktionen und die Algebra der
Core-Transformationen: Anwendung auf Zeilen/Spalten, QR-Zerlegung von
Hessenberg-Matrizen, Turnover, Transfer durch obere Dreiecksmatrizen sowie
Zusammenbau und Klassifikation erweiterter Hessenberg-Formen.

Core-Indizes sind 1-basiert: ein Core mit Index i wirkt auf die Zeilen
(bzw. Spalten) i und i+1, im Array also auf die Positionen i-1 und i.
"""

import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from .exceptions import CoreIndexError, PoleOnSpectrumError, SingularMatrixError, StructureMismatchError

logger = logging.getLogger(__name__)

UNITARY_TOL = 1e-14
TRIVIAL_CORE_TOL = 1e-14
RANK_TOL = 1e-10


# ---------------------------------------------------------------------------
# Dichte Hilfsfunktionen
# ---------------------------------------------------------------------------

def as_matrix(x, name: str = "Matrix") -> np.ndarray:
    """
    Wandelt eine Eingabe in eine komplexe 2D-Matrix um.

    Args:
        x: Array-artige Eingabe (reelle Werte werden komplex)
        name: Bezeichnung für Fehlermeldungen

    Returns:
        Neue complex128-Matrix

    Raises:
        ValueError: Falsche Dimension, leere Matrix oder nicht-endliche Einträge
    """
    m = np.array(x, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"{name} muss zweidimensional sein (ndim={m.ndim})")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} ist leer: {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} enthält NaN oder Inf")
    return m


def as_vector(x, name: str = "Vektor") -> np.ndarray:
    """Wandelt eine Eingabe in einen komplexen 1D-Vektor um."""
    v = np.array(x, dtype=complex).reshape(-1)
    if v.size < 1:
        raise ValueError(f"{name} ist leer")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} enthält NaN oder Inf")
    return v


def spectral_norm(x) -> float:
    """Spektralnorm (für Vektoren die euklidische Norm); 0 für leere Arrays."""
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    if x.ndim == 1:
        return float(la.norm(x))
    return float(la.norm(x, 2))


def numerical_rank(block: np.ndarray, tol: float = RANK_TOL, scale: Optional[float] = None) -> int:
    """
    Numerischer Rang eines Blocks.

    Args:
        block: Matrix
        tol: Relative Toleranz
        scale: Bezugsgröße; Standard ist die Spektralnorm des Blocks

    Returns:
        Anzahl der Singulärwerte > tol * scale
    """
    block = np.asarray(block)
    if block.size == 0:
        return 0
    sv = la.svdvals(block)
    if scale is None:
        scale = sv[0] if sv.size else 0.0
    if scale == 0:
        return 0
    return int(np.sum(sv > tol * scale))


def is_upper_triangular(m: np.ndarray, tol: float = 0.0) -> bool:
    """Prüft, ob alle Einträge unterhalb der Diagonale <= tol * ||m|| sind."""
    lower = np.tril(m, -1)
    return spectral_norm(lower) <= tol * max(spectral_norm(m), np.finfo(float).tiny)


def is_hessenberg(m: np.ndarray, tol: float = 1e-14) -> bool:
    """Prüft die obere Hessenberg-Form relativ zu ||m||."""
    return spectral_norm(np.tril(m, -2)) <= tol * spectral_norm(m)


# ---------------------------------------------------------------------------
# Breakdown-Berichte (gemeinsam für alle Iterationen)
# ---------------------------------------------------------------------------

class BreakdownKind(Enum):
    """Art eines Zusammenbruchs."""
    LUCKY = "lucky"
    SERIOUS = "serious"
    RL_SPLIT = "rl_split"


@dataclass(frozen=True)
class BreakdownReport:
    """Beschreibt, wo und warum eine Iteration abgebrochen wurde."""
    kind: BreakdownKind
    step: int
    measure: float
    message: str = ""

    def to_dict(self) -> dict:
        return {
            'kind': self.kind.value,
            'step': self.step,
            'measure': self.measure,
            'message': self.message,
        }


# ---------------------------------------------------------------------------
# Core-Transformationen
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoreTransformation:
    """
    Einheitsmatrix mit eingebettetem unitären 2x2-Block auf Index i, i+1.

    Der Block hat typischerweise die Form [[c, -conj(s)], [s, conj(c)]]; allgemeine
    unitäre Blöcke (z.B. aus einem Turnover) sind ebenfalls erlaubt.
    """
    index: int
    block: np.ndarray

    def __post_init__(self):
        if int(self.index) < 1:
            raise CoreIndexError(f"Core-Index muss >= 1 sein (ist {self.index})")
        block = np.array(self.block, dtype=complex)
        if block.shape != (2, 2):
            raise ValueError(f"Core-Block muss 2x2 sein, nicht {block.shape}")
        defect = la.norm(block.conj().T @ block - np.eye(2), 2)
        if defect > UNITARY_TOL:
            raise ValueError(f"Core-Block ist nicht unitär (Defekt {defect:.2e})")
        block.flags.writeable = False
        object.__setattr__(self, 'index', int(self.index))
        object.__setattr__(self, 'block', block)

    @classmethod
    def rotation(cls, index: int, c: complex, s: complex) -> 'CoreTransformation':
        """
        Erzeugt eine Rotation mit erster Spalte (c, s), renormiert auf |c|^2 + |s|^2 = 1.

        Args:
            index: 1-basierter Index
            c: Kosinus-Anteil
            s: Sinus-Anteil

        Returns:
            CoreTransformation; Identität wenn c = s = 0
        """
        c, s = complex(c), complex(s)
        r = np.hypot(abs(c), abs(s))
        if r == 0:
            return cls.identity(index)
        c, s = c / r, s / r
        return cls(index, np.array([[c, -np.conj(s)], [s, np.conj(c)]]))

    @classmethod
    def identity(cls, index: int) -> 'CoreTransformation':
        return cls(index, np.eye(2, dtype=complex))

    @classmethod
    def from_block(cls, index: int, block: np.ndarray) -> 'CoreTransformation':
        """Erzeugt einen Core aus einem fast unitären Block (Polarfaktor bereinigt Rundungsfehler)."""
        u, _, vh = la.svd(np.asarray(block, dtype=complex))
        return cls(index, u @ vh)

    @classmethod
    def zeroing(cls, index: int, a: complex, b: complex) -> 'CoreTransformation':
        """
        Core G mit G^H (a, b)^T = (r, 0)^T.

        Für b = 0 (nichts zu eliminieren) oder a = b = 0 wird die Identität geliefert.
        """
        if b == 0:
            return cls.identity(index)
        return cls.rotation(index, a, b)

    @property
    def c(self) -> complex:
        return complex(self.block[0, 0])

    @property
    def s(self) -> complex:
        return complex(self.block[1, 0])

    def is_trivial(self, tol: float = TRIVIAL_CORE_TOL) -> bool:
        """Trivial heißt: (bis auf Diagonalphasen) die Identität, |s| < tol."""
        return abs(self.s) < tol

    def adjoint(self) -> 'CoreTransformation':
        return CoreTransformation(self.index, self.block.conj().T)

    def embed(self, dimension: int) -> np.ndarray:
        """Dichte dimension x dimension Einbettung."""
        self._check_dimension(dimension)
        e = np.eye(dimension, dtype=complex)
        e[self.index - 1:self.index + 1, self.index - 1:self.index + 1] = self.block
        return e

    def _check_dimension(self, dimension: int) -> None:
        if self.index > dimension - 1:
            raise CoreIndexError(
                f"Core-Index {self.index} passt nicht zu Dimension {dimension}"
            )

    def __repr__(self) -> str:
        return f"CoreTransformation(index={self.index}, c={self.c:.3g}, s={self.s:.3g})"


def fuse(a: CoreTransformation, b: CoreTransformation) -> CoreTransformation:
    """Verschmilzt zwei Cores mit gleichem Index zu einem (Produkt a·b)."""
    if a.index != b.index:
        raise CoreIndexError(f"Fusion nur bei gleichem Index möglich ({a.index} != {b.index})")
    return CoreTransformation.from_block(a.index, a.block @ b.block)


def apply_core_left(c: CoreTransformation, m: np.ndarray) -> np.ndarray:
    """
    Berechnet c·m; nur die Zeilen i und i+1 ändern sich.

    Raises:
        CoreIndexError: Index größer als m.rows - 1
    """
    m = np.array(m, dtype=complex)
    c._check_dimension(m.shape[0])
    i = c.index - 1
    m[i:i + 2, ...] = c.block @ m[i:i + 2, ...]
    return m


def apply_core_right(m: np.ndarray, c: CoreTransformation) -> np.ndarray:
    """
    Berechnet m·c; nur die Spalten i und i+1 ändern sich.

    Raises:
        CoreIndexError: Index größer als m.cols - 1
    """
    m = np.array(m, dtype=complex)
    c._check_dimension(m.shape[1])
    i = c.index - 1
    m[:, i:i + 2] = m[:, i:i + 2] @ c.block
    return m


@dataclass
class CorePattern:
    """Geordnetes Produkt C_{k1} C_{k2} ... von Core-Transformationen."""
    cores: List[CoreTransformation]
    dimension: int

    def __post_init__(self):
        self.cores = list(self.cores)
        for core in self.cores:
            core._check_dimension(self.dimension)

    def __len__(self) -> int:
        return len(self.cores)

    def __iter__(self):
        return iter(self.cores)

    @property
    def indices(self) -> List[int]:
        return [c.index for c in self.cores]

    def is_shape(self) -> bool:
        """Jeder Index 1..n-1 kommt genau einmal vor."""
        return sorted(self.indices) == list(range(1, self.dimension))

    def apply_left(self, m: np.ndarray) -> np.ndarray:
        """P·m (der am weitesten rechts stehende Core wirkt zuerst)."""
        out = np.array(m, dtype=complex)
        for core in reversed(self.cores):
            out = apply_core_left(core, out)
        return out

    def apply_right(self, m: np.ndarray) -> np.ndarray:
        """m·P."""
        out = np.array(m, dtype=complex)
        for core in self.cores:
            out = apply_core_right(out, core)
        return out

    def dense(self) -> np.ndarray:
        return self.apply_left(np.eye(self.dimension, dtype=complex))

    def adjoint(self) -> 'CorePattern':
        return CorePattern([c.adjoint() for c in reversed(self.cores)], self.dimension)

    def swap(self, position: int) -> 'CorePattern':
        """
        Vertauscht die Cores an position und position+1, sofern sie kommutieren.

        Raises:
            CoreIndexError: Die Indizes sind benachbart (|i - j| <= 1)
        """
        a, b = self.cores[position], self.cores[position + 1]
        if abs(a.index - b.index) <= 1:
            raise CoreIndexError(f"C{a.index} und C{b.index} kommutieren nicht")
        cores = list(self.cores)
        cores[position], cores[position + 1] = b, a
        return CorePattern(cores, self.dimension)


def assemble(pattern: CorePattern, r: np.ndarray) -> np.ndarray:
    """Dichtes Produkt Muster · R."""
    return pattern.apply_left(r)


# ---------------------------------------------------------------------------
# Formen und Klassifikation
# ---------------------------------------------------------------------------

class Transition(Enum):
    """Relative Lage von C_k und C_{k+1} in einer Form."""
    DESCENDING = "descending"   # C_k vor C_{k+1}: Hessenberg-Block
    ASCENDING = "ascending"     # C_{k+1} vor C_k: inv-Hessenberg-Block


@dataclass(frozen=True)
class StructureBlock:
    transition: Transition
    first_row: int
    last_row: int


@dataclass(frozen=True)
class StructureDescriptor:
    """Übergänge für die Indexpaare (1,2), ..., (n-2, n-1) einer n x n Form."""
    transitions: Tuple[Transition, ...]
    dimension: int

    def __post_init__(self):
        expected = max(self.dimension - 2, 0)
        if len(self.transitions) != expected:
            raise ValueError(
                f"Deskriptor für Dimension {self.dimension} braucht {expected} Übergänge"
            )

    @property
    def is_hessenberg(self) -> bool:
        return all(t is Transition.DESCENDING for t in self.transitions)

    @property
    def is_inv_hessenberg(self) -> bool:
        return all(t is Transition.ASCENDING for t in self.transitions)

    def ascending_positions(self) -> List[int]:
        return [k + 1 for k, t in enumerate(self.transitions) if t is Transition.ASCENDING]

    def blocks(self) -> List[StructureBlock]:
        """
        Maximale Läufe gleicher Übergänge; ein Lauf über die Paare a..b
        überdeckt die Zeilen a..b+2 (1-basiert).
        """
        result = []
        start = 0
        for k in range(1, len(self.transitions) + 1):
            if k == len(self.transitions) or self.transitions[k] is not self.transitions[start]:
                result.append(StructureBlock(self.transitions[start], start + 1, k + 2))
                start = k
        return result


def classify_shape(p: CorePattern) -> StructureDescriptor:
    """
    Klassifiziert eine vollständige Form nach absteigenden/aufsteigenden Übergängen.

    Raises:
        StructureMismatchError: p ist keine vollständige Form
    """
    if not p.is_shape():
        raise StructureMismatchError(
            f"Keine vollständige Form: Indizes {p.indices} für Dimension {p.dimension}"
        )
    position = {idx: pos for pos, idx in enumerate(p.indices)}
    transitions = tuple(
        Transition.DESCENDING if position[k] < position[k + 1] else Transition.ASCENDING
        for k in range(1, p.dimension - 1)
    )
    return StructureDescriptor(transitions, p.dimension)


def ordering_from_transitions(transitions: Sequence[Transition]) -> List[int]:
    """
    Kanonische Indexreihenfolge zu einer Folge von Übergängen.

    Absteigend hängt k+1 hinten an, aufsteigend vorne; das genügt, da nur die
    relative Lage benachbarter Indizes festgelegt ist.
    """
    order = deque([1])
    for k, t in enumerate(transitions, start=1):
        if t is Transition.DESCENDING:
            order.append(k + 1)
        else:
            order.appendleft(k + 1)
    return list(order)


def structural_bottom(order: Sequence[int], dimension: int) -> np.ndarray:
    """
    Letzte strukturell nichtverschwindende Zeile jeder Spalte von Muster · R.

    Returns:
        Array der Länge dimension+1; Eintrag j (1-basiert) ist die unterste Zeile
        von Spalte j, Eintrag 0 ist unbenutzt
    """
    bottom = np.zeros(dimension + 1, dtype=int)
    for j in range(1, dimension + 1):
        b = j
        for idx in reversed(order):
            if idx == b:
                b += 1
        bottom[j] = b
    return bottom


# ---------------------------------------------------------------------------
# QR-Zerlegungen
# ---------------------------------------------------------------------------

def qr_hessenberg(h: np.ndarray, tol: float = 1e-14) -> Tuple[CorePattern, np.ndarray]:
    """
    QR-Zerlegung H = C_1 C_2 ... C_{n-1} R einer oberen Hessenberg-Matrix.

    Args:
        h: Obere Hessenberg-Matrix (quadratisch oder mit einer Zeile mehr)
        tol: Toleranz für die Hessenberg-Prüfung relativ zu ||h||

    Returns:
        Tuple aus (absteigendes Muster, obere Dreiecksmatrix R)

    Raises:
        StructureMismatchError: h ist nicht Hessenberg
    """
    h = as_matrix(h, "Hessenberg-Matrix")
    if not is_hessenberg(h, tol):
        raise StructureMismatchError("Eingabe ist keine obere Hessenberg-Matrix")

    rows, cols = h.shape
    work = h.copy()
    cores = []
    for k in range(1, min(rows - 1, cols) + 1):
        core = CoreTransformation.zeroing(k, work[k - 1, k - 1], work[k, k - 1])
        work = apply_core_left(core.adjoint(), work)
        work[k, k - 1] = 0.0
        cores.append(core)

    pattern = CorePattern(cores, rows)
    trivial = sum(1 for c in cores if c.is_trivial())
    if trivial:
        logger.debug(f"qr_hessenberg: {trivial} triviale Cores (Hessenberg-Matrix nicht echt)")
    return pattern, np.triu(work)


def qr_extended(z: np.ndarray, order: Sequence[int], tol: float = 1e-10) -> Tuple[CorePattern, np.ndarray]:
    """
    QR-Zerlegung mit vorgegebener Form: z = C_{order[0]} C_{order[1]} ... R.

    Die Cores werden von links abgelöst. Für den Core mit Index k werden alle
    Spalten gesucht, deren Eintrag (k+1, j) im Rest-Produkt strukturell null ist;
    die Rotation kommt aus dem dominanten linken Singulärvektor dieses 2-Zeilen-Blocks.

    Args:
        z: Quadratische Matrix
        order: Indexreihenfolge der Form (jeder Index 1..n-1 genau einmal)
        tol: Zulässiger Rest unterhalb der Diagonale relativ zu ||z||

    Returns:
        Tuple aus (Muster, obere Dreiecksmatrix R)

    Raises:
        StructureMismatchError: z passt nicht zur Form
    """
    z = as_matrix(z)
    n = z.shape[0]
    if z.shape[1] != n:
        raise ValueError(f"Quadratische Matrix erwartet, nicht {z.shape}")
    order = [int(k) for k in order]
    if sorted(order) != list(range(1, n)):
        raise StructureMismatchError(f"Reihenfolge {order} ist keine Form der Dimension {n}")

    work = z.copy()
    cores = []
    for pos, k in enumerate(order):
        bottom_full = structural_bottom(order[pos:], n)
        bottom_rest = structural_bottom(order[pos + 1:], n)
        cols = [j - 1 for j in range(1, n + 1) if bottom_rest[j] <= k < bottom_full[j]]

        block = work[k - 1:k + 1, cols] if cols else np.zeros((2, 0), dtype=complex)
        if block.size == 0 or not np.any(block):
            core = CoreTransformation.identity(k)
        else:
            u, _, _ = la.svd(block)
            core = CoreTransformation.rotation(k, u[0, 0], u[1, 0])
        work = apply_core_left(core.adjoint(), work)
        cores.append(core)

    scale = max(spectral_norm(z), np.finfo(float).tiny)
    residual = spectral_norm(np.tril(work, -1)) / scale
    if residual > tol:
        raise StructureMismatchError(
            f"Matrix passt nicht zur Form {order}: Rest unterhalb der Diagonale {residual:.2e}"
        )
    return CorePattern(cores, n), np.triu(work)


# ---------------------------------------------------------------------------
# Turnover und Transfer
# ---------------------------------------------------------------------------

def turnover(g1: CoreTransformation, g2: CoreTransformation,
             g3: CoreTransformation) -> Tuple[CoreTransformation, CoreTransformation, CoreTransformation]:
    """
    Turnover: Cores an (i-1, i, i-1) werden zu Cores an (i, i-1, i) mit gleichem Produkt.

    Raises:
        CoreIndexError: Indexmuster ist nicht (i-1, i, i-1)
    """
    i = g2.index
    if g1.index != i - 1 or g3.index != i - 1:
        raise CoreIndexError(
            f"Turnover braucht Indizes (i-1, i, i-1), nicht ({g1.index}, {g2.index}, {g3.index})"
        )

    # lokales 3x3-Produkt, lokale Indizes 1 (für i-1) und 2 (für i)
    q = CorePattern([
        CoreTransformation(1, g1.block),
        CoreTransformation(2, g2.block),
        CoreTransformation(1, g3.block),
    ], 3).dense()

    f1 = CoreTransformation.zeroing(2, q[1, 0], q[2, 0])
    q = apply_core_left(f1.adjoint(), q)
    f2 = CoreTransformation.zeroing(1, q[0, 0], q[1, 0])
    q = apply_core_left(f2.adjoint(), q)

    # q = diag(phase, B); die Phase wandert in f2
    phase = q[0, 0] / abs(q[0, 0])
    f2_block = f2.block @ np.diag([phase, 1.0])

    return (
        CoreTransformation(i, f1.block),
        CoreTransformation.from_block(i - 1, f2_block),
        CoreTransformation.from_block(i, q[1:, 1:]),
    )


class TransferDirection(Enum):
    LEFT_TO_RIGHT = "left-to-right"   # P·R = R̃·P̃
    RIGHT_TO_LEFT = "right-to-left"   # R·P = P̃·R̃


def transfer_through(p: CorePattern, r: np.ndarray,
                     direction: TransferDirection = TransferDirection.LEFT_TO_RIGHT
                     ) -> Tuple[np.ndarray, CorePattern]:
    """
    Schiebt ein Core-Muster durch eine obere Dreiecksmatrix, ohne die Form zu ändern.

    Args:
        p: Core-Muster der Dimension von r
        r: Nichtsinguläre obere Dreiecksmatrix
        direction: LEFT_TO_RIGHT liefert (R̃, P̃) mit P·R = R̃·P̃,
            RIGHT_TO_LEFT liefert (R̃, P̃) mit R·P = P̃·R̃

    Returns:
        Tuple aus (neue obere Dreiecksmatrix, neues Muster gleicher Form)

    Raises:
        SingularMatrixError: Ein Diagonaleintrag von r ist < 1e-14·||r||
    """
    r = as_matrix(r, "Dreiecksmatrix")
    n = r.shape[0]
    if r.shape[1] != n or p.dimension != n:
        raise ValueError(f"Dimension von Muster ({p.dimension}) und R {r.shape} passen nicht")
    if not p.cores:
        return r.copy(), CorePattern([], n)

    scale = spectral_norm(r)
    if np.min(np.abs(np.diag(r))) < 1e-14 * scale:
        raise SingularMatrixError("Transfer durch singuläre Dreiecksmatrix nicht möglich")

    work = np.triu(r)
    if direction is TransferDirection.LEFT_TO_RIGHT:
        new_cores: List[Optional[CoreTransformation]] = [None] * len(p.cores)
        for pos in range(len(p.cores) - 1, -1, -1):
            core = p.cores[pos]
            q = core.index - 1
            work = apply_core_left(core, work)
            x0, x1 = work[q + 1, q], work[q + 1, q + 1]
            g = CoreTransformation.rotation(core.index, x1, -x0)
            work = apply_core_right(work, g)
            work[q + 1, q] = 0.0
            new_cores[pos] = g.adjoint()
        return work, CorePattern(new_cores, n)

    new_cores = []
    for core in p.cores:
        q = core.index - 1
        work = apply_core_right(work, core)
        g = CoreTransformation.zeroing(core.index, work[q, q], work[q + 1, q])
        work = apply_core_left(g.adjoint(), work)
        work[q + 1, q] = 0.0
        new_cores.append(g)
    return work, CorePattern(new_cores, n)


def rank_profile_lower(z: np.ndarray, tol: float = RANK_TOL) -> List[int]:
    """
    Numerische Ränge der Blöcke z(i:m, 1:i) für i = 1..m-1 (1-basiert).

    Args:
        z: Quadratische Matrix
        tol: Singulärwerte > tol·||z|| werden gezählt

    Returns:
        Liste der Ränge
    """
    z = as_matrix(z)
    m = z.shape[0]
    if z.shape[1] != m:
        raise ValueError(f"Quadratische Matrix erwartet, nicht {z.shape}")
    scale = spectral_norm(z)
    return [numerical_rank(z[i - 1:, :i], tol, scale) for i in range(1, m)]


# ---------------------------------------------------------------------------
# Verschobene Systeme
# ---------------------------------------------------------------------------

@dataclass
class _CachedFactor:
    mu: complex
    nu: complex
    adjoint: bool
    lu: Tuple[np.ndarray, np.ndarray]


@dataclass
class ShiftedSolver:
    """
    Löst (nu·A - mu·I) y = x bzw. (nu·A^H - mu·I) y = x mit LU-Cache.

    Faktorisierungen werden pro projektivem Pol (Doppelverhältnis bis 1e-14)
    wiederverwendet; proportionale (mu, nu)-Paare werden umskaliert.
    """
    a: np.ndarray
    key_tol: float = 1e-14
    factorizations: int = field(default=0, init=False)
    _cache: List[_CachedFactor] = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        self.a = as_matrix(self.a, "A")
        if self.a.shape[0] != self.a.shape[1]:
            raise ValueError(f"A muss quadratisch sein, nicht {self.a.shape}")

    def matvec(self, x: np.ndarray, adjoint: bool = False) -> np.ndarray:
        return self.a.conj().T @ x if adjoint else self.a @ x

    def solve(self, mu: complex, nu: complex, x: np.ndarray, adjoint: bool = False) -> np.ndarray:
        """
        Raises:
            PoleOnSpectrumError: Das verschobene System ist numerisch singulär
        """
        mu, nu = complex(mu), complex(nu)
        if nu == 0:
            # unendlicher Pol: (0·A - mu·I)^{-1} = -I/mu
            return -np.asarray(x, dtype=complex) / mu

        for entry in self._cache:
            if entry.adjoint != adjoint:
                continue
            cross = abs(mu * entry.nu - entry.mu * nu)
            if cross <= self.key_tol * np.hypot(abs(mu), abs(nu)) * np.hypot(abs(entry.mu), abs(entry.nu)):
                kappa = nu / entry.nu
                return la.lu_solve(entry.lu, x) / kappa

        entry = _CachedFactor(mu, nu, adjoint, self._factor(mu, nu, adjoint))
        self._cache.append(entry)
        return la.lu_solve(entry.lu, x)

    def _factor(self, mu: complex, nu: complex, adjoint: bool):
        op = self.a.conj().T if adjoint else self.a
        m = op.shape[0]
        shifted = nu * op - mu * np.eye(m)
        with warnings.catch_warnings():
            warnings.simplefilter("error", la.LinAlgWarning)
            try:
                lu, piv = la.lu_factor(shifted)
            except la.LinAlgWarning:
                raise PoleOnSpectrumError((mu, nu))
        diag = np.abs(np.diag(lu))
        if diag.min() <= m * np.finfo(float).eps * diag.max():
            raise PoleOnSpectrumError((mu, nu))
        self.factorizations += 1
        logger.debug(f"LU-Faktorisierung für Pol ({mu}, {nu}), adjungiert={adjoint}")
        return lu, piv

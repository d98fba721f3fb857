"""
Diagnose- und Experiment-Harness

Testmatrizen, die drei überwachten Größen (Biorthogonalität, Güte der
schiefen Projektion, Ritz-Werte), Experiment-Konfigurationen, Vergleich mit
dem expliziten Orakel und der Selbsttest.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from scipy.stats import unitary_group
from tqdm import tqdm

from . import __version__
from .biorthogonal_oracle import OracleResult, build_oracle
from .exceptions import ConfigValidationError, KrylovError, SingularMatrixError
from .pencils import ProjectivePole, cycle_poles, format_pole_list, parse_pole_list
from .rational_lanczos import LanczosResult, RationalLanczos, recover_poles_sub, recover_poles_super
from .structured_core import ShiftedSolver, as_matrix, spectral_norm
from .utils.matrix_io import (
    DEFAULT_FLOAT_FORMAT,
    GeneratorSpec,
    parse_generator_spec,
    parse_value_list,
    read_matrix_market,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)

RITZ_CONDITION_LIMIT = 1e10
LOSS_ONSET_LEVEL = 1e-8
EXIT_OK = 0
EXIT_EARLY_BREAKDOWN = 2


# ---------------------------------------------------------------------------
# Testmatrizen
# ---------------------------------------------------------------------------

def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def gen_upper_triangular(m: int, eigenvalues: Sequence[complex], seed: int) -> np.ndarray:
    """
    Zufällige obere Dreiecksmatrix mit vorgegebener Diagonale.

    Die strikt obere Hälfte ist standard-komplex-normalverteilt aus
    numpy.random.default_rng(seed).
    """
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    if eigenvalues.size != m:
        raise ValueError(f"{eigenvalues.size} Eigenwerte für m = {m} angegeben")
    rng = np.random.default_rng(seed)
    return np.triu(_complex_normal(rng, (m, m)), 1) + np.diag(eigenvalues)


def gen_random(m: int, seed: int) -> np.ndarray:
    return _complex_normal(np.random.default_rng(seed), (m, m))


def gen_hermitian(m: int, seed: int) -> np.ndarray:
    x = gen_random(m, seed)
    return (x + x.conj().T) / 2


def gen_unitary(m: int, seed: int) -> np.ndarray:
    return unitary_group.rvs(m, random_state=seed)


def generate_matrix(spec: GeneratorSpec, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Erzeugt eine Testmatrix und ihr Spektrum.

    Returns:
        Tuple aus (Matrix, Eigenwerte)

    Raises:
        ValueError: Ungültige Parameter
    """
    m = spec.size()
    if spec.kind == 'triangular':
        eigs = parse_value_list(spec.params['eigs']) if 'eigs' in spec.params else np.arange(1, m + 1)
        a = gen_upper_triangular(m, eigs, seed)
        return a, np.asarray(eigs, dtype=complex)
    if spec.kind == 'hermitian':
        a = gen_hermitian(m, seed)
        return a, la.eigvalsh(a).astype(complex)
    if spec.kind == 'unitary':
        a = gen_unitary(m, seed)
    else:
        a = gen_random(m, seed)
    return a, la.eigvals(a)


def start_vector(kind: str, m: int, seed: int = 0) -> np.ndarray:
    """Startvektor 'ones' (normiert), 'e1' oder 'random' (komplex normalverteilt)."""
    if kind == 'ones':
        return np.ones(m, dtype=complex) / np.sqrt(m)
    if kind == 'e1':
        v = np.zeros(m, dtype=complex)
        v[0] = 1.0
        return v
    if kind == 'random':
        v = _complex_normal(np.random.default_rng(seed), m)
        return v / la.norm(v)
    raise ValueError(f"Unbekannter Startvektor '{kind}'. Erlaubt: ones, e1, random")


# ---------------------------------------------------------------------------
# Messgrößen
# ---------------------------------------------------------------------------

def biorthogonality_measure(V: np.ndarray, W: np.ndarray) -> float:
    """||W^H V - I||_2."""
    if V.shape[1] != W.shape[1]:
        raise ValueError(f"V hat {V.shape[1]}, W {W.shape[1]} Spalten")
    return spectral_norm(W.conj().T @ V - np.eye(V.shape[1]))


def projection_residual(A: np.ndarray, V: np.ndarray, W: np.ndarray,
                        S: np.ndarray, T: np.ndarray) -> float:
    """
    ||W_{n+1}^H A V_{n+1} S̲_n - T̲_n||_2.

    Raises:
        ValueError: Dimensionen passen nicht ((n+1) x n Pencil, n+1 Basisvektoren)
    """
    rows, n = S.shape
    if T.shape != S.shape or rows != n + 1 or V.shape[1] != rows or W.shape[1] != rows:
        raise ValueError(
            f"Dimensionen passen nicht: V {V.shape}, W {W.shape}, S {S.shape}, T {T.shape}"
        )
    return spectral_norm(W.conj().T @ A @ V @ S - T)


def ritz_values(T: np.ndarray, S: np.ndarray, cond_limit: float = RITZ_CONDITION_LIMIT) -> np.ndarray:
    """
    Verallgemeinerte Eigenwerte von T - theta·S.

    Bei gut konditioniertem S über T·S^{-1}, sonst über das homogene Problem;
    unendliche Ritz-Werte erscheinen als complex(inf).

    Raises:
        SingularMatrixError: Das Pencil ist singulär
    """
    T = as_matrix(T, "T")
    S = as_matrix(S, "S")
    if T.shape != S.shape or T.shape[0] != T.shape[1]:
        raise ValueError(f"Quadratische Blöcke gleicher Größe erwartet: {T.shape}, {S.shape}")

    if np.linalg.cond(S) < cond_limit:
        return la.eigvals(la.solve(S.T, T.T).T)

    alpha, beta = la.eigvals(T, S, homogeneous_eigvals=True)
    scale = max(spectral_norm(T), spectral_norm(S))
    tiny = 1e-14 * scale
    values = np.empty(alpha.size, dtype=complex)
    for i, (a, b) in enumerate(zip(alpha, beta)):
        if abs(a) <= tiny and abs(b) <= tiny:
            raise SingularMatrixError("Singuläres Pencil: T und S haben einen gemeinsamen Kern")
        values[i] = complex(np.inf) if abs(b) <= tiny else a / b
    return values


class AccuracyClass(Enum):
    """Genauigkeitsklassen der Ritz-Werte."""
    RED = "red"
    YELLOW = "yellow"
    GREEN = "green"
    BLUE = "blue"

    @classmethod
    def classify(cls, distance: float) -> 'AccuracyClass':
        # Grenzwerte fallen in die gröbere Klasse
        if distance < 1e-8:
            return cls.RED
        if distance < 1e-5:
            return cls.YELLOW
        if distance < 1e-2:
            return cls.GREEN
        return cls.BLUE


@dataclass
class RitzRecord:
    """Ritz-Werte eines Schritts mit Abstand zum nächsten Eigenwert."""
    step: int
    values: np.ndarray
    distances: np.ndarray
    classes: List[AccuracyClass]

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {
                'n': self.step,
                'index': i + 1,
                'theta_real': float(theta.real) if np.isfinite(theta) else float('inf'),
                'theta_imag': float(theta.imag) if np.isfinite(theta) else 0.0,
                'distance': float(d),
                'class': c.value,
            }
            for i, (theta, d, c) in enumerate(zip(self.values, self.distances, self.classes))
        ]


def ritz_convergence(spectrum: Sequence[complex], ritz_per_step: Mapping[int, np.ndarray]) -> List[RitzRecord]:
    """Klassifiziert die Ritz-Werte jedes Schritts nach dem Abstand zum nächsten Eigenwert."""
    spectrum = np.asarray(spectrum, dtype=complex)
    records = []
    for step in sorted(ritz_per_step):
        values = np.asarray(ritz_per_step[step], dtype=complex)
        distances = np.array([
            float(np.min(np.abs(spectrum - theta))) if np.isfinite(theta) else float('inf')
            for theta in values
        ])
        records.append(RitzRecord(step, values, distances, [AccuracyClass.classify(d) for d in distances]))
    return records


def ritz_history(result: LanczosResult, cond_limit: float = RITZ_CONDITION_LIMIT) -> Dict[int, np.ndarray]:
    """Ritz-Werte der führenden Pencils (T_k, S_k) für k = 1..n."""
    history = {}
    for k in range(1, result.n + 1):
        lead = result.pencil.leading(k)
        try:
            history[k] = ritz_values(lead.dense_T(), lead.dense_S(), cond_limit)
        except SingularMatrixError as e:
            logger.warning(f"Keine Ritz-Werte für n = {k}: {e}")
    return history


def first_convergence_step(records: Sequence[RitzRecord], target: complex, tol: float = 1e-8) -> Optional[int]:
    """Erster Schritt, in dem ein Ritz-Wert näher als tol an target liegt."""
    for record in records:
        finite = record.values[np.isfinite(record.values)]
        if finite.size and np.min(np.abs(finite - target)) < tol:
            return record.step
    return None


def loss_onset_step(measures: Sequence[float], level: float = LOSS_ONSET_LEVEL) -> Optional[int]:
    """Erstes n, ab dem das Biorthogonalitätsmaß level erreicht."""
    for k, x in enumerate(measures, start=1):
        if x >= level:
            return k
    return None


def first_red_eigenvalues(records: Sequence[RitzRecord], spectrum: Sequence[complex]) -> Dict[complex, int]:
    """Für jeden Eigenwert der erste Schritt, in dem er durch einen roten Ritz-Wert getroffen wird."""
    spectrum = np.asarray(spectrum, dtype=complex)
    first: Dict[complex, int] = {}
    for record in records:
        for theta, cls in zip(record.values, record.classes):
            if cls is AccuracyClass.RED:
                eig = complex(spectrum[np.argmin(np.abs(spectrum - theta))])
                first.setdefault(eig, record.step)
    return first


# ---------------------------------------------------------------------------
# Klassischer zweiseitiger Lanczos (Referenz)
# ---------------------------------------------------------------------------

@dataclass
class TwoSidedLanczos:
    V: np.ndarray
    W: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def tridiagonal(self) -> np.ndarray:
        return np.diag(self.alpha) + np.diag(self.beta, -1) + np.diag(self.gamma, 1)


def two_sided_lanczos(A: np.ndarray, v: np.ndarray, w: np.ndarray, n: int) -> TwoSidedLanczos:
    """
    Klassischer nichthermitescher Lanczos mit W^H V = I und tridiagonalem W^H A V.

    Raises:
        KrylovError: Ernsthafter Zusammenbruch (w^H v = 0)
    """
    A = as_matrix(A, "A")
    m = A.shape[0]
    V = np.zeros((m, n), dtype=complex)
    W = np.zeros((m, n), dtype=complex)
    alpha = np.zeros(n, dtype=complex)
    beta = np.zeros(max(n - 1, 0), dtype=complex)
    gamma = np.zeros(max(n - 1, 0), dtype=complex)

    V[:, 0] = v / la.norm(v)
    s = np.vdot(w, V[:, 0])
    if abs(s) < 1e-14 * la.norm(w):
        raise KrylovError("w^H v verschwindet")
    W[:, 0] = w / np.conj(s)

    for j in range(n):
        alpha[j] = np.vdot(W[:, j], A @ V[:, j])
        if j == n - 1:
            break
        r = A @ V[:, j] - alpha[j] * V[:, j]
        s_vec = A.conj().T @ W[:, j] - np.conj(alpha[j]) * W[:, j]
        if j > 0:
            r -= gamma[j - 1] * V[:, j - 1]
            s_vec -= np.conj(beta[j - 1]) * W[:, j - 1]
        omega = np.vdot(s_vec, r)
        if abs(omega) < 1e-14 * la.norm(r) * la.norm(s_vec):
            raise KrylovError(f"Ernsthafter Zusammenbruch im klassischen Lanczos, Schritt {j + 1}")
        beta[j] = np.sqrt(abs(omega))
        gamma[j] = omega / beta[j]
        V[:, j + 1] = r / beta[j]
        W[:, j + 1] = s_vec / np.conj(gamma[j])
    return TwoSidedLanczos(V, W, alpha, beta, gamma)


# ---------------------------------------------------------------------------
# Vergleich mit dem Orakel
# ---------------------------------------------------------------------------

@dataclass
class OracleComparison:
    """Abweichungen zwischen rat_lan und dem expliziten Orakel."""
    n: int
    angle_v: float
    angle_w: float
    aligned_residual: float
    ritz_distance: float
    square_projection_error: Optional[float]
    lanczos: LanczosResult
    oracle: OracleResult

    def passed(self, tol: float = 1e-7) -> bool:
        checks = [self.angle_v, self.angle_w, self.aligned_residual]
        if self.square_projection_error is not None:
            checks.append(self.square_projection_error)
        return all(np.isfinite(x) and x < tol for x in checks)

    def as_dict(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            'angle_v': self.angle_v,
            'angle_w': self.angle_w,
            'aligned_residual': self.aligned_residual,
            'ritz_distance': self.ritz_distance,
            'square_projection_error': self.square_projection_error,
        }


def _matched_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = a[np.isfinite(a)]
    b = b[np.isfinite(b)]
    if not a.size or not b.size:
        return 0.0 if a.size == b.size else float('inf')
    return float(max(np.min(np.abs(b - x)) for x in a))


def compare_with_oracle(A: np.ndarray, v: np.ndarray, w: np.ndarray,
                        poles_k: Sequence[ProjectivePole], poles_l: Sequence[ProjectivePole],
                        n: int, free_pole_v: Optional[ProjectivePole] = None,
                        free_pole_w: Optional[ProjectivePole] = None) -> OracleComparison:
    """
    Vergleicht rat_lan mit dem Orakel aus rationaler Arnoldi-Iteration und LR-Zerlegung.

    Die Basen beider Wege stimmen nur bis auf Spaltenskalierung D = diag(W_o^H V) überein;
    verglichen wird daher ||D^{-1} Z_o D S̲ - T̲|| / (||A||·||S̲||) mit Z_o = W_o^H A V_o.
    Die quadratische Projektion T_n S_n^{-1} stimmt nur bei unendlichem letzten Pol
    mit W_n^H A V_n überein und wird nur dann verglichen.
    """
    A = as_matrix(A, "A")
    poles_k = list(poles_k)[:n]
    poles_l = list(poles_l)[:n]
    lanczos = RationalLanczos(A, free_pole_v, free_pole_w).run(v, w, poles_k, poles_l, n)
    oracle = build_oracle(A, v, w, poles_k, poles_l, n, free_pole_w)

    k = min(lanczos.n, oracle.n)
    if k < 1:
        raise KrylovError("Zu wenige Schritte für einen Vergleich (Zusammenbruch)")
    Vl, Wl = lanczos.V[:, :k + 1], lanczos.W[:, :k + 1]
    Vo, Wo = oracle.pair.V[:, :k + 1], oracle.pair.W[:, :k + 1]

    angle_v = float(np.max(la.subspace_angles(Vl, Vo)))
    angle_w = float(np.max(la.subspace_angles(Wl, Wo)))

    d = np.einsum('ij,ij->j', Wo.conj(), Vl)
    z_o = Wo.conj().T @ A @ Vo
    aligned = (z_o * d[np.newaxis, :]) / d[:, np.newaxis]
    sub = lanczos.pencil.extended(k)
    S_ext, T_ext = sub.dense_S(), sub.dense_T()
    aligned_residual = spectral_norm(aligned @ S_ext - T_ext) / (spectral_norm(A) * spectral_norm(S_ext))

    lead_l = lanczos.pencil.leading(k)
    lead_o = oracle.pencil.leading(k)
    try:
        ritz_distance = _matched_distance(ritz_values(lead_l.dense_T(), lead_l.dense_S()),
                                          ritz_values(lead_o.dense_T(), lead_o.dense_S()))
    except SingularMatrixError:
        ritz_distance = float('inf')

    square_error = None
    if poles_k[k - 1].is_infinite:
        projection = la.solve(lead_l.dense_S().T, lead_l.dense_T().T).T
        square_error = spectral_norm(projection - aligned[:k, :k]) / spectral_norm(A)

    comparison = OracleComparison(k, angle_v, angle_w, aligned_residual, ritz_distance,
                                  square_error, lanczos, oracle)
    logger.info(f"Orakel-Vergleich (n = {k}): Winkel {angle_v:.2e}/{angle_w:.2e}, "
                f"Rest {aligned_residual:.2e}, Ritz {ritz_distance:.2e}")
    return comparison


# ---------------------------------------------------------------------------
# Experimente
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Vollständige Beschreibung eines Experiments."""
    name: str
    poles_k: List[ProjectivePole]
    poles_l: List[ProjectivePole]
    n: int
    generator: Optional[str] = None
    matrix: Optional[str] = None
    seed: Optional[int] = None
    start_vector: str = 'ones'
    start_vector_w: Optional[str] = None
    output_dir: Optional[str] = None
    min_n: int = 1
    target: Optional[complex] = None
    free_pole_v: ProjectivePole = field(default_factory=ProjectivePole.infinity)
    free_pole_w: ProjectivePole = field(default_factory=ProjectivePole.infinity)
    rebiorth: bool = False
    breakdown_tol: float = 1e-13
    ritz_condition: float = RITZ_CONDITION_LIMIT
    float_format: str = DEFAULT_FLOAT_FORMAT

    def validate(self, m: Optional[int] = None) -> None:
        """
        Raises:
            ConfigValidationError: Ungültige Konfiguration
        """
        if (self.generator is None) == (self.matrix is None):
            raise ConfigValidationError("Genau eine Quelle angeben: Generator oder Matrix-Datei")
        if self.generator is not None:
            if self.seed is None:
                raise ConfigValidationError("Für Generatoren ist ein Seed erforderlich")
            try:
                spec = parse_generator_spec(self.generator)
                m = spec.size() if m is None else m
            except ValueError as e:
                raise ConfigValidationError(str(e))
        if not self.poles_k or not self.poles_l:
            raise ConfigValidationError("Pollisten dürfen nicht leer sein")
        if self.n < 1:
            raise ConfigValidationError(f"n muss positiv sein (ist {self.n})")
        if m is not None and self.n >= m:
            raise ConfigValidationError(f"n = {self.n} muss kleiner als m = {m} sein")
        if not 1 <= self.min_n <= self.n:
            raise ConfigValidationError(f"min_n = {self.min_n} muss in 1..{self.n} liegen")

    @classmethod
    def from_dict(cls, name: str, data: Mapping[str, Any]) -> 'ExperimentConfig':
        """Baut eine Konfiguration aus einem Preset-Dictionary (Pole als Text)."""
        try:
            target = data.get('target')
            return cls(
                name=name,
                poles_k=parse_pole_list(str(data['poles_k'])),
                poles_l=parse_pole_list(str(data['poles_l'])),
                n=int(data['n']),
                generator=data.get('generator'),
                matrix=data.get('matrix'),
                seed=None if data.get('seed') is None else int(data['seed']),
                start_vector=data.get('start_vector', 'ones'),
                start_vector_w=data.get('start_vector_w'),
                output_dir=data.get('output_dir'),
                min_n=int(data.get('min_n', 1)),
                target=None if target is None else complex(target),
                free_pole_v=ProjectivePole.parse(str(data.get('free_pole_v', 'inf'))),
                free_pole_w=ProjectivePole.parse(str(data.get('free_pole_w', 'inf'))),
                rebiorth=bool(data.get('rebiorth', False)),
            )
        except (KeyError, ValueError, TypeError) as e:
            raise ConfigValidationError(f"Ungültiges Experiment '{name}': {e}")

    @classmethod
    def from_preset(cls, config, name: str, **overrides) -> 'ExperimentConfig':
        """
        Experiment aus einem Preset der Konfiguration.

        Args:
            config: ConfigManager
            name: Preset-Name (z.B. 'example1')
            overrides: Ersetzt einzelne Preset-Einträge (None wird ignoriert)
        """
        try:
            data = config.get_preset(name)
        except KeyError as e:
            raise ConfigValidationError(str(e))
        data.setdefault('free_pole_v', config.get('lanczos.free_pole_v', 'inf'))
        data.setdefault('free_pole_w', config.get('lanczos.free_pole_w', 'inf'))
        data.setdefault('rebiorth', config.get('lanczos.rebiorth', False))
        data.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls.from_dict(name, data)
        cfg.breakdown_tol = config.tolerance('breakdown_lanczos')
        cfg.ritz_condition = config.tolerance('ritz_condition')
        cfg.float_format = config.get('output.float_format', DEFAULT_FLOAT_FORMAT)
        return cfg

    def echo(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'generator': self.generator,
            'matrix': self.matrix,
            'seed': self.seed,
            'poles_k': format_pole_list(self.poles_k),
            'poles_l': format_pole_list(self.poles_l),
            'n': self.n,
            'start_vector': self.start_vector,
            'start_vector_w': self.start_vector_w or self.start_vector,
            'min_n': self.min_n,
            'free_pole_v': str(self.free_pole_v),
            'free_pole_w': str(self.free_pole_w),
            'rebiorth': self.rebiorth,
            'breakdown_tol': self.breakdown_tol,
        }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    lanczos: LanczosResult
    spectrum: np.ndarray
    biorthogonality: List[float]
    projection: List[float]
    ritz: List[RitzRecord]
    summary: Dict[str, Any]
    exit_code: int
    files: List[Path] = field(default_factory=list)


def load_matrix(cfg: ExperimentConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Matrix und Spektrum der Experimentquelle."""
    if cfg.matrix is not None:
        a = read_matrix_market(cfg.matrix)
        return a, la.eigvals(a)
    return generate_matrix(parse_generator_spec(cfg.generator), cfg.seed)


def _pole_check(result: LanczosResult) -> Dict[str, Any]:
    def max_error(found, expected):
        errors = [p.cross_ratio_error(q) for p, q in zip(found, expected)]
        return max(errors) if errors else 0.0

    try:
        sub_error = max_error(recover_poles_sub(result.pencil), result.poles_k)
        super_error = max_error(recover_poles_super(result.pencil), result.poles_l)
    except KrylovError as e:
        return {'passed': False, 'error': str(e)}
    return {'sub_max_error': sub_error, 'super_max_error': super_error,
            'passed': bool(sub_error < 1e-10 and super_error < 1e-10)}


def run_experiment(cfg: ExperimentConfig, write: bool = True, progress: bool = True) -> ExperimentResult:
    """
    Führt ein Experiment aus und schreibt CSV- und JSON-Dateien.

    Args:
        cfg: Experiment-Konfiguration
        write: Dateien schreiben (output_dir muss gesetzt sein)
        progress: Fortschrittsbalken anzeigen

    Returns:
        ExperimentResult; exit_code 2 bei Zusammenbruch vor min_n

    Raises:
        ConfigValidationError: Ungültige Konfiguration (es werden keine Dateien geschrieben)
        OSError: Schreibfehler
    """
    a, spectrum = load_matrix(cfg)
    m = a.shape[0]
    cfg.validate(m)
    if write and not cfg.output_dir:
        raise ConfigValidationError("Kein Ausgabeverzeichnis angegeben")

    v = start_vector(cfg.start_vector, m, cfg.seed or 0)
    w = start_vector(cfg.start_vector_w or cfg.start_vector, m, (cfg.seed or 0) + 1)
    poles_k = cycle_poles(cfg.poles_k, cfg.n)
    poles_l = cycle_poles(cfg.poles_l, cfg.n)

    logger.info(f"Experiment {cfg.name}: m = {m}, n = {cfg.n}, Pole {format_pole_list(cfg.poles_k)}")
    lanczos = RationalLanczos(a, cfg.free_pole_v, cfg.free_pole_w, cfg.breakdown_tol, cfg.rebiorth,
                              ShiftedSolver(a)).run(v, w, poles_k, poles_l, cfg.n)

    biorth, proj, ritz_steps = [], [], {}
    steps = range(1, lanczos.n + 1)
    for k in tqdm(steps, desc=f"Messgrößen {cfg.name}", unit="Schritt", disable=not progress):
        biorth.append(biorthogonality_measure(lanczos.V[:, :k], lanczos.W[:, :k]))
        sub = lanczos.pencil.extended(k)
        proj.append(projection_residual(a, lanczos.V[:, :k + 1], lanczos.W[:, :k + 1],
                                        sub.dense_S(), sub.dense_T()))
        lead = lanczos.pencil.leading(k)
        try:
            ritz_steps[k] = ritz_values(lead.dense_T(), lead.dense_S(), cfg.ritz_condition)
        except SingularMatrixError as e:
            logger.warning(f"Keine Ritz-Werte für n = {k}: {e}")
    records = ritz_convergence(spectrum, ritz_steps)

    exit_code = EXIT_OK
    if lanczos.breakdown is not None and lanczos.n < cfg.min_n:
        exit_code = EXIT_EARLY_BREAKDOWN
        logger.warning(f"Zusammenbruch nach {lanczos.n} Schritten, gefordert waren {cfg.min_n}")

    first_red = first_red_eigenvalues(records, spectrum)
    summary = {
        'format': 'ratkrylov-summary',
        'version': 1,
        'ratkrylov': __version__,
        'config': cfg.echo(),
        'matrix_size': m,
        'completed_steps': lanczos.n,
        'breakdown': lanczos.breakdown.to_dict() if lanczos.breakdown else None,
        'final': {
            'biorthogonality': biorth[-1] if biorth else None,
            'projection_residual': proj[-1] if proj else None,
        },
        'pole_recovery': _pole_check(lanczos),
        'first_red': [{'eigenvalue': eig, 'n': step}
                      for eig, step in sorted(first_red.items(), key=lambda x: (x[1], x[0].real))],
        'exit_code': exit_code,
    }
    if cfg.target is not None:
        step = first_convergence_step(records, cfg.target)
        summary['target'] = {
            'eigenvalue': cfg.target,
            'first_convergence_step': step,
            'biorthogonality_at_step': biorth[step - 1] if step else None,
            'loss_onset_step': loss_onset_step(biorth),
        }

    result = ExperimentResult(cfg, lanczos, spectrum, biorth, proj, records, summary, exit_code)
    if write:
        result.files = write_experiment_files(result, Path(cfg.output_dir))
    logger.info(f"Experiment {cfg.name} beendet: {lanczos.n} Schritte, Exit-Code {exit_code}")
    return result


def write_experiment_files(result: ExperimentResult, out: Path) -> List[Path]:
    """Schreibt biorthogonality.csv, projection.csv, ritz.csv und summary.json."""
    fmt = result.config.float_format
    files = [
        write_csv(out / 'biorthogonality.csv', 'biorthogonality', ['n', 'measure'],
                  ({'n': k, 'measure': x} for k, x in enumerate(result.biorthogonality, start=1)), fmt),
        write_csv(out / 'projection.csv', 'projection', ['n', 'residual'],
                  ({'n': k, 'residual': x} for k, x in enumerate(result.projection, start=1)), fmt),
        write_csv(out / 'ritz.csv', 'ritz', ['n', 'index', 'theta_real', 'theta_imag', 'distance', 'class'],
                  (row for record in result.ritz for row in record.rows()), fmt),
        write_json(out / 'summary.json', result.summary),
    ]
    return files


# ---------------------------------------------------------------------------
# Selbsttest
# ---------------------------------------------------------------------------

@dataclass
class SelftestCheck:
    name: str
    value: float
    threshold: float
    passed: bool
    message: str = ""


def _check(name: str, func, threshold: float) -> SelftestCheck:
    try:
        value = float(func())
    except Exception as e:  # ein Fehler zählt als nicht bestanden
        logger.error(f"Selbsttest {name}: {e}")
        return SelftestCheck(name, float('nan'), threshold, False, str(e))
    return SelftestCheck(name, value, threshold, bool(value < threshold))


def run_selftest(seed: int = 0) -> List[SelftestCheck]:
    """
    Schneller Invariantentest ohne pytest.

    Prüft Turnover, QR-Rekonstruktion, Transfer, Arnoldi-Kontrakt,
    inv-Hessenberg-Umwandlung, Polauslesen und Orakel-Äquivalenz.
    """
    from .pencils import HessenbergPencil, pole_sequence, to_inv_hessenberg
    from .rational_arnoldi import rational_arnoldi
    from .structured_core import (
        CorePattern,
        CoreTransformation,
        TransferDirection,
        classify_shape,
        qr_hessenberg,
        transfer_through,
        turnover,
    )

    rng = np.random.default_rng(seed)

    def random_core(index):
        return CoreTransformation.from_block(index, la.qr(_complex_normal(rng, (2, 2)))[0])

    def turnover_error():
        g1, g2, g3 = random_core(1), random_core(2), random_core(1)
        before = CorePattern([g1, g2, g3], 3).dense()
        return spectral_norm(CorePattern(list(turnover(g1, g2, g3)), 3).dense() - before)

    def hessenberg():
        return np.triu(_complex_normal(rng, (12, 12)), -1)

    def qr_error():
        h = hessenberg()
        pattern, r = qr_hessenberg(h)
        return spectral_norm(pattern.apply_left(r) - h) / spectral_norm(h)

    def transfer_error():
        h = hessenberg()
        pattern, r = qr_hessenberg(h)
        r2, p2 = transfer_through(pattern, r)
        if classify_shape(p2) != classify_shape(pattern):
            return float('inf')
        return spectral_norm(r2 @ p2.dense() - h) / spectral_norm(h)

    a = gen_random(14, seed)
    v = start_vector('random', 14, seed)
    poles = parse_pole_list('inf,2,inf,1+1i,inf,inf')

    def arnoldi_error():
        dec = rational_arnoldi(a, v, poles)
        return max(dec.orthogonality_defect(), dec.residual(a))

    def inv_hessenberg_error():
        dec = rational_arnoldi(a, v, poles)
        square = dec.pencil().square()
        inv = to_inv_hessenberg(square)
        z = la.solve(square.K.T, square.H.T).T
        z_inv = la.solve(inv.K_inv.T, inv.H_inv.T).T
        return spectral_norm(z - z_inv) / spectral_norm(z)

    def pole_readout_error():
        dec = rational_arnoldi(a, v, poles)
        found = pole_sequence(HessenbergPencil(dec.Hext, dec.Kext))
        return max(p.cross_ratio_error(q) for p, q in zip(found, poles))

    b = np.diag(np.arange(1.0, 13.0)) + np.triu(gen_random(12, seed + 1), 1) * 0.1
    oracle_poles = parse_pole_list('0.5,6.5')

    def oracle_error():
        comparison = compare_with_oracle(b, np.ones(12), np.ones(12),
                                         cycle_poles(oracle_poles, 6), cycle_poles(oracle_poles, 6), 6)
        return max(comparison.angle_v, comparison.angle_w, comparison.aligned_residual)

    checks = [
        _check('turnover', turnover_error, 1e-14),
        _check('qr_hessenberg', qr_error, 1e-13),
        _check('transfer_through', transfer_error, 1e-12),
        _check('rational_arnoldi', arnoldi_error, 1e-10),
        _check('to_inv_hessenberg', inv_hessenberg_error, 1e-10),
        _check('pole_sequence', pole_readout_error, 1e-12),
        _check('oracle_equivalence', oracle_error, 1e-7),
    ]
    failed = [c.name for c in checks if not c.passed]
    if failed:
        logger.warning(f"Selbsttest fehlgeschlagen: {failed}")
    return checks

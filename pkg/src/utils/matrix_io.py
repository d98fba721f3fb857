"""
Ein-/Ausgabe für Matrizen und Ergebnisdateien

Matrix-Market-Dateien, Generator-Spezifikationen der Form
'triangular:m=50,eigs=1:50' sowie versionierte CSV- und JSON-Ausgaben.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np
import scipy.io
import scipy.sparse

logger = logging.getLogger(__name__)

CSV_FORMAT_VERSION = 1
DEFAULT_FLOAT_FORMAT = '%.17e'

GENERATOR_KINDS = ('triangular', 'random', 'hermitian', 'unitary')

PathLike = Union[str, Path]


def read_matrix_market(path: PathLike) -> np.ndarray:
    """
    Liest eine Matrix-Market-Datei (coordinate oder array, reell oder komplex).

    Returns:
        Dichte complex128-Matrix

    Raises:
        FileNotFoundError: Datei existiert nicht
        ValueError: Inhalt ist keine gültige Matrix-Market-Datei
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Matrix-Datei nicht gefunden: {path}")
    try:
        data = scipy.io.mmread(str(path))
    except Exception as e:
        raise ValueError(f"Fehler beim Lesen von {path}: {e}")
    if scipy.sparse.issparse(data):
        data = data.toarray()
    matrix = np.asarray(data, dtype=complex)
    logger.debug(f"Matrix {path} gelesen: {matrix.shape}")
    return matrix


def write_matrix_market(path: PathLike, matrix: np.ndarray, comment: str = "") -> Path:
    """Schreibt eine dichte Matrix im Matrix-Market-Array-Format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = np.asarray(matrix)
    if np.iscomplexobj(matrix) and not np.any(matrix.imag):
        matrix = matrix.real
    scipy.io.mmwrite(str(path), matrix, comment=comment, precision=17)
    return path


# ---------------------------------------------------------------------------
# Generator-Spezifikationen
# ---------------------------------------------------------------------------

@dataclass
class GeneratorSpec:
    """Generator für Testmatrizen, z.B. kind='triangular', params={'m': '50', 'eigs': '1:50'}."""
    kind: str
    params: Dict[str, str] = field(default_factory=dict)

    def size(self) -> int:
        if 'm' in self.params:
            return int(self.params['m'])
        if 'eigs' in self.params:
            return len(parse_value_list(self.params['eigs']))
        raise ValueError(f"Generator {self.kind} braucht 'm' oder 'eigs'")

    def __str__(self) -> str:
        if not self.params:
            return self.kind
        return f"{self.kind}:" + ','.join(f"{k}={v}" for k, v in self.params.items())


def parse_generator_spec(text: str) -> GeneratorSpec:
    """
    Liest 'kind:key=value,key=value'.

    Raises:
        ValueError: Unbekannter Generator oder ungültiges Schlüssel-Wert-Paar
    """
    kind, _, rest = text.strip().partition(':')
    kind = kind.strip().lower()
    if kind not in GENERATOR_KINDS:
        raise ValueError(f"Unbekannter Generator '{kind}'. Erlaubt: {', '.join(GENERATOR_KINDS)}")
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(','))):
        key, sep, value = item.partition('=')
        if not sep or not key.strip() or not value.strip():
            raise ValueError(f"Ungültiger Generator-Parameter: {item!r}")
        params[key.strip().lower()] = value.strip()
    return GeneratorSpec(kind, params)


def parse_value_list(text: str) -> np.ndarray:
    """
    Liest eine Werteliste: Bereich 'a:b' bzw. 'a:b:schritt' (inklusive b) oder
    mit Semikolon getrennte Werte '1;2;3+1j'.
    """
    text = text.strip()
    if ';' not in text and ':' in text:
        parts = [float(p) for p in text.split(':')]
        if len(parts) not in (2, 3):
            raise ValueError(f"Ungültiger Bereich: {text!r}")
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) == 3 else 1.0
        if step == 0:
            raise ValueError("Schrittweite 0 im Bereich")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise ValueError(f"Leerer Bereich: {text!r}")
        return start + step * np.arange(count, dtype=complex)
    values = [complex(p.strip().replace('i', 'j')) for p in text.split(';') if p.strip()]
    if not values:
        raise ValueError("Leere Werteliste")
    return np.array(values, dtype=complex)


# ---------------------------------------------------------------------------
# CSV und JSON
# ---------------------------------------------------------------------------

def format_float(value: Any, float_format: str = DEFAULT_FLOAT_FORMAT) -> str:
    """Formatiert Gleitkommazahlen; nicht-endliche Werte werden 'inf', '-inf' bzw. 'nan'."""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return float_format % value
    return str(value)


def write_csv(path: PathLike, kind: str, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]],
              float_format: str = DEFAULT_FLOAT_FORMAT, version: int = CSV_FORMAT_VERSION) -> Path:
    """
    Schreibt eine CSV-Datei mit Versionskopf '# ratkrylov-csv v{version} {kind}'.

    Args:
        path: Zieldatei
        kind: Art der Daten (z.B. 'biorthogonality')
        fieldnames: Spaltennamen
        rows: Zeilen als Dictionaries
        float_format: printf-Format für Gleitkommazahlen

    Returns:
        Pfad der geschriebenen Datei
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(f"# ratkrylov-csv v{version} {kind}\n")
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator='\n')
        writer.writeheader()
        count = 0
        for row in rows:
            writer.writerow({k: format_float(v, float_format) for k, v in row.items()})
            count += 1
    logger.debug(f"{count} Zeilen nach {path} geschrieben")
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    """Liest eine mit write_csv geschriebene Datei (Kommentarzeilen werden übersprungen)."""
    with open(path, 'r', encoding='utf-8', newline='') as f:
        lines = [line for line in f if not line.startswith('#')]
    return list(csv.DictReader(lines))


def to_jsonable(value: Any) -> Any:
    """Wandelt numpy-Typen, komplexe und nicht-endliche Zahlen in JSON-taugliche Werte um."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        value = complex(value)
        if value.imag == 0:
            return to_jsonable(value.real)
        return {'re': to_jsonable(value.real), 'im': to_jsonable(value.imag)}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return format_float(value)
        return value
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: PathLike, data: Dict[str, Any]) -> Path:
    """Schreibt ein Dictionary als sortiertes, eingerücktes JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(to_jsonable(data), f, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
        f.write('\n')
    return path

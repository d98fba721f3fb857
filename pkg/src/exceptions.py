"""
Fehlerklassen für ratkrylov

Breakdowns innerhalb einer Iteration sind Ergebnisse (siehe BreakdownReport),
keine Ausnahmen. Die Klassen hier signalisieren Eingaben oder Zustände, mit
denen nicht weitergerechnet werden kann.
"""


class KrylovError(Exception):
    """Basisklasse aller Fehler von ratkrylov."""


class CoreIndexError(KrylovError, ValueError):
    """Index einer Core-Transformation passt nicht zur Matrix oder zum Turnover-Muster."""


class StructureMismatchError(KrylovError):
    """Eine Matrix hat nicht die geforderte (Rang-)Struktur."""


class SingularMatrixError(KrylovError, ArithmeticError):
    """Ein Dreiecksfaktor oder ein Pencil-Block ist numerisch singulär."""


class PoleOnSpectrumError(KrylovError, ArithmeticError):
    """Das verschobene System (nu*A - mu*I) ist nicht lösbar: Pol liegt auf dem Spektrum."""

    def __init__(self, pole, message: str = ""):
        self.pole = pole
        super().__init__(message or f"Pol {pole} liegt (numerisch) auf dem Spektrum von A")


class BreakdownError(KrylovError):
    """Ernsthafter Zusammenbruch, der nicht durch Abschneiden behandelt werden kann."""

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class ConfigValidationError(KrylovError, ValueError):
    """Ungültige Konfiguration oder ungültiges Experiment."""

"""
ratkrylov - Rationale Krylov-Raum-Methoden

Orthonormales rationales Arnoldi mit Hessenberg- und inv-Hessenberg-Pencils,
schiefe (bi-orthogonale) Projektion auf rationale Krylov-Räume über ein
tridiagonales Pencil und die nichthermitesche rationale Lanczos-Iteration
mit kurzer Rekursion, dazu ein Diagnose-Harness für die Experimente.
"""

__version__ = "0.3.0"
__author__ = "ratkrylov Team"
__email__ = "contact@ratkrylov.dev"

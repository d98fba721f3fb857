"""
CLI Krylov Commands - Arnoldi, Lanczos, Ritz-Werte und Orakel-Vergleich
"""

import click
import logging
import sys
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from tabulate import tabulate

from ..diagnostics_harness import (
    EXIT_EARLY_BREAKDOWN,
    compare_with_oracle,
    generate_matrix,
    ritz_convergence,
    ritz_values,
    start_vector,
)
from ..exceptions import KrylovError, SingularMatrixError
from ..pencils import HessenbergPencil, TridiagonalPencil, cycle_poles, parse_pole_list, pole_sequence
from ..rational_arnoldi import rational_arnoldi
from ..rational_lanczos import RationalLanczos, recover_poles_sub, recover_poles_super
from ..structured_core import ShiftedSolver
from ..utils.matrix_io import (
    parse_generator_spec,
    read_matrix_market,
    write_csv,
    write_matrix_market,
)


def load_source(config, matrix: Optional[str], gen: Optional[str],
                seed: Optional[int]) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Matrix aus --matrix oder --gen.

    Returns:
        Tuple aus (Matrix, Spektrum, verwendeter Seed)

    Raises:
        click.UsageError: Keine oder beide Quellen angegeben
    """
    if (matrix is None) == (gen is None):
        raise click.UsageError("Genau eine Quelle angeben: --matrix oder --gen")
    if seed is None:
        seed = int(config.get('experiments.defaults.seed', 42))
    if matrix is not None:
        a = read_matrix_market(matrix)
        return a, np.linalg.eigvals(a), seed
    a, spectrum = generate_matrix(parse_generator_spec(gen), seed)
    return a, spectrum, seed


def _default_n(config, n: Optional[int], m: int) -> int:
    n = n if n is not None else int(config.get('experiments.defaults.n', 20))
    if not 0 < n < m:
        raise click.BadParameter(f"n = {n} muss in 1..{m - 1} liegen", param_hint='--n')
    return n


def _source_options(func):
    options = [
        click.option('--matrix', type=click.Path(exists=True, dir_okay=False),
                     help='Matrix-Market-Datei (.mtx)'),
        click.option('--gen', help="Generator, z.B. 'triangular:m=50,eigs=1:50'"),
        click.option('--seed', type=int, default=None, help='Seed des Generators'),
        click.option('--start', type=click.Choice(['ones', 'e1', 'random']), default='ones',
                     help='Startvektor'),
        click.option('--n', 'n', type=int, default=None, help='Anzahl Schritte'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.command()
@_source_options
@click.option('--poles-k', required=True, help="Pole, zyklisch wiederholt, z.B. 'inf,0,2+1i'")
@click.option('--out', type=click.Path(file_okay=False), default=None,
              help='Ausgabeverzeichnis für H.mtx, K.mtx und V.mtx')
@click.option('--tol', type=float, default=None, help='Schwelle für den glücklichen Zusammenbruch')
@click.pass_context
def arnoldi(ctx, matrix: Optional[str], gen: Optional[str], seed: Optional[int], start: str,
            n: Optional[int], poles_k: str, out: Optional[str], tol: Optional[float]):
    """Rationale Arnoldi-Zerlegung mit Prüfung des Hessenberg-Pencils."""

    config = ctx.obj['config']
    logger = logging.getLogger(__name__)

    try:
        a, _, seed = load_source(config, matrix, gen, seed)
        n = _default_n(config, n, a.shape[0])
        poles = cycle_poles(parse_pole_list(poles_k), n)
        tol = tol if tol is not None else config.tolerance('breakdown_arnoldi')

        dec = rational_arnoldi(a, start_vector(start, a.shape[0], seed), poles,
                               reorth=bool(config.get('arnoldi.reorthogonalize', True)), tol=tol)

        rows = [
            ["Matrixgröße", a.shape[0]],
            ["Schritte", f"{dec.n} / {n}"],
            ["||V^H V - I||", f"{dec.orthogonality_defect():.3e}"],
            ["||A V K - V H|| / ||A||", f"{dec.residual(a):.3e}"],
        ]
        if dec.n > 0:
            found = pole_sequence(HessenbergPencil(dec.Hext, dec.Kext))
            error = max(p.cross_ratio_error(q) for p, q in zip(found, dec.poles))
            rows.append(["Pol-Auslesefehler", f"{error:.3e}"])
        if dec.breakdown:
            rows.append(["Zusammenbruch", dec.breakdown.message])
        click.echo(tabulate(rows, headers=["Eigenschaft", "Wert"], tablefmt="grid"))

        if out:
            out_dir = Path(out)
            write_matrix_market(out_dir / 'H.mtx', dec.Hext, "rationales Arnoldi: H")
            write_matrix_market(out_dir / 'K.mtx', dec.Kext, "rationales Arnoldi: K")
            write_matrix_market(out_dir / 'V.mtx', dec.V, "rationales Arnoldi: Basis")
            click.echo(f"✓ Pencil geschrieben nach {out_dir}")

    except (click.UsageError, click.BadParameter):
        raise
    except Exception as e:
        logger.error(f"Arnoldi-Fehler: {e}")
        click.echo(f"Fehler im rationalen Arnoldi: {e}", err=True)
        sys.exit(1)


@click.command()
@_source_options
@click.option('--poles-k', required=True, help='Pole von K, zyklisch wiederholt')
@click.option('--poles-l', required=True, help='Pole von L, zyklisch wiederholt')
@click.option('--out', type=click.Path(file_okay=False), default=None,
              help='Ausgabeverzeichnis für T.mtx und S.mtx')
@click.option('--save-basis', is_flag=True, help='Auch V.mtx und W.mtx schreiben')
@click.option('--tol', type=float, default=None, help='Schwelle für den ernsthaften Zusammenbruch')
@click.option('--rebiorth', is_flag=True, help='Volle Rebiorthogonalisierung (Fehlersuche)')
@click.option('--min-n', type=int, default=1, help='Mindestanzahl Schritte, sonst Exit-Code 2')
@click.pass_context
def lanczos(ctx, matrix: Optional[str], gen: Optional[str], seed: Optional[int], start: str,
            n: Optional[int], poles_k: str, poles_l: str, out: Optional[str], save_basis: bool,
            tol: Optional[float], rebiorth: bool, min_n: int):
    """Nichthermitesche rationale Lanczos-Iteration (rat_lan)."""

    config = ctx.obj['config']
    logger = logging.getLogger(__name__)

    try:
        a, _, seed = load_source(config, matrix, gen, seed)
        m = a.shape[0]
        n = _default_n(config, n, m)
        tol = tol if tol is not None else config.tolerance('breakdown_lanczos')
        rebiorth = rebiorth or bool(config.get('lanczos.rebiorth', False))

        engine = RationalLanczos(a, tol=tol, rebiorth=rebiorth, solver=ShiftedSolver(a))
        result = engine.run(start_vector(start, m, seed), start_vector(start, m, seed + 1),
                            cycle_poles(parse_pole_list(poles_k), n),
                            cycle_poles(parse_pole_list(poles_l), n), n)

        rows = [
            ["Matrixgröße", m],
            ["Schritte", f"{result.n} / {n}"],
            ["||W^H V - I||", f"{result.biorthogonality():.3e}" if result.n else "-"],
            ["||W^H A V S - T||", f"{result.projection_residual(a):.3e}" if result.n else "-"],
            ["Gehaltene Vektoren", result.max_held_vectors],
        ]
        if result.n > 1:
            try:
                sub = max(p.cross_ratio_error(q) for p, q in zip(recover_poles_sub(result.pencil),
                                                                  result.poles_k))
                sup = max(p.cross_ratio_error(q) for p, q in zip(recover_poles_super(result.pencil),
                                                                  result.poles_l))
                rows.append(["Pol-Auslesefehler (sub/super)", f"{sub:.3e} / {sup:.3e}"])
            except KrylovError as e:
                rows.append(["Pol-Auslesefehler", str(e)])
        if result.breakdown:
            rows.append(["Zusammenbruch", result.breakdown.message])
        click.echo(tabulate(rows, headers=["Eigenschaft", "Wert"], tablefmt="grid"))

        if out:
            out_dir = Path(out)
            write_matrix_market(out_dir / 'T.mtx', result.T, "rationales Lanczos: T")
            write_matrix_market(out_dir / 'S.mtx', result.S, "rationales Lanczos: S")
            if save_basis:
                write_matrix_market(out_dir / 'V.mtx', result.V, "rationales Lanczos: V")
                write_matrix_market(out_dir / 'W.mtx', result.W, "rationales Lanczos: W")
            click.echo(f"✓ Pencil geschrieben nach {out_dir}")

    except (click.UsageError, click.BadParameter):
        raise
    except Exception as e:
        logger.error(f"Lanczos-Fehler: {e}")
        click.echo(f"Fehler im rationalen Lanczos: {e}", err=True)
        sys.exit(1)

    if result.breakdown is not None and result.n < min_n:
        click.echo(f"Zusammenbruch nach {result.n} Schritten (gefordert: {min_n})", err=True)
        sys.exit(EXIT_EARLY_BREAKDOWN)


@click.command()
@click.option('--pencil-dir', required=True, type=click.Path(exists=True, file_okay=False),
              help='Verzeichnis mit T.mtx und S.mtx')
@click.option('--matrix', type=click.Path(exists=True, dir_okay=False),
              help='Matrix für die Abstände zum Spektrum')
@click.option('--gen', help='Generator für die Abstände zum Spektrum')
@click.option('--seed', type=int, default=None, help='Seed des Generators')
@click.option('--out', type=click.Path(dir_okay=False), default=None,
              help='Ziel-CSV (Standard: ritz.csv im Pencil-Verzeichnis)')
@click.pass_context
def ritz(ctx, pencil_dir: str, matrix: Optional[str], gen: Optional[str],
         seed: Optional[int], out: Optional[str]):
    """Ritz-Werte aller führenden Pencils (T_k, S_k) als CSV."""

    config = ctx.obj['config']
    logger = logging.getLogger(__name__)

    try:
        directory = Path(pencil_dir)
        pencil = TridiagonalPencil.from_dense(read_matrix_market(directory / 'T.mtx'),
                                              read_matrix_market(directory / 'S.mtx'))
        spectrum = None
        if matrix is not None or gen is not None:
            _, spectrum, _ = load_source(config, matrix, gen, seed)

        cond_limit = config.tolerance('ritz_condition')
        per_step = {}
        for k in range(1, pencil.n + 1):
            lead = pencil.leading(k)
            try:
                per_step[k] = ritz_values(lead.dense_T(), lead.dense_S(), cond_limit)
            except SingularMatrixError as e:
                logger.warning(f"Keine Ritz-Werte für n = {k}: {e}")

        fieldnames = ['n', 'index', 'theta_real', 'theta_imag', 'distance', 'class']
        if spectrum is not None:
            rows = [row for record in ritz_convergence(spectrum, per_step) for row in record.rows()]
        else:
            rows = [
                {'n': k, 'index': i + 1, 'theta_real': float(theta.real), 'theta_imag': float(theta.imag),
                 'distance': float('nan'), 'class': ''}
                for k, values in sorted(per_step.items()) for i, theta in enumerate(values)
            ]
        target = Path(out) if out else directory / 'ritz.csv'
        write_csv(target, 'ritz', fieldnames, rows, config.get('output.float_format', '%.17e'))

        final = per_step.get(pencil.n)
        if final is not None:
            table = [[i + 1, f"{theta.real:.10g}", f"{theta.imag:.10g}"] for i, theta in enumerate(final)]
            click.echo(tabulate(table, headers=["#", "Re", "Im"], tablefmt="grid"))
        click.echo(f"✓ {len(rows)} Ritz-Werte geschrieben nach {target}")

    except (click.UsageError, click.BadParameter):
        raise
    except Exception as e:
        logger.error(f"Ritz-Fehler: {e}")
        click.echo(f"Fehler bei den Ritz-Werten: {e}", err=True)
        sys.exit(1)


@click.command('oracle-check')
@_source_options
@click.option('--poles-k', required=True, help='Pole von K, zyklisch wiederholt')
@click.option('--poles-l', required=True, help='Pole von L, zyklisch wiederholt')
@click.option('--tol', type=float, default=1e-7, help='Schwelle für Winkel und Residuum')
@click.pass_context
def oracle_check(ctx, matrix: Optional[str], gen: Optional[str], seed: Optional[int], start: str,
                 n: Optional[int], poles_k: str, poles_l: str, tol: float):
    """Vergleicht rat_lan mit dem expliziten biorthogonalen Orakel."""

    config = ctx.obj['config']
    logger = logging.getLogger(__name__)

    try:
        a, _, seed = load_source(config, matrix, gen, seed)
        m = a.shape[0]
        n = _default_n(config, n, m)
        comparison = compare_with_oracle(
            a, start_vector(start, m, seed), start_vector(start, m, seed + 1),
            cycle_poles(parse_pole_list(poles_k), n), cycle_poles(parse_pole_list(poles_l), n), n,
        )

        rows = [[key, "-" if value is None else f"{value:.3e}" if isinstance(value, float) else value]
                for key, value in comparison.as_dict().items()]
        click.echo(tabulate(rows, headers=["Größe", "Wert"], tablefmt="grid"))

        if comparison.passed(tol):
            click.echo("✓ rat_lan und Orakel stimmen überein")
        else:
            click.echo(f"✗ Abweichung über {tol:.1e}", err=True)
            sys.exit(1)

    except (click.UsageError, click.BadParameter):
        raise
    except Exception as e:
        logger.error(f"Orakel-Fehler: {e}")
        click.echo(f"Fehler beim Orakel-Vergleich: {e}", err=True)
        sys.exit(1)

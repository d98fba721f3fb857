"""
CLI Experiment Commands - Experimente reproduzieren und Selbsttest
"""

import click
import logging
import sys
from pathlib import Path
from typing import Optional

from tabulate import tabulate

from ..diagnostics_harness import (
    EXIT_OK,
    ExperimentConfig,
    ExperimentResult,
    run_experiment,
    run_selftest,
)
from ..exceptions import ConfigValidationError
from ..pencils import ProjectivePole, parse_pole_list


def _print_summary(result: ExperimentResult) -> None:
    summary = result.summary
    final = summary['final']

    def fmt(value):
        return "-" if value is None else f"{value:.3e}"

    rows = [
        ["Experiment", result.config.name],
        ["Matrixgröße", summary['matrix_size']],
        ["Schritte", f"{summary['completed_steps']} / {result.config.n}"],
        ["||W^H V - I|| (final)", fmt(final['biorthogonality'])],
        ["||W^H A V S - T|| (final)", fmt(final['projection_residual'])],
        ["Pol-Auslesen", "✓" if summary['pole_recovery'].get('passed') else "✗"],
    ]
    if 'target' in summary:
        step = summary['target']['first_convergence_step']
        rows.append([f"Konvergenz gegen {result.config.target.real:g}", step if step else "nicht erreicht"])
    if summary['breakdown']:
        rows.append(["Zusammenbruch", summary['breakdown']['message']])
    click.echo(tabulate(rows, headers=["Eigenschaft", "Wert"], tablefmt="grid"))
    for path in result.files:
        click.echo(f"  • {path}")


def _finish(result: ExperimentResult) -> None:
    _print_summary(result)
    if result.exit_code != EXIT_OK:
        click.echo(f"Zusammenbruch vor n = {result.config.min_n}", err=True)
        sys.exit(result.exit_code)


@click.command()
@click.argument('example', type=click.Choice(['example1', 'example2']))
@click.option('--out', type=click.Path(file_okay=False), default=None,
              help='Ausgabeverzeichnis (Standard: <output.directory>/<example>)')
@click.option('--seed', type=int, default=None, help='Seed des Generators')
@click.option('--n', 'n', type=int, default=None, help='Anzahl Schritte')
@click.option('--min-n', type=int, default=None, help='Mindestanzahl Schritte, sonst Exit-Code 2')
@click.option('--rebiorth', is_flag=True, default=None, help='Volle Rebiorthogonalisierung (Fehlersuche)')
@click.option('--no-progress', is_flag=True, help='Keinen Fortschrittsbalken anzeigen')
@click.pass_context
def reproduce(ctx, example: str, out: Optional[str], seed: Optional[int], n: Optional[int],
              min_n: Optional[int], rebiorth: Optional[bool], no_progress: bool):
    """Reproduziert eines der beiden eingebauten Experimente."""

    config = ctx.obj['config']
    logger = logging.getLogger(__name__)

    try:
        output_dir = out or str(Path(config.get('output.directory', 'runs')) / example)
        cfg = ExperimentConfig.from_preset(config, example, output_dir=output_dir, seed=seed,
                                           n=n, min_n=min_n, rebiorth=rebiorth or None)
        click.echo(f"Starte {example}: {cfg.generator}, Pole {cfg.poles_k[0]}, {cfg.poles_k[-1]}")
        result = run_experiment(cfg, write=True, progress=not no_progress)

    except ConfigValidationError as e:
        logger.error(f"Ungültiges Experiment: {e}")
        click.echo(f"Ungültige Experiment-Konfiguration: {e}", err=True)
        sys.exit(1)
    except Exception as e:
        logger.error(f"Experiment-Fehler: {e}")
        click.echo(f"Fehler beim Experiment: {e}", err=True)
        sys.exit(1)

    _finish(result)


@click.command()
@click.option('--matrix', type=click.Path(exists=True, dir_okay=False),
              help='Matrix-Market-Datei (.mtx)')
@click.option('--gen', help="Generator, z.B. 'triangular:m=50,eigs=1:50'")
@click.option('--seed', type=int, default=None, help='Seed des Generators')
@click.option('--poles-k', required=True, help='Pole von K, zyklisch wiederholt')
@click.option('--poles-l', required=True, help='Pole von L, zyklisch wiederholt')
@click.option('--n', 'n', type=int, required=True, help='Anzahl Schritte')
@click.option('--out', type=click.Path(file_okay=False), required=True, help='Ausgabeverzeichnis')
@click.option('--start', type=click.Choice(['ones', 'e1', 'random']), default='ones',
              help='Startvektor')
@click.option('--target', type=float, default=None, help='Eigenwert für die Konvergenzmessung')
@click.option('--min-n', type=int, default=1, help='Mindestanzahl Schritte, sonst Exit-Code 2')
@click.option('--tol', type=float, default=None, help='Schwelle für den ernsthaften Zusammenbruch')
@click.option('--rebiorth', is_flag=True, help='Volle Rebiorthogonalisierung (Fehlersuche)')
@click.option('--no-progress', is_flag=True, help='Keinen Fortschrittsbalken anzeigen')
@click.pass_context
def experiment(ctx, matrix: Optional[str], gen: Optional[str], seed: Optional[int], poles_k: str,
               poles_l: str, n: int, out: str, start: str, target: Optional[float], min_n: int,
               tol: Optional[float], rebiorth: bool, no_progress: bool):
    """Freies Experiment mit eigener Matrix und eigenen Polen."""

    config = ctx.obj['config']
    logger = logging.getLogger(__name__)

    try:
        if gen is not None and seed is None:
            seed = int(config.get('experiments.defaults.seed', 42))
        cfg = ExperimentConfig(
            name='experiment',
            poles_k=parse_pole_list(poles_k),
            poles_l=parse_pole_list(poles_l),
            n=n,
            generator=gen,
            matrix=matrix,
            seed=seed,
            start_vector=start,
            output_dir=out,
            min_n=min_n,
            target=None if target is None else complex(target),
            free_pole_v=ProjectivePole.parse(str(config.get('lanczos.free_pole_v', 'inf'))),
            free_pole_w=ProjectivePole.parse(str(config.get('lanczos.free_pole_w', 'inf'))),
            rebiorth=rebiorth or bool(config.get('lanczos.rebiorth', False)),
            breakdown_tol=tol if tol is not None else config.tolerance('breakdown_lanczos'),
            ritz_condition=config.tolerance('ritz_condition'),
            float_format=config.get('output.float_format', '%.17e'),
        )
        result = run_experiment(cfg, write=True, progress=not no_progress)

    except ConfigValidationError as e:
        logger.error(f"Ungültiges Experiment: {e}")
        click.echo(f"Ungültige Experiment-Konfiguration: {e}", err=True)
        sys.exit(1)
    except Exception as e:
        logger.error(f"Experiment-Fehler: {e}")
        click.echo(f"Fehler beim Experiment: {e}", err=True)
        sys.exit(1)

    _finish(result)


@click.command()
@click.option('--seed', type=int, default=0, help='Seed der Zufallsmatrizen')
@click.pass_context
def selftest(ctx, seed: int):
    """Schneller Test der wichtigsten Invarianten (ohne pytest)."""

    logger = logging.getLogger(__name__)

    try:
        checks = run_selftest(seed)
    except Exception as e:
        logger.error(f"Selbsttest-Fehler: {e}")
        click.echo(f"Fehler im Selbsttest: {e}", err=True)
        sys.exit(1)

    rows = [[c.name, f"{c.value:.2e}", f"{c.threshold:.0e}", "✓" if c.passed else "✗", c.message]
            for c in checks]
    click.echo(tabulate(rows, headers=["Prüfung", "Wert", "Schwelle", "OK", "Hinweis"], tablefmt="grid"))

    failed = sum(1 for c in checks if not c.passed)
    if failed:
        click.echo(f"✗ {failed} von {len(checks)} Prüfungen fehlgeschlagen", err=True)
        sys.exit(1)
    click.echo(f"✓ Alle {len(checks)} Prüfungen bestanden")

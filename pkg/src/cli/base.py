"""
CLI Base Module - Setup und Hauptgruppe
"""

import click
import logging
import sys
from typing import Optional

# Lokale Imports
from ..config_manager import get_config


def setup_cli_logging(verbose: bool = False):
    """
    Konsolen-Handler für die Kommandozeile.

    Ohne --verbose nur Warnungen und Fehler; die Log-Datei der Konfiguration
    bleibt davon unberührt.
    """
    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, '_ratkrylov_cli', False)]:
        root.removeHandler(handler)

    # Führendes Leerzeichen für bessere Progressbar-Kompatibilität
    console = logging.StreamHandler()
    console.setFormatter(logging.Formatter(' %(levelname)s: %(message)s'))
    console.setLevel(logging.DEBUG if verbose else logging.WARNING)
    console._ratkrylov_cli = True
    root.addHandler(console)
    if verbose:
        root.setLevel(logging.DEBUG)

    # numpy/scipy melden sich über warnings, nicht über logging
    logging.captureWarnings(True)


@click.group()
@click.option('--config', '-c', type=click.Path(exists=True),
              help='Pfad zur Benutzer-Konfigurationsdatei')
@click.option('--verbose', '-v', is_flag=True,
              help='Debug-Meldungen auch auf der Konsole')
@click.pass_context
def cli(ctx, config: Optional[str], verbose: bool):
    """ratkrylov - Rationale Krylov-Verfahren und Lanczos-Diagnose."""
    ctx.ensure_object(dict)
    setup_cli_logging(verbose)

    try:
        ctx.obj['config'] = get_config(config)
    except Exception as e:
        click.echo(f"Fehler beim Laden der Konfiguration: {e}", err=True)
        sys.exit(1)

    ctx.obj['verbose'] = verbose
    logging.getLogger(__name__).debug("ratkrylov gestartet")

"""
CLI Config Commands - Konfiguration anzeigen und anpassen
"""

import click
import logging
import sys

import yaml
from tabulate import tabulate


@click.command('config-info')
@click.pass_context
def config_info(ctx):
    """Zeigt die aktuelle Konfiguration an."""

    config = ctx.obj['config']

    click.echo("=" * 50)
    click.echo("KONFIGURATIONSINFORMATIONEN")
    click.echo("=" * 50)

    click.echo(f"Standard-Konfiguration: {config.default_config_path}")
    click.echo(f"Benutzer-Konfiguration: {config.user_config_path}")
    click.echo(f"Benutzer-Config existiert: {'Ja' if config.user_config_path.exists() else 'Nein'}")

    click.echo("\n" + "=" * 50)
    click.echo("TOLERANZEN")
    click.echo("=" * 50)
    tolerances = config.get('tolerances', {}) or {}
    click.echo(tabulate([[name, f"{float(value):.1e}"] for name, value in tolerances.items()],
                        headers=["Name", "Wert"], tablefmt="grid"))

    click.echo("\n" + "=" * 50)
    click.echo("ITERATIONEN")
    click.echo("=" * 50)
    click.echo(f"Arnoldi-Reorthogonalisierung: {'Ja' if config.get('arnoldi.reorthogonalize') else 'Nein'}")
    click.echo(f"Freie Pole (V/W): {config.get('lanczos.free_pole_v')} / {config.get('lanczos.free_pole_w')}")
    click.echo(f"Rebiorthogonalisierung: {'Ja' if config.get('lanczos.rebiorth') else 'Nein'}")

    click.echo("\n" + "=" * 50)
    click.echo("EXPERIMENTE")
    click.echo("=" * 50)
    presets = config.get('experiments.presets', {}) or {}
    rows = [[name, preset.get('generator', preset.get('matrix', '?')), preset.get('poles_k'),
             preset.get('poles_l'), preset.get('n')]
            for name, preset in presets.items()]
    click.echo(tabulate(rows, headers=["Preset", "Quelle", "Pole K", "Pole L", "n"], tablefmt="grid"))
    click.echo(f"\nAusgabeverzeichnis: {config.get('output.directory')}")
    click.echo(f"Log-Datei: {config.get('logging.file')} (Level {config.get('logging.level')})")


@click.command('create-config')
@click.pass_context
def create_config(ctx):
    """Erstellt eine Benutzer-Konfigurationsvorlage."""

    config = ctx.obj['config']

    try:
        if config.create_user_config_template():
            click.echo("✓ Benutzer-Konfigurationsvorlage erstellt")
        else:
            click.echo("Benutzer-Konfiguration existiert bereits")
        click.echo(f"Pfad: {config.user_config_path}")

    except Exception as e:
        click.echo(f"Fehler beim Erstellen der Konfiguration: {e}", err=True)
        sys.exit(1)


@click.command('set-config')
@click.argument('key')
@click.argument('value')
@click.pass_context
def set_config(ctx, key: str, value: str):
    """Setzt einen Wert in der Benutzer-Konfiguration, z.B. 'lanczos.rebiorth true'."""

    config = ctx.obj['config']
    logger = logging.getLogger(__name__)

    try:
        parsed = yaml.safe_load(value)
    except yaml.YAMLError:
        parsed = value

    if config.update(key, parsed):
        click.echo(f"✓ {key} = {parsed!r}")
    else:
        logger.error(f"Konfiguration {key} nicht gesetzt")
        click.echo(f"Fehler: {key} konnte nicht gesetzt werden", err=True)
        sys.exit(1)

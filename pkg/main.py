"""
ratkrylov - Entry Point

Haupteinstiegspunkt für das Kommandozeilenwerkzeug.
Alle CLI-Kommandos sind in separate Module ausgelagert.
"""

from src.cli.base import cli
from src.cli.krylov_commands import arnoldi, lanczos, ritz, oracle_check
from src.cli.experiment_commands import reproduce, experiment, selftest
from src.cli.config_commands import config_info, create_config, set_config


# Registriere alle Kommandos (auch für den console_script-Einstieg main:cli)
cli.add_command(arnoldi)
cli.add_command(lanczos)
cli.add_command(ritz)
cli.add_command(oracle_check)
cli.add_command(reproduce)
cli.add_command(experiment)
cli.add_command(selftest)
cli.add_command(config_info)
cli.add_command(create_config)
cli.add_command(set_config)


def main():
    """Haupteinstiegspunkt für das ratkrylov CLI."""
    cli()


if __name__ == "__main__":
    main()

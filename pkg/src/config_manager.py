"""
Configuration Manager für ratkrylov

Standardwerte aus config/default_config.yaml, darüber die Benutzerdatei.
Toleranzen, Experiment-Presets, Ausgabe und Logging werden beim Laden geprüft.
"""

import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import yaml

from .exceptions import ConfigValidationError

logger = logging.getLogger(__name__)

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')
PRESET_KEYS = ('poles_k', 'poles_l', 'n')

USER_TEMPLATE = """# ratkrylov - Benutzer Konfiguration
# Einträge auskommentieren und anpassen; alles andere kommt aus default_config.yaml

# tolerances:
#   structure: 1.0e-7
#   breakdown_lanczos: 1.0e-12

# lanczos:
#   rebiorth: false

# experiments:
#   defaults:
#     seed: 7

# logging:
#   level: "DEBUG"
#   console_output: true
"""


def _deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Verschachtelte Abschnitte werden zusammengeführt, alles andere ersetzt."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            value = _deep_merge(merged[key], value)
        merged[key] = value
    return merged


class ConfigManager:
    """Verwaltet die Konfiguration von ratkrylov."""

    REQUIRED_SECTIONS = ('tolerances', 'arnoldi', 'lanczos', 'experiments', 'output', 'logging')

    def __init__(self, config_path: Optional[str] = None, setup_logging: bool = True):
        """
        Args:
            config_path: Benutzerdatei; Standard ist config/user_config.yaml
            setup_logging: Root-Logger gemäß Abschnitt 'logging' einrichten
        """
        self.project_root = Path(__file__).parent.parent
        self.default_config_path = self.project_root / "config" / "default_config.yaml"
        self.user_config_path = (Path(config_path) if config_path
                                 else self.project_root / "config" / "user_config.yaml")

        self.config = self._load_config()
        if setup_logging:
            self._setup_logging()

    def _load_config(self) -> Dict[str, Any]:
        defaults = self._read_yaml(self.default_config_path)
        if self.user_config_path.exists():
            user = self._read_yaml(self.user_config_path)
        else:
            logger.debug(f"Keine Benutzer-Konfiguration unter {self.user_config_path}, nur Standardwerte")
            user = {}

        config = _deep_merge(defaults, user)
        self._validate_config(config)
        return config

    @staticmethod
    def _read_yaml(path: Path) -> Dict[str, Any]:
        """
        Raises:
            FileNotFoundError: Datei fehlt
            yaml.YAMLError: Datei ist kein gültiges YAML
        """
        if not path.is_file():
            raise FileNotFoundError(f"Konfigurationsdatei nicht gefunden: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding='utf-8'))
        except yaml.YAMLError as e:
            raise yaml.YAMLError(f"{path} ist kein gültiges YAML: {e}")
        if data is not None and not isinstance(data, dict):
            raise ConfigValidationError(f"{path}: oberste Ebene muss ein Mapping sein")
        return data or {}

    def _validate_config(self, config: Dict[str, Any]) -> None:
        """
        Raises:
            ConfigValidationError: Abschnitt fehlt, Toleranz nicht positiv,
                Preset unvollständig oder Log-Level unbekannt
        """
        missing = [s for s in self.REQUIRED_SECTIONS if s not in config]
        if missing:
            raise ConfigValidationError(f"Erforderliche Konfigurationsabschnitte fehlen: {missing}")

        for name, value in config['tolerances'].items():
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ConfigValidationError(f"Toleranz {name} ist keine Zahl: {value!r}")
            if not value > 0:
                raise ConfigValidationError(f"Toleranz {name} muss positiv sein (ist {value})")

        for name, preset in (config['experiments'].get('presets') or {}).items():
            absent = [key for key in PRESET_KEYS if key not in preset]
            if absent:
                raise ConfigValidationError(f"Preset {name} ohne Einträge {absent}")
            if 'generator' not in preset and 'matrix' not in preset:
                raise ConfigValidationError(f"Preset {name} braucht 'generator' oder 'matrix'")

        level = config['logging'].get('level', 'INFO')
        if level not in LOG_LEVELS:
            raise ConfigValidationError(f"Ungültiger Log-Level: {level}. Erlaubt: {list(LOG_LEVELS)}")

    def _setup_logging(self) -> None:
        """Datei-Handler (rotierend) und optional Konsole am Root-Logger."""
        log_config = self.config['logging']
        log_file = self.project_root / log_config['file']
        log_file.parent.mkdir(parents=True, exist_ok=True)

        formatter = logging.Formatter(' %(asctime)s - %(name)s - %(levelname)s - %(message)s')
        root = logging.getLogger()
        root.setLevel(getattr(logging, log_config['level']))

        # Nur eigene Handler ersetzen, fremde (z.B. pytest caplog) bleiben
        for handler in [h for h in root.handlers if getattr(h, '_ratkrylov', False)]:
            root.removeHandler(handler)

        handlers = [RotatingFileHandler(
            log_file,
            maxBytes=int(log_config.get('max_file_size', 10)) * 1024 * 1024,
            backupCount=int(log_config.get('backup_count', 5)),
            encoding='utf-8',
        )]
        if log_config.get('console_output', False):
            handlers.append(logging.StreamHandler())
        for handler in handlers:
            handler.setFormatter(formatter)
            handler._ratkrylov = True
            root.addHandler(handler)

    def get(self, key: str, default: Any = None) -> Any:
        """
        Wert über einen gepunkteten Schlüssel, z.B. 'tolerances.rank'.

        Returns:
            Gefundener Wert oder default
        """
        node: Any = self.config
        for part in key.split('.'):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def tolerance(self, name: str) -> float:
        """
        Raises:
            KeyError: Unbekannte Toleranz
        """
        value = self.get(f'tolerances.{name}')
        if value is None:
            raise KeyError(f"Unbekannte Toleranz: {name}")
        return float(value)

    def get_preset(self, name: str) -> Dict[str, Any]:
        """
        Experiment-Preset, ergänzt um experiments.defaults.

        Raises:
            KeyError: Preset existiert nicht
        """
        presets = self.get('experiments.presets') or {}
        if name not in presets:
            raise KeyError(f"Unbekanntes Preset: {name}. Verfügbar: {sorted(presets)}")
        return {**(self.get('experiments.defaults') or {}), **presets[name]}

    def create_user_config_template(self) -> bool:
        """
        Legt eine auskommentierte Benutzerdatei an.

        Returns:
            False, wenn bereits eine Datei existiert
        """
        if self.user_config_path.exists():
            logger.info(f"Benutzer-Konfiguration existiert bereits: {self.user_config_path}")
            return False

        self.user_config_path.parent.mkdir(parents=True, exist_ok=True)
        self.user_config_path.write_text(USER_TEMPLATE, encoding='utf-8')
        logger.info(f"Benutzer-Konfigurationsvorlage erstellt: {self.user_config_path}")
        return True

    def update(self, key: str, value: Any) -> bool:
        """
        Schreibt einen Wert in die Benutzerdatei und lädt neu.

        Ein Wert, der die Validierung nicht besteht, wird zurückgenommen:
        die vorherige Datei bleibt unverändert bzw. wird nicht angelegt.

        Returns:
            True bei Erfolg
        """
        previous = None
        try:
            user: Dict[str, Any] = {}
            if self.user_config_path.exists():
                previous = self.user_config_path.read_text(encoding='utf-8')
                user = self._read_yaml(self.user_config_path)

            *parents, leaf = key.split('.')
            section = user
            for part in parents:
                section = section.setdefault(part, {})
            section[leaf] = value

            self.user_config_path.parent.mkdir(parents=True, exist_ok=True)
            self.user_config_path.write_text(
                yaml.safe_dump(user, default_flow_style=False, allow_unicode=True, indent=2),
                encoding='utf-8',
            )
            self.config = self._load_config()
            return True

        except ConfigValidationError as e:
            if previous is None:
                self.user_config_path.unlink(missing_ok=True)
            else:
                self.user_config_path.write_text(previous, encoding='utf-8')
            logger.error(f"Ungültiger Wert für {key}: {e}")
            return False
        except (OSError, TypeError, yaml.YAMLError) as e:
            logger.error(f"Fehler beim Aktualisieren der Konfiguration: {e}")
            return False


_config_instance: Optional[ConfigManager] = None


def get_config(config_path: Optional[str] = None) -> ConfigManager:
    """Globale Instanz; wird beim ersten Aufruf erzeugt."""
    global _config_instance
    if _config_instance is None:
        _config_instance = ConfigManager(config_path)
    return _config_instance


def reload_config(config_path: Optional[str] = None) -> ConfigManager:
    """Ersetzt die globale Instanz durch eine frisch geladene."""
    global _config_instance
    _config_instance = ConfigManager(config_path)
    return _config_instance

"""Configuration management for undernewton.

Defaults live in an INI file under ``~/.undernewton`` (or ``$UNDERNEWTON_HOME``).
"""
import os
import configparser
from pathlib import Path
from typing import Any
import logging

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = """# ~/.undernewton/config.ini
# Underdetermined Newton solver configuration

[Solver]
# Norm used for the substep z (l1, l2 or linf)
domain_norm = l2
# Norm used for the residual u = ||P(x)|| (l1, l2 or linf)
image_norm = l2
# Default stopping tolerance is stop_tol_factor * max(1, u0)
stop_tol_factor = 1e-10
max_iter = 500
# Finite-difference step is fd_step_factor * max(1, ||x||_inf)
fd_step_factor = 1e-6

[Adaptive]
# beta <- q * beta after a rejected trial step
q = 0.5
# beta <- growth * beta after an accepted step (only with growth enabled)
growth = 2.0
max_inner = 200
armijo_factor = 0.5
armijo_slope = 0.25

[Simplex]
# Iteration cap is iteration_factor * (rows + cols)
iteration_factor = 50
feasibility_tol = 1e-8

[Bench]
n = 60
m = 21
beta0 = 5.0
max_iter = 5000

[Logging]
# Console log level: DEBUG, INFO, WARNING, ERROR
console_level = WARNING
# File log level (undernewton.log)
file_level = DEBUG
# Max log size in bytes before rotation (5MB)
log_max_bytes = 5242880
log_backup_count = 3
"""


def default_base_path() -> Path:
    """Directory holding config.ini and logs."""
    override = os.environ.get("UNDERNEWTON_HOME")
    if override:
        return Path(override).expanduser()
    return Path.home() / ".undernewton"


class ConfigManager:
    """Manages application configuration."""

    def __init__(self, base_path: Path | None = None):
        self.base_path = base_path or default_base_path()
        self.config_path = self.base_path / "config.ini"
        self.log_dir = self.base_path / "logs"
        self.config = configparser.ConfigParser()
        self.persistent = self._ensure_config_exists()
        self._load_config()

    def _ensure_config_exists(self) -> bool:
        """Create default config if it doesn't exist. Returns False when read-only."""
        try:
            self.base_path.mkdir(parents=True, exist_ok=True)
            if not self.config_path.exists():
                self.config_path.write_text(DEFAULT_CONFIG)
                os.chmod(self.config_path, 0o600)
                logger.info(f"Created default config at {self.config_path}")
            return True
        except OSError as e:
            logger.debug(f"Config directory unavailable ({e}); using built-in defaults")
            return False

    def _load_config(self):
        """Load configuration, layering the file over the built-in defaults."""
        self.config.read_string(DEFAULT_CONFIG)
        if self.persistent:
            self.config.read(self.config_path)

    def get(self, section: str, key: str, fallback: Any = None) -> Any:
        """Get configuration value."""
        try:
            value = self.config.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            return fallback
        if value.lower() in ('true', 'false'):
            return value.lower() == 'true'
        try:
            return int(value)
        except ValueError:
            pass
        try:
            return float(value)
        except ValueError:
            return value

    def set(self, section: str, key: str, value: str):
        """Set configuration value and save."""
        if not self.config.has_section(section):
            self.config.add_section(section)
        self.config.set(section, key, str(value))
        if not self.persistent:
            return
        with open(self.config_path, 'w') as f:
            self.config.write(f)
        os.chmod(self.config_path, 0o600)


# Global config instance
config = ConfigManager()

"""Settings read from the environment (and an optional .env file)."""

import logging
import os
from dataclasses import dataclass

from dotenv import load_dotenv

from controllability_tools.errors import ConfigError
from controllability_tools.structmat import DEFAULT_PRIME, FieldConfig

DEFAULT_Z_COUNT = 20


@dataclass(frozen=True)
class Settings:
    seed: int = 0
    prime: int = DEFAULT_PRIME
    trials: int = 3
    z_count: int = DEFAULT_Z_COUNT
    log_level: str = "WARNING"

    def field_config(self, seed=None):
        """
        Builds the FieldConfig used for generic-rank computations.

        Args:
            seed (int, optional): Overrides the configured seed.

        Returns:
            FieldConfig: Prime, trial count and seed for substitutions.
        """
        return FieldConfig(
            prime=self.prime,
            trials=self.trials,
            seed=self.seed if seed is None else seed,
        )


def _int_setting(name, default):
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from exc


def load_settings(dotenv_path=None):
    """
    Loads settings from MATCTL_* environment variables.

    Args:
        dotenv_path (str, optional): Explicit .env file; by default the
                                     nearest .env is searched for.

    Returns:
        Settings: Validated settings.
    """
    load_dotenv(dotenv_path)
    log_level = os.environ.get("MATCTL_LOG_LEVEL", "WARNING").upper()
    if log_level not in logging.getLevelNamesMapping():
        raise ConfigError(f"MATCTL_LOG_LEVEL {log_level!r} is not a logging level")

    settings = Settings(
        seed=_int_setting("MATCTL_SEED", 0),
        prime=_int_setting("MATCTL_PRIME", DEFAULT_PRIME),
        trials=_int_setting("MATCTL_TRIALS", 3),
        z_count=_int_setting("MATCTL_Z_COUNT", DEFAULT_Z_COUNT),
        log_level=log_level,
    )
    if settings.seed < 0:
        raise ConfigError("MATCTL_SEED must be non-negative")
    if settings.z_count < 0:
        raise ConfigError("MATCTL_Z_COUNT must be non-negative")
    try:
        settings.field_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return settings

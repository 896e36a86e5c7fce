"""Config-driven experiment runner."""
from slflab.cli.config import config_hash, load_config, validate
from slflab.cli.main import RunManifest, main, run

__all__ = ["RunManifest", "config_hash", "load_config", "main", "run", "validate"]

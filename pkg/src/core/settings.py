"""
Settings Loader

Reads tool defaults from config/config.yaml and the environment (.env supported).
Library code calls get_settings(); the CLI may point load_settings() at another file.
"""

from copy import deepcopy
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional
import logging
import os

import yaml
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).parent.parent.parent
DEFAULT_CONFIG_PATH = PROJECT_ROOT / "config" / "config.yaml"
SEED_ENV_VAR = "RUINSIM_SEED"

# Used when config.yaml is missing or incomplete
BUILTIN_DEFAULTS: Dict[str, Any] = {
    'simulation': {
        'batch_size': 20000,
        'surplus_batch_size': 2000,
        'workers': 1,
        'max_arrivals_block': 64,
    },
    'mean_measure': {
        'nodes': 512,
        'paths': 100000,
        'horizon_padding': 1.0,
    },
    'quadrature': {
        'epsabs': 1e-12,
        'epsrel': 1e-8,
        'limit': 200,
        'infinite_cut_ratio': 1e-16,
        'max_chunks': 10000,
    },
    'estimators': {
        'min_hits': 20,
        'wilson_below_hits': 100,
        'z': 1.959963984540054,
        'min_paths': 1000,
        'min_paths_decomposition': 10000,
    },
    'truncation': {
        'default_count': 200,
        'max_count': 20000,
        'remainder_fraction': 0.01,
    },
    'output': {
        'base_directory': 'output',
        'report_file': 'report.csv',
        'summary_file': 'summary.txt',
        'meta_file': 'meta.json',
        'asymptotic_file': 'asymptotic.csv',
    },
}


def _merge(base: Dict, override: Dict) -> Dict:
    """Recursively merge override into a copy of base"""
    merged = deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_settings(config_path: Optional[Path] = None) -> Dict:
    """
    Load settings from YAML on top of the built-in defaults.

    Args:
        config_path: Path to a config.yaml (defaults to config/config.yaml)

    Returns:
        Settings dict
    """
    path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
    load_dotenv()

    if not path.exists():
        logger.debug("No settings file at %s, using built-in defaults", path)
        return deepcopy(BUILTIN_DEFAULTS)

    with open(path, 'r') as f:
        loaded = yaml.safe_load(f) or {}

    return _merge(BUILTIN_DEFAULTS, loaded)


@lru_cache(maxsize=1)
def get_settings() -> Dict:
    """Settings from the default location, loaded once per process"""
    return load_settings()


def resolve_seed(config_seed: int) -> int:
    """Seed from RUINSIM_SEED if set, else the config seed"""
    load_dotenv()
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or not raw.strip():
        return int(config_seed)
    try:
        seed = int(raw)
    except ValueError:
        raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")
    logger.info("Seed overridden by %s=%d", SEED_ENV_VAR, seed)
    return seed

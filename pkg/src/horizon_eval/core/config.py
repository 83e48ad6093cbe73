"""
Configuration management for horizon-eval.
Loads settings from ~/.horizon-eval/config.toml (or $HORIZON_EVAL_CONFIG).
"""

import copy
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from horizon_eval.core.errors import ConfigError

log = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    "evaluation": {
        "iou_threshold": 0.5,
        "horizons": "default",
        "gt_classes": [1],
        "min_visibility": 0.0,
        "score_threshold": 0.0,   # a number, or "auto"
        "filter_pred_classes": False,
        "fps": 30.0,              # used when no seqinfo.ini and no --fps
    },
    "output": {
        "format": "json",
        "decimals": 6,
    },
    "runtime": {
        "jobs": 1,
        "log_level": "WARNING",
    },
}

CONFIG_PATH = Path.home() / ".horizon-eval" / "config.toml"
HORIZONS_FILE = Path(__file__).parent / "horizons.yaml"


def config_path() -> Path:
    env = os.environ.get("HORIZON_EVAL_CONFIG")
    return Path(env) if env else CONFIG_PATH


def load_config(path: Optional[Path] = None) -> Dict[str, Any]:
    """Load config from file, return merged with defaults."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    path = path or config_path()
    if path.exists():
        try:
            with open(path, "rb") as f:
                user_config = tomllib.load(f)
            # Section-wise merge
            for section, values in user_config.items():
                if section in config and isinstance(values, dict):
                    config[section].update(values)
                else:
                    config[section] = values
        except (tomllib.TOMLDecodeError, OSError) as e:
            log.warning("Could not parse config file %s: %s", path, e)
    _validate(config)
    return config


def _validate(config: Dict[str, Any]) -> None:
    iou = config["evaluation"]["iou_threshold"]
    if not (isinstance(iou, (int, float)) and 0 < iou <= 1):
        raise ConfigError(f"evaluation.iou_threshold must be in (0, 1], got {iou!r}")
    thr = config["evaluation"]["score_threshold"]
    per_class = isinstance(thr, dict) and all(isinstance(v, (int, float)) for v in thr.values())
    if not (thr == "auto" or isinstance(thr, (int, float)) or per_class):
        raise ConfigError(f"evaluation.score_threshold must be a number, 'auto' or a class table, got {thr!r}")
    jobs = config["runtime"]["jobs"]
    if not (isinstance(jobs, int) and jobs >= 1):
        raise ConfigError(f"runtime.jobs must be a positive integer, got {jobs!r}")


def get_config(path: Optional[Path] = None) -> Dict[str, Any]:
    """Load once and cache."""
    if not hasattr(get_config, "_cache") or path is not None:
        get_config._cache = load_config(path)
    return get_config._cache


def reset_config() -> None:
    if hasattr(get_config, "_cache"):
        del get_config._cache


def _profiles() -> Dict[str, Dict[str, Any]]:
    try:
        with open(HORIZONS_FILE, "r") as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read horizon profiles {HORIZONS_FILE}: {e}") from e
    profiles = data.get("profiles") if isinstance(data, dict) else None
    if not isinstance(profiles, dict) or not profiles:
        raise ConfigError(f"{HORIZONS_FILE} defines no profiles")
    return profiles


def load_horizon_profiles() -> Dict[str, List[str]]:
    """Named horizon lists from horizons.yaml."""
    return {name: [str(h) for h in info["horizons"]] for name, info in _profiles().items()}


def horizon_profile_descriptions() -> Dict[str, str]:
    return {name: info.get("desc", "") for name, info in _profiles().items()}

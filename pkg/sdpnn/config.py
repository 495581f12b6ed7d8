"""Repository configuration: ``config.json`` merged over built-in defaults.

Environment overrides:
  SDPNN_CONFIG      path of an alternate config file
  SDPNN_CACHE_DIR   dataset cache directory
"""

import copy
import json
import os
from pathlib import Path

from .errors import ConfigError
from .logger import get_logger

log = get_logger(__name__)

ROOT = Path(__file__).resolve().parent.parent
CONFIG_FILE = ROOT / "config.json"

DEFAULTS = {
    "logging": {"level": "INFO", "color": True, "dir": "logs"},
    "solver": {
        "max_iters": 20000,
        "eps_abs": 1e-6,
        "eps_rel": 1e-5,
        "penalty_rho": 1.0,
        "adaptive_rho": True,
        "over_relaxation": 1.6,
        "log_every": 100,
        "max_inner_iters": 500,
        "adapt_every": 25,
    },
    "rounding": {"R": 300, "iters": 1000, "step_eta": "auto",
                 "tie_break": "keep_alpha"},
    "sgd": {"lr": 1e-3, "iters": 8000, "batch": "full", "seed": 0,
            "init_scale": 1.0, "restarts": 5, "width": 300},
    "data": {"cache_dir": "cache", "split_seed": 0},
    "datasets": {},
    "output": {"dir": "runs"},
}


def merge(base, override):
    """Recursive dict merge; keys from ``override`` win."""
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None):
    path = Path(path or os.environ.get("SDPNN_CONFIG") or CONFIG_FILE)
    user = {}
    if path.exists():
        try:
            user = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(str(path), f"invalid JSON ({e})") from e
    else:
        log.debug(f"No config at {path}, using defaults")
    cfg = merge(DEFAULTS, user)
    cache = os.environ.get("SDPNN_CACHE_DIR")
    if cache:
        cfg["data"]["cache_dir"] = cache
    return cfg


def resolve_path(value, root=ROOT):
    p = Path(value).expanduser()
    return p if p.is_absolute() else root / p

"""
Configuration loading.

Solver defaults can be overridden in an INI file (instance/unmix.conf by
default, or the path in SIMPLEX_UNMIX_CONFIG). Every key is optional: a
missing file or key falls back to the dataclass default. CLI flags and bench
grid entries override the INI values.
"""

import configparser
import logging
import os
from dataclasses import fields, replace
from typing import Any, Dict, Optional

from .errors import ConfigError
from .models import AdmmConfig, H2Config, InitConfig, PrConfig, SisalConfig

logger = logging.getLogger(__name__)

INSTANCE_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'instance')
DEFAULT_CONFIG_PATH = os.path.join(INSTANCE_PATH, 'unmix.conf')

# keys people write that are not valid Python field names
ALIASES = {'lambda': 'lam'}


def load_config(path: Optional[str] = None) -> configparser.RawConfigParser:
    """Read the INI file; an absent file yields an empty parser."""
    path = path or os.environ.get('SIMPLEX_UNMIX_CONFIG') or DEFAULT_CONFIG_PATH
    # RawConfigParser so '%' in values is taken literally
    config = configparser.RawConfigParser()
    read = config.read(path)
    if read:
        logger.debug(f"Loaded configuration from {path}")
    return config


def _coerce(value: Any, default: Any, key: str):
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered in ('1', 'true', 'yes', 'on'):
                    return True
                if lowered in ('0', 'false', 'no', 'off'):
                    return False
                raise ValueError(value)
            return bool(value)
        if isinstance(default, int):
            return int(float(value)) if isinstance(value, str) else int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {key}: {value!r}")


def _section_values(config: Optional[configparser.RawConfigParser], section: str, cls) -> Dict[str, Any]:
    values = {}
    if config is None or not config.has_section(section):
        return values
    defaults = cls()
    spelled = {field_name: key for key, field_name in ALIASES.items()}
    for f in fields(cls):
        if f.name == 'admm':
            continue
        for option in (f.name, spelled.get(f.name)):
            if option and config.has_option(section, option):
                values[f.name] = _coerce(config.get(section, option), getattr(defaults, f.name),
                                         f"[{section}] {option}")
    return values


def _apply(base, overrides: Optional[Dict[str, Any]], context: str):
    if not overrides:
        return base
    known = {f.name for f in fields(base)}
    changes = {}
    for key, value in overrides.items():
        key = ALIASES.get(key, key)
        if key not in known:
            raise ConfigError(f"unknown {context} option {key!r}")
        if value is None:
            continue
        changes[key] = _coerce(value, getattr(base, key), key)
    return replace(base, **changes)


def sisal_config(config=None, overrides: Optional[Dict[str, Any]] = None) -> SisalConfig:
    overrides = dict(overrides or {})
    admm_overrides = overrides.pop('admm', None) or {}
    for key in list(overrides):
        if key.startswith('admm_'):
            admm_overrides[key[len('admm_'):]] = overrides.pop(key)
    admm = AdmmConfig(**_section_values(config, 'admm', AdmmConfig))
    admm = _apply(admm, admm_overrides, 'admm')
    base = replace(SisalConfig(**_section_values(config, 'sisal', SisalConfig)), admm=admm)
    return _apply(base, overrides, 'sisal').validate()


def h2_config(config=None, overrides: Optional[Dict[str, Any]] = None) -> H2Config:
    base = H2Config(**_section_values(config, 'h2sisal', H2Config))
    return _apply(base, overrides, 'h2sisal').validate()


def pr_config(config=None, overrides: Optional[Dict[str, Any]] = None) -> PrConfig:
    base = PrConfig(**_section_values(config, 'prsisal', PrConfig))
    return _apply(base, overrides, 'prsisal').validate()


def init_config(config=None, overrides: Optional[Dict[str, Any]] = None) -> InitConfig:
    base = InitConfig(**_section_values(config, 'init', InitConfig))
    return _apply(base, overrides, 'init').validate()


def worker_cap() -> Optional[int]:
    """Pool size ceiling from SIMPLEX_UNMIX_THREADS, None when unset."""
    raw = os.environ.get('SIMPLEX_UNMIX_THREADS')
    if not raw:
        return None
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"SIMPLEX_UNMIX_THREADS must be an integer, got {raw!r}")
    if cap < 1:
        raise ConfigError(f"SIMPLEX_UNMIX_THREADS must be >= 1, got {cap}")
    return cap


def bench_defaults(config=None) -> Dict[str, Any]:
    if config is None:
        return {'parallel': 1, 'seed_base': 0}
    return {
        'parallel': config.getint('bench', 'parallel', fallback=1),
        'seed_base': config.getint('bench', 'seed_base', fallback=0),
    }


def logging_settings(config=None) -> Dict[str, Any]:
    if config is None:
        return {'level': 'WARNING', 'remote_batch_size': 10, 'remote_flush_interval': 5}
    return {
        'level': config.get('logging', 'level', fallback='WARNING'),
        'remote_batch_size': config.getint('logging', 'remote_batch_size', fallback=10),
        'remote_flush_interval': config.getint('logging', 'remote_flush_interval', fallback=5),
    }

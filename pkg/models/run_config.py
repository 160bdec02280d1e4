"""
Run configuration shared by every experiment command.
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from config import (
    ALPHA_SAMPLES, DEFAULT_DMIN, DEFAULT_EPS_S, DEFAULT_KERNEL, DEFAULT_MI, DEFAULT_OUTPUT_DIR,
    DEFAULT_POLY, DEFAULT_WORKERS, HHD_ITERATIONS, LOG_LEVEL, MIN_SUPPORTED_EPS_S,
    STABILITY_DMIN_GRID, STABILITY_EPS_GRID,
)
from exceptions import ConfigError
from kernels import KernelSpec

logger = logging.getLogger(__name__)

MODES = ('none', 'select', 'project', 'both')
DOMAINS = ('test', 'disk')
ARRANGEMENT_NAMES = ('hex3', 'hex5', 'hex12', 'hex15')
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


@dataclass
class RunConfig:
    """Every knob of an experiment run; spacing None means the command's default."""

    kernel: str = DEFAULT_KERNEL
    eps_s: float = DEFAULT_EPS_S
    poly: int = DEFAULT_POLY
    mi: int = DEFAULT_MI
    dmin: float = DEFAULT_DMIN
    spacing: Optional[float] = None
    domain: str = 'test'
    mode: str = 'both'
    out: str = DEFAULT_OUTPUT_DIR
    seed: int = 0
    workers: int = DEFAULT_WORKERS
    alpha_samples: int = ALPHA_SAMPLES
    n_iter: int = HHD_ITERATIONS
    perturb: float = 0.0
    arrangement: str = 'hex15'
    allow_small_eps: bool = False
    skip_singular: bool = False
    log_level: str = LOG_LEVEL
    eps_grid: Tuple[float, ...] = field(default_factory=lambda: tuple(STABILITY_EPS_GRID))
    dmin_grid: Tuple[float, ...] = field(default_factory=lambda: tuple(STABILITY_DMIN_GRID))

    def __post_init__(self):
        self.eps_grid = tuple(float(v) for v in self.eps_grid)
        self.dmin_grid = tuple(float(v) for v in self.dmin_grid)
        self.mode = str(self.mode).lower()
        self.domain = str(self.domain).lower()
        self.log_level = str(self.log_level).upper()

    def kernel_spec(self, spacing: float) -> KernelSpec:
        return KernelSpec.from_name(self.kernel, self.eps_s, spacing)

    def validate(self) -> 'RunConfig':
        """Check every value against what the numerical modules accept."""
        try:
            KernelSpec.from_name(self.kernel, max(self.eps_s, 1e-300), 1.0)
        except ValueError as exc:
            raise ConfigError(f"kernel: {exc}") from exc
        if not self.eps_s > 0:
            raise ConfigError(f"eps_s must be positive, got {self.eps_s}")
        if self.eps_s < MIN_SUPPORTED_EPS_S:
            if not self.allow_small_eps:
                raise ConfigError(
                    f"eps_s={self.eps_s} is below {MIN_SUPPORTED_EPS_S}; "
                    "pass --allow-small-eps to run it in double precision anyway"
                )
            logger.warning("eps_s=%g: double precision loses accuracy this flat", self.eps_s)
        if self.poly < -1:
            raise ConfigError(f"poly must be -1 (none) or a degree >= 0, got {self.poly}")
        if self.mi < 1:
            raise ConfigError(f"mi must be positive, got {self.mi}")
        for value in (self.dmin,) + self.dmin_grid:
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"d_min must lie in [0, 1], got {value}")
        if any(v <= 0 for v in self.eps_grid):
            raise ConfigError("eps_grid values must be positive")
        if self.spacing is not None and not self.spacing > 0:
            raise ConfigError(f"spacing must be positive, got {self.spacing}")
        if self.domain not in DOMAINS:
            raise ConfigError(f"domain must be one of {DOMAINS}, got '{self.domain}'")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got '{self.mode}'")
        if self.arrangement not in ARRANGEMENT_NAMES:
            raise ConfigError(f"arrangement must be one of {ARRANGEMENT_NAMES}, got '{self.arrangement}'")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.alpha_samples < 2:
            raise ConfigError(f"alpha_samples must be at least 2, got {self.alpha_samples}")
        if self.n_iter < 1:
            raise ConfigError(f"n_iter must be at least 1, got {self.n_iter}")
        if self.perturb < 0:
            raise ConfigError(f"perturb must be non-negative, got {self.perturb}")
        if self.log_level not in LOG_LEVELS:
            raise ConfigError(f"log_level must be one of {LOG_LEVELS}, got '{self.log_level}'")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['eps_grid'] = list(self.eps_grid)
        data['dmin_grid'] = list(self.dmin_grid)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """Build from a mapping; None values fall back to defaults, unknown keys are an error."""
        known = {f.name for f in fields(cls)}
        cleaned = {}
        for key, value in data.items():
            name = key.replace('-', '_')
            if name not in known:
                raise ConfigError(f"unknown configuration key '{key}'")
            if value is None and name != 'spacing':
                continue
            cleaned[name] = value
        try:
            return cls(**cleaned)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str, overrides: Optional[Dict[str, Any]] = None) -> 'RunConfig':
        """Read `key = value` lines; values in `overrides` win over the file."""
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        data: Dict[str, Any] = {}
        for number, line in enumerate(path.read_text().splitlines(), start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f"{path}:{number}: expected 'key = value'")
            key, value = (part.strip() for part in line.split('=', 1))
            data[key.replace('-', '_')] = _parse_value(key.replace('-', '_'), value, path, number)
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(data)


_TYPES = {
    'eps_s': float, 'dmin': float, 'spacing': float, 'perturb': float,
    'poly': int, 'mi': int, 'seed': int, 'workers': int, 'alpha_samples': int, 'n_iter': int,
}
_FLAGS = ('allow_small_eps', 'skip_singular')
_GRIDS = ('eps_grid', 'dmin_grid')


def _parse_value(key: str, text: str, path: Path, number: int) -> Any:
    try:
        if key in _TYPES:
            return _TYPES[key](text)
        if key in _FLAGS:
            lowered = text.lower()
            if lowered not in ('true', 'false', 'yes', 'no', '1', '0'):
                raise ValueError(f"not a boolean: '{text}'")
            return lowered in ('true', 'yes', '1')
        if key in _GRIDS:
            return tuple(float(v) for v in text.split(',') if v.strip())
    except ValueError as exc:
        raise ConfigError(f"{path}:{number}: {key}: {exc}") from exc
    return text

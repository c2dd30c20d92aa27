"""TOML experiment configuration with strict key checking.

Example::

    seed = 0

    [structure]
    family = "pushforward_bump"
    n = 2
    params = { delta = 0.01 }

    [grid]
    R = 8.0
    N = 129

    [norms]
    gamma = 0.5
    p = 1.5
    epsilon0 = 0.5
    theta = 2.0

    [solver]
    max_iter = 60
    tol_fixed_point = 1e-12
    tol_residual = 1e-4
    admissibility_lambda = 0.05

    [output]
    directory = "runs/bump"
    formats = ["json", "csv", "bin"]
"""

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field

import tomli

from .grid import NormParams
from .structures import GALLERY


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


SCHEMA = {
    "seed": int,
    "structure": {"family": str, "n": int, "params": dict},
    "grid": {"R": float, "N": int},
    "norms": {"gamma": float, "p": float, "epsilon0": float, "theta": float},
    "solver": {
        "max_iter": int,
        "tol_fixed_point": float,
        "tol_residual": float,
        "admissibility_lambda": float,
        "quadrature": str,
    },
    "output": {"directory": str, "formats": list},
    "decay": {"K": int, "radii": list, "directions": int},
    "levi": {"radii": list, "directions": int},
    "cover": {"R": float, "N": int, "tol": float, "max_steps": int},
    "disc": {"N": int},
    "foliate": {"lattice": int, "spacing": float, "N": int},
    "dilate": {"epsilons": list},
}

FORMATS = ("json", "csv", "bin")


@dataclass
class StructureConfig:
    family: str = "standard"
    n: int = 2
    params: dict = field(default_factory=dict)


@dataclass
class GridConfig:
    R: float = 8.0
    N: int = 129


@dataclass
class SolverConfig:
    max_iter: int = 60
    tol_fixed_point: float = 1e-12
    tol_residual: float = 1e-4
    admissibility_lambda: float = 0.05
    quadrature: str = "fft"


@dataclass
class OutputConfig:
    directory: str = "runs/default"
    formats: list = field(default_factory=lambda: list(FORMATS))


@dataclass
class DecayConfig:
    K: int = 2
    radii: list = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 4.0, 8.0])
    directions: int = 64


@dataclass
class LeviConfig:
    radii: list = field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0])
    directions: int = 250


@dataclass
class CoverConfig:
    R: float = 20.0
    N: int = 257
    tol: float = 1e-4
    max_steps: int = 20


@dataclass
class DiscConfig:
    N: int = 129


@dataclass
class FoliateConfig:
    lattice: int = 5
    spacing: float = 0.3
    N: int = 65


@dataclass
class DilateConfig:
    epsilons: list = field(default_factory=lambda: [1.0, 0.5, 0.1])


@dataclass
class ExperimentConfig:
    structure: StructureConfig = field(default_factory=StructureConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    norms: NormParams = field(default_factory=NormParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    decay: DecayConfig = field(default_factory=DecayConfig)
    levi: LeviConfig = field(default_factory=LeviConfig)
    cover: CoverConfig = field(default_factory=CoverConfig)
    disc: DiscConfig = field(default_factory=DiscConfig)
    foliate: FoliateConfig = field(default_factory=FoliateConfig)
    dilate: DilateConfig = field(default_factory=DilateConfig)
    seed: int = 0
    source: str = ""

    def to_dict(self):
        d = asdict(self)
        d.pop("source")
        return d

    def digest(self):
        """SHA-256 of the canonical JSON form of the effective configuration."""
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _check_type(path, value, kind):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigError(f"{path}: expected integer, got {value!r}")
    if not isinstance(value, kind):
        raise ConfigError(f"{path}: expected {kind.__name__}, got {type(value).__name__} {value!r}")
    return value


def _walk(raw, schema, prefix=""):
    out = {}
    for key, value in raw.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown key {path!r}")
        kind = schema[key]
        if isinstance(kind, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected a table")
            out[key] = _walk(value, kind, path + ".")
        else:
            out[key] = _check_type(path, value, kind)
    return out


def _build(section_cls, values, path):
    try:
        return section_cls(**values)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_config(text):
    """Parse and validate TOML text into an :class:`ExperimentConfig`."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from None
    data = _walk(raw, SCHEMA)
    cfg = ExperimentConfig(source=text)
    cfg.seed = data.get("seed", 0)
    sections = {
        "structure": StructureConfig,
        "grid": GridConfig,
        "norms": NormParams,
        "solver": SolverConfig,
        "output": OutputConfig,
        "decay": DecayConfig,
        "levi": LeviConfig,
        "cover": CoverConfig,
        "disc": DiscConfig,
        "foliate": FoliateConfig,
        "dilate": DilateConfig,
    }
    for name, cls in sections.items():
        if name in data:
            setattr(cfg, name, _build(cls, data[name], name))
    _validate(cfg)
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _validate(cfg):
    s = cfg.structure
    if s.family not in GALLERY:
        raise ConfigError(f"structure.family: unknown family {s.family!r}; known: {sorted(GALLERY)}")
    if s.n < 1:
        raise ConfigError("structure.n: n >= 1 required")
    if cfg.grid.N < 8:
        raise ConfigError("grid.N: N >= 8 required")
    if cfg.grid.R <= 0:
        raise ConfigError("grid.R: R > 0 required")
    if cfg.solver.max_iter < 1:
        raise ConfigError("solver.max_iter: at least 1 iteration required")
    if cfg.solver.quadrature not in ("direct", "fft"):
        raise ConfigError("solver.quadrature: one of 'direct', 'fft'")
    for key in ("tol_fixed_point", "tol_residual", "admissibility_lambda"):
        if getattr(cfg.solver, key) <= 0:
            raise ConfigError(f"solver.{key}: must be positive")
    bad = [f for f in cfg.output.formats if f not in FORMATS]
    if bad:
        raise ConfigError(f"output.formats: unknown formats {bad}; known: {list(FORMATS)}")
    if cfg.decay.K < 2:
        raise ConfigError("decay.K: K >= 2 required")
    if cfg.cover.N < 8 or cfg.cover.R <= 0:
        raise ConfigError("cover: N >= 8 and R > 0 required")
    if cfg.disc.N % 2 == 0 or cfg.foliate.N % 2 == 0:
        raise ConfigError("disc.N / foliate.N: disc grids need odd N so that zeta = 0 is a node")
    if cfg.foliate.lattice < 1 or cfg.foliate.spacing <= 0:
        raise ConfigError("foliate: lattice >= 1 and spacing > 0 required")
    for e in cfg.dilate.epsilons:
        if not 0 < e <= 1:
            raise ConfigError(f"dilate.epsilons: each epsilon in (0,1] required, got {e}")
    try:
        make_params = copy.deepcopy(s.params)
        GALLERY[s.family](n=s.n, **make_params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"structure.params: {exc}") from None

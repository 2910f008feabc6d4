"""Experiment configuration: YAML in, validated dataclasses out.

Validation errors carry the dotted path of the offending field, for example
``grids.eps_list[2]: must be nonzero``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..closed_form import EXAMPLES
from ..errors import ContractViolation
from ..inversion import BASES, METHODS, InversionConfig
from ..numerics import DEFAULT_INTERVALS_PER_UNIT, SpatialGrid
from ..potential import KINDS, CoefficientFunction, NonlinearPotential, epsilon_bound

DATA_SOURCES = ("cascade", "closed_form", "zero", "series")
ROUNDTRIP_ROUTES = ("contour", "real_axis")

_COEFF_PARAMS = {
    "zero": {},
    "constant": {"value": 0.0},
    "exponential": {"rate": 0.0, "amplitude": 1.0},
    "sinusoid": {"amplitude": 1.0, "frequency": 0.0},
}


class ConfigError(ContractViolation):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def _mapping(raw, path, allowed):
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a mapping")
    for key in raw:
        if key not in allowed:
            prefix = f"{path}." if path else ""
            raise ConfigError(f"{prefix}{key}", f"unknown key; allowed: {', '.join(sorted(allowed))}")
    return raw


def _number(raw, path, positive=False, nonneg=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(path, f"expected a number, got {raw!r}")
    value = float(raw)
    if not np.isfinite(value):
        raise ConfigError(path, "must be finite")
    if positive and value <= 0:
        raise ConfigError(path, "must be > 0")
    if nonneg and value < 0:
        raise ConfigError(path, "must be >= 0")
    return value


def _integer(raw, path, minimum=None):
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(path, f"expected an integer, got {raw!r}")
    if minimum is not None and raw < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return raw


def _choice(raw, path, options):
    if raw not in options:
        raise ConfigError(path, f"must be one of {', '.join(options)}; got {raw!r}")
    return raw


def _boolean(raw, path):
    if not isinstance(raw, bool):
        raise ConfigError(path, f"expected true/false, got {raw!r}")
    return raw


@dataclass(frozen=True)
class PotentialConfig:
    b: float = 1.0
    degree: int = 0
    coefficients: dict = field(default_factory=dict)

    def coefficient(self, n) -> CoefficientFunction:
        entry = self.coefficients.get(n)
        if entry is None:
            return CoefficientFunction.zero(self.b)
        params = dict(entry)
        kind = params.pop("kind")
        return CoefficientFunction(kind, self.b, **params)

    def build(self) -> NonlinearPotential:
        return NonlinearPotential(self.b, tuple(self.coefficient(n) for n in range(self.degree + 1)))


@dataclass(frozen=True)
class GridConfig:
    nx: int | None = None
    nx_per_unit: int = DEFAULT_INTERVALS_PER_UNIT
    k_min: float = 0.5
    k_max: float = 8.0
    k_count: int = 30
    eps_list: tuple | None = None
    r: float = 1.0

    def spatial(self, b) -> SpatialGrid:
        if self.nx is not None:
            return SpatialGrid(b, self.nx)
        return SpatialGrid.for_width(b, self.nx_per_unit)

    def k_grid(self) -> np.ndarray:
        return np.linspace(self.k_min, self.k_max, self.k_count)

    def eps_values(self, potential: NonlinearPotential) -> np.ndarray:
        """The configured list, or 5 log-spaced values in [delta/50, delta/5]."""
        if self.eps_list is not None:
            return np.array(self.eps_list, dtype=complex)
        delta = epsilon_bound(potential, self.r).delta
        return np.geomspace(delta / 50, delta / 5, 5).astype(complex)


@dataclass(frozen=True)
class InversionSettings:
    n_target: int = 3
    xi: float | str = "auto"
    M: int = 64
    method: str = "direct"
    use_F: bool = True
    basis: str = "chebyshev"
    n_basis: int = 20
    lam: float | None = None
    data: str = "cascade"
    series_file: str | None = None
    example: str = "constant_gamma"
    example_param: float = 1.0
    tolerance: float = 1e-2
    roundtrip_route: str = "contour"

    def inversion_config(self, k_real=None) -> InversionConfig:
        return InversionConfig(xi=self.xi, M=self.M, method=self.method, use_F=self.use_F,
                               basis=self.basis, n_basis=self.n_basis, lam=self.lam,
                               k_real=None if k_real is None else tuple(float(k) for k in k_real))


@dataclass(frozen=True)
class ExperimentConfig:
    potential: PotentialConfig = PotentialConfig()
    grids: GridConfig = GridConfig()
    extract_n_max: int | None = None
    inversion: InversionSettings = InversionSettings()
    output_directory: str = "out"
    source: str | None = None

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _coefficient_entry(raw, path):
    raw = _mapping(raw, path, {"kind", "value", "rate", "amplitude", "frequency"})
    kind = _choice(raw.get("kind"), f"{path}.kind", [k for k in KINDS if k != "tabulated"])
    allowed = _COEFF_PARAMS[kind]
    entry = {"kind": kind}
    for key, value in raw.items():
        if key == "kind":
            continue
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", f"not a parameter of kind {kind!r}")
        entry[key] = _number(value, f"{path}.{key}")
    return entry


def _potential(raw) -> PotentialConfig:
    raw = _mapping(raw, "potential", {"b", "degree", "coefficients"})
    b = _number(raw.get("b", 1.0), "potential.b", positive=True)
    coeffs_raw = _mapping(raw.get("coefficients"), "potential.coefficients",
                          {f"q{n}" for n in range(64)})
    coeffs = {}
    for key, entry in coeffs_raw.items():
        coeffs[int(key[1:])] = _coefficient_entry(entry, f"potential.coefficients.{key}")
    top = max(coeffs, default=0)
    if "degree" in raw:
        degree = _integer(raw["degree"], "potential.degree", minimum=0)
        if top > degree:
            raise ConfigError(f"potential.coefficients.q{top}", f"index exceeds degree {degree}")
    else:
        degree = top
    return PotentialConfig(b, degree, coeffs)


def _grids(raw) -> GridConfig:
    raw = _mapping(raw, "grids", {"nx", "nx_per_unit", "k_grid", "eps_list", "r"})
    kw = {}
    if "nx" in raw:
        nx = _integer(raw["nx"], "grids.nx", minimum=2)
        if nx % 2:
            raise ConfigError("grids.nx", "must be even (Simpson quadrature)")
        kw["nx"] = nx
    if "nx_per_unit" in raw:
        kw["nx_per_unit"] = _integer(raw["nx_per_unit"], "grids.nx_per_unit", minimum=2)
    if "k_grid" in raw:
        kg = _mapping(raw["k_grid"], "grids.k_grid", {"min", "max", "count"})
        for key in ("min", "max", "count"):
            if key not in kg:
                raise ConfigError(f"grids.k_grid.{key}", "required")
        kw["k_min"] = _number(kg["min"], "grids.k_grid.min")
        kw["k_max"] = _number(kg["max"], "grids.k_grid.max")
        kw["k_count"] = _integer(kg["count"], "grids.k_grid.count", minimum=1)
        if kw["k_max"] < kw["k_min"]:
            raise ConfigError("grids.k_grid.max", "must be >= grids.k_grid.min")
        ks = np.linspace(kw["k_min"], kw["k_max"], kw["k_count"])
        if np.any(ks == 0):
            raise ConfigError("grids.k_grid", "grid contains k = 0")
    if "eps_list" in raw and raw["eps_list"] != "auto":
        eps = raw["eps_list"]
        if not isinstance(eps, list) or not eps:
            raise ConfigError("grids.eps_list", "expected a non-empty list of numbers or 'auto'")
        values = []
        for i, e in enumerate(eps):
            v = _number(e, f"grids.eps_list[{i}]")
            if v == 0:
                raise ConfigError(f"grids.eps_list[{i}]", "must be nonzero")
            if v in values:
                raise ConfigError(f"grids.eps_list[{i}]", "duplicate value")
            values.append(v)
        kw["eps_list"] = tuple(values)
    if "r" in raw:
        kw["r"] = _number(raw["r"], "grids.r", positive=True)
    return GridConfig(**kw)


def _inversion(raw) -> InversionSettings:
    keys = {"n_target", "xi", "M", "method", "use_F", "basis", "n_basis", "lam", "data",
            "series_file", "example", "tolerance", "roundtrip_route"}
    raw = _mapping(raw, "inversion", keys)
    kw = {}
    if "n_target" in raw:
        kw["n_target"] = _integer(raw["n_target"], "inversion.n_target", minimum=2)
    if "xi" in raw:
        kw["xi"] = "auto" if raw["xi"] == "auto" else _number(raw["xi"], "inversion.xi", positive=True)
    if "M" in raw:
        kw["M"] = _integer(raw["M"], "inversion.M", minimum=0)
    if "method" in raw:
        kw["method"] = _choice(raw["method"], "inversion.method", METHODS)
    if "use_F" in raw:
        kw["use_F"] = _boolean(raw["use_F"], "inversion.use_F")
    if "basis" in raw:
        kw["basis"] = _choice(raw["basis"], "inversion.basis", BASES)
    if "n_basis" in raw:
        kw["n_basis"] = _integer(raw["n_basis"], "inversion.n_basis", minimum=1)
    if "lam" in raw and raw["lam"] is not None:
        kw["lam"] = _number(raw["lam"], "inversion.lam", nonneg=True)
    if "data" in raw:
        kw["data"] = _choice(raw["data"], "inversion.data", DATA_SOURCES)
    if "series_file" in raw:
        if not isinstance(raw["series_file"], str):
            raise ConfigError("inversion.series_file", "expected a path")
        kw["series_file"] = raw["series_file"]
    if "example" in raw:
        ex = _mapping(raw["example"], "inversion.example", {"name", "param"})
        kw["example"] = _choice(ex.get("name", "constant_gamma"), "inversion.example.name", EXAMPLES)
        if "param" in ex:
            kw["example_param"] = _number(ex["param"], "inversion.example.param")
    if "tolerance" in raw:
        kw["tolerance"] = _number(raw["tolerance"], "inversion.tolerance", positive=True)
    if "roundtrip_route" in raw:
        kw["roundtrip_route"] = _choice(raw["roundtrip_route"], "inversion.roundtrip_route",
                                        ROUNDTRIP_ROUTES)
    settings = InversionSettings(**kw)
    if settings.data == "series" and not settings.series_file:
        raise ConfigError("inversion.series_file", "required when inversion.data is 'series'")
    if settings.data == "series" and settings.method != "real_axis":
        raise ConfigError(
            "inversion.method",
            "tabulated series live on real k only; use method 'real_axis' "
            "(contour methods need data evaluable at complex k)")
    if settings.method == "fourier_special" and settings.n_target != 3:
        raise ConfigError("inversion.n_target", "fourier_special recovers q2 only (n_target 3)")
    return settings


def parse_config(raw: dict, source=None) -> ExperimentConfig:
    raw = _mapping(raw, "", {"potential", "grids", "extract", "inversion", "output"})
    extract = _mapping(raw.get("extract"), "extract", {"n_max"})
    n_max = None
    if "n_max" in extract:
        n_max = _integer(extract["n_max"], "extract.n_max", minimum=1)
    output = _mapping(raw.get("output"), "output", {"directory", "formats"})
    formats = output.get("formats", ["csv"])
    if formats != ["csv"]:
        raise ConfigError("output.formats", "only [csv] is supported")
    directory = output.get("directory", "out")
    if not isinstance(directory, str):
        raise ConfigError("output.directory", "expected a path")
    cfg = ExperimentConfig(_potential(raw.get("potential")), _grids(raw.get("grids")), n_max,
                           _inversion(raw.get("inversion")), directory, source)
    eps_count = len(cfg.grids.eps_list) if cfg.grids.eps_list is not None else 5
    if n_max is not None and n_max > eps_count:
        raise ConfigError("extract.n_max", f"needs at least as many eps values ({eps_count})")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError("", f"config file {path} not found") from None
    except yaml.YAMLError as exc:
        raise ConfigError("", f"{path}: invalid YAML ({exc})") from None
    return parse_config(raw or {}, source=str(path))

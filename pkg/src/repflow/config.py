"""Run configuration: TOML schema, defaults and fail-fast validation.

Sections and keys (defaults in brackets)::

    [domain]    m, n_per_axis, period [1.0]
    [matrix]    l [2], k [1], winding [one turn along axis 0], seed [0],
                amplitude [0.1], scale [1.0 or "stationary"]
    [potential] family, b [1.0], L [1]
    [flow]      integrator ["spectral_imex"], dt_policy ["stable"], dt,
                t_end, n_steps [100 when t_end is absent], snapshot_stride [10],
                safety [0.9], dt_max [inf], stop_residual
    [analysis]  centers, radii, delta [0.5], rho [R_M/2], eps0 ["calibrated"],
                b_sweep [[1.0, 0.1, 0.01]], constants [packaged file]
    [output]    directory ["out"], snapshots [true], series [true]

Every error names the dotted key it refers to.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .fields import SymmetricMatrixField, grassmannian_winding_field
from .flow import FlowConfig, Integrator
from .lattice import LatticeDomain, build_domain
from .potentials import PotentialSpec, make_potential

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


@dataclass
class DomainBlock:
    m: int
    n_per_axis: int
    period: float = 1.0


@dataclass
class MatrixBlock:
    l: int = 2
    k: int = 1
    winding: list | None = None
    seed: int = 0
    amplitude: float = 0.1
    scale: float | str = 1.0


@dataclass
class PotentialBlock:
    family: str
    b: float = 1.0
    L: int = 1


@dataclass
class FlowBlock:
    integrator: str = Integrator.SPECTRAL_IMEX.value
    dt_policy: str = "stable"
    dt: float | None = None
    t_end: float | None = None
    n_steps: int | None = None
    snapshot_stride: int = 10
    safety: float = 0.9
    dt_max: float = math.inf
    stop_residual: float | None = None


@dataclass
class AnalysisBlock:
    centers: list | None = None
    radii: list | None = None
    delta: float = 0.5
    rho: float | None = None
    eps0: float | str = "calibrated"
    b_sweep: list = field(default_factory=lambda: [1.0, 0.1, 0.01])
    constants: str | None = None


@dataclass
class OutputBlock:
    directory: str = "out"
    snapshots: bool = True
    series: bool = True


@dataclass
class RunConfig:
    """Validated configuration; see the module docstring for the schema."""

    domain: DomainBlock
    matrix: MatrixBlock
    potential: PotentialBlock
    flow: FlowBlock
    analysis: AnalysisBlock
    output: OutputBlock

    def build_domain(self) -> LatticeDomain:
        d = self.domain
        return build_domain(d.m, d.n_per_axis, d.period)

    def spec(self) -> PotentialSpec:
        p = self.potential
        return make_potential(p.family, p.b, p.L, self.matrix.l)

    def flow_config(self) -> FlowConfig:
        f = self.flow
        return FlowConfig(t_end=f.t_end, n_steps=f.n_steps, dt=f.dt, dt_policy=f.dt_policy, safety=f.safety,
                          dt_max=f.dt_max, integrator=f.integrator, snapshot_stride=f.snapshot_stride,
                          stop_residual=f.stop_residual)

    def initial_field(self) -> SymmetricMatrixField:
        dom = self.build_domain()
        mx = self.matrix
        scale = mx.scale
        if scale == "stationary":
            from .scenarios import stationary_winding_scale

            scale = stationary_winding_scale(dom, self.spec())
        return grassmannian_winding_field(dom, mx.l, mx.k, winding=mx.winding, seed=mx.seed,
                                          amplitude=mx.amplitude, scale=scale)

    def resolved(self) -> dict:
        """Plain dict with every default expanded (``inf`` as the string ``"inf"``)."""
        def clean(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf" if v > 0 else "-inf"
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, list):
                return [clean(x) for x in v]
            return v

        out = clean(asdict(self))
        if out["analysis"]["rho"] is None:
            out["analysis"]["rho"] = self.build_domain().R_M / 2
        return out


_BLOCKS = {
    "domain": DomainBlock,
    "matrix": MatrixBlock,
    "potential": PotentialBlock,
    "flow": FlowBlock,
    "analysis": AnalysisBlock,
    "output": OutputBlock,
}

# accepted value types per key; "float" admits ints and the strings "inf"/"-inf"
_TYPES = {
    "domain": {"m": "int", "n_per_axis": "int", "period": "float"},
    "matrix": {"l": "int", "k": "int", "winding": "int_list", "seed": "int", "amplitude": "float",
               "scale": "float_or_stationary"},
    "potential": {"family": "str", "b": "float", "L": "int"},
    "flow": {"integrator": "str", "dt_policy": "str", "dt": "float", "t_end": "float", "n_steps": "int",
             "snapshot_stride": "int", "safety": "float", "dt_max": "float", "stop_residual": "float"},
    "analysis": {"centers": "int_list", "radii": "float_list", "delta": "float", "rho": "float",
                 "eps0": "float_or_calibrated", "b_sweep": "float_list", "constants": "str"},
    "output": {"directory": "str", "snapshots": "bool", "series": "bool"},
}
_REQUIRED = {"domain": ("m", "n_per_axis"), "potential": ("family",)}


def _as_float(v, key: str) -> float:
    if isinstance(v, bool):
        raise ConfigurationError(f"expected a number, got {v!r}", key)
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", "-inf"):
        return float(v.strip().lower())
    raise ConfigurationError(f"expected a number, got {v!r}", key)


def _coerce(kind: str, v, key: str):
    if kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigurationError(f"expected an integer, got {v!r}", key)
        return v
    if kind == "float":
        return _as_float(v, key)
    if kind == "str":
        if not isinstance(v, str):
            raise ConfigurationError(f"expected a string, got {v!r}", key)
        return v
    if kind == "bool":
        if not isinstance(v, bool):
            raise ConfigurationError(f"expected true or false, got {v!r}", key)
        return v
    if kind in ("int_list", "float_list"):
        if not isinstance(v, list):
            raise ConfigurationError(f"expected a list, got {v!r}", key)
        inner = "int" if kind == "int_list" else "float"
        return [_coerce(inner, x, f"{key}[{i}]") for i, x in enumerate(v)]
    if kind == "float_or_stationary":
        return "stationary" if v == "stationary" else _as_float(v, key)
    if kind == "float_or_calibrated":
        return "calibrated" if v == "calibrated" else _as_float(v, key)
    raise AssertionError(kind)


def config_from_dict(data: dict) -> RunConfig:
    """Validate a parsed mapping and fill in defaults.

    Raises
    ------
    ConfigurationError
        On unknown sections or keys, type mismatches and violated
        preconditions, naming the offending key.
    """
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a table")
    for section in data:
        if section not in _BLOCKS:
            raise ConfigurationError(f"unknown section; expected one of {sorted(_BLOCKS)}", section)
    blocks = {}
    for section, cls in _BLOCKS.items():
        raw = data.get(section, {})
        if not isinstance(raw, dict):
            raise ConfigurationError("expected a table", section)
        kw = {}
        for key, v in raw.items():
            dotted = f"{section}.{key}"
            if key not in _TYPES[section]:
                raise ConfigurationError(f"unknown key; expected one of {sorted(_TYPES[section])}", dotted)
            kw[key] = _coerce(_TYPES[section][key], v, dotted)
        for key in _REQUIRED.get(section, ()):
            if key not in kw:
                raise ConfigurationError("required key is missing", f"{section}.{key}")
        blocks[section] = cls(**kw)
    cfg = RunConfig(**blocks)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    dom = cfg.build_domain()
    spec = cfg.spec()
    mx = cfg.matrix
    if not 0 <= mx.k <= mx.l:
        raise ConfigurationError(f"signature k={mx.k} outside [0, {mx.l}]", "matrix.k")
    if mx.winding is not None and len(mx.winding) != dom.m:
        raise ConfigurationError(f"winding needs {dom.m} entries", "matrix.winding")
    if mx.scale != "stationary" and not (mx.scale > 0 and math.isfinite(mx.scale)):
        raise ConfigurationError(f"scale must be positive, got {mx.scale!r}", "matrix.scale")
    if mx.amplitude < 0:
        raise ConfigurationError("amplitude must be nonnegative", "matrix.amplitude")
    fl = cfg.flow
    if fl.t_end is None and fl.n_steps is None:
        fl.n_steps = 100
    if fl.t_end is not None and not fl.t_end > 0:
        raise ConfigurationError("t_end must be positive", "flow.t_end")
    if fl.n_steps is not None and fl.n_steps < 0:
        raise ConfigurationError("n_steps must be nonnegative", "flow.n_steps")
    if fl.snapshot_stride < 1:
        raise ConfigurationError("snapshot_stride must be >= 1", "flow.snapshot_stride")
    if not 0 < fl.safety <= 1:
        raise ConfigurationError("safety must lie in (0, 1]", "flow.safety")
    try:
        Integrator(fl.integrator)
    except ValueError:
        raise ConfigurationError(f"unknown integrator {fl.integrator!r}; expected one of "
                                 f"{[i.value for i in Integrator]}", "flow.integrator") from None
    if spec.family.value == "singular" and fl.dt_policy == "stable":
        raise ConfigurationError("the singular family needs dt_policy 'fixed' or 'adaptive'", "flow.dt_policy")
    cfg.flow_config()
    an = cfg.analysis
    if not 0 <= an.delta <= 0.75:
        raise ConfigurationError("delta must lie in [0, 3/4]", "analysis.delta")
    if an.rho is not None and not 0 < an.rho <= dom.R_M:
        raise ConfigurationError(f"rho must lie in (0, R_M={dom.R_M:.6g}]", "analysis.rho")
    if an.radii is not None:
        for i, R in enumerate(an.radii):
            if not 0 < R < dom.R_M:
                raise ConfigurationError(f"radius {R!r} outside (0, R_M)", f"analysis.radii[{i}]")
    if an.centers is not None:
        for i, c in enumerate(an.centers):
            if not 0 <= c < dom.n_sites:
                raise ConfigurationError(f"site {c} outside the lattice", f"analysis.centers[{i}]")
    if not an.b_sweep:
        raise ConfigurationError("b_sweep must not be empty", "analysis.b_sweep")
    for i, b in enumerate(an.b_sweep):
        if not b > 0:
            raise ConfigurationError(f"b must be positive, got {b!r}", f"analysis.b_sweep[{i}]")
    if an.eps0 != "calibrated" and not an.eps0 > 0:
        raise ConfigurationError("eps0 must be positive", "analysis.eps0")


def parse_config(text: str) -> RunConfig:
    """Parse TOML text into a validated :class:`RunConfig`."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML: {exc}") from None
    return config_from_dict(data)


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())

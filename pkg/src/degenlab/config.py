"""Run configuration: JSON sections with defaults, field-named validation and a lossless echo."""
import copy
import json
import math

from .coefficients import DiffusionCoefficient, ProblemParams, ValidationError
from .geometry import DomainSpec, MAX_LEVEL


class ConfigError(ValidationError):
    pass


DEFAULTS = {
    "domain": {"kind": "disk", "radius": 1.0, "inner_radius": 0.0},
    "coefficient": {"model": "power", "alpha": 0.5, "beta": None},
    "problem": {"lambda": 2.0, "lambda_mode": "ratio", "gamma": 1.0, "N": 2},
    "discretization": {"level": 3, "eigen_tol": 1e-10, "newton_tol": 1e-10, "quad_rel_tol": 1e-10},
    "eigen": {"modes": 1},
    "truncation": {"family": "inner", "radii": [0.2, 0.1, 0.05, 0.025]},
    "branch": {"lambda_max": 3.0, "steps": 40, "delta0": 0.02, "probe_lambda": 2.0,
               "probe_starts": 5, "dump_fields": False},
    "evolve": {"dt": 1e-3, "t_max": 50.0, "dt_min": 1e-6, "dt_max": 1.0,
               "snapshot_stride": 0,
               "initial": [{"generator": "scaled_eigenfunction", "t": 0.1}]},
    "verify": {"n_fields": 10, "t_short": 0.05, "dt": 2e-3},
    "seed": 0,
}

_SECTIONS = set(DEFAULTS)
_GENERATORS = {
    "scaled_eigenfunction": {"t"},
    "random_positive": {"seed", "amplitude"},
    "constant_interior": {"c"},
}


def _merge(base, over, path):
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"{where}: unknown field")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where}: expected an object")
            out[k] = _merge(base[k], v, where)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _num(cfg, path, positive=False, integer=False, lo=None, allow_none=False):
    sec, key = path.split(".") if "." in path else (None, path)
    v = cfg[sec][key] if sec else cfg[key]
    if v is None and allow_none:
        return
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {v!r}")
    if integer and not float(v).is_integer():
        raise ConfigError(f"{path}: expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{path}: must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{path}: must be positive, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{path}: must be >= {lo}, got {v!r}")


class RunConfig:
    """Resolved configuration. ``data`` is the full dict echoed into every report."""

    def __init__(self, data):
        self.data = data
        self._validate()

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config: expected a JSON object")
        return cls(_merge(DEFAULTS, raw, ""))

    @classmethod
    def from_json(cls, text):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path} ({exc.strerror})") from None
        return cls.from_json(text)

    def to_dict(self):
        return copy.deepcopy(self.data)

    def override(self, level=None, seed=None):
        d = self.to_dict()
        if level is not None:
            d["discretization"]["level"] = level
        if seed is not None:
            d["seed"] = seed
        return RunConfig(d)

    def _validate(self):
        d = self.data
        dom = d["domain"]
        if dom["kind"] not in ("disk", "annulus", "truncated_plane"):
            raise ConfigError(f"domain.kind: unknown kind {dom['kind']!r}")
        _num(d, "domain.radius", positive=True)
        _num(d, "domain.inner_radius", lo=0.0)
        co = d["coefficient"]
        if co.get("model") not in ("power", "power_sum"):
            raise ConfigError(f"coefficient.model: unknown model {co.get('model')!r}")
        _num(d, "coefficient.alpha", lo=0.0)
        if co["model"] == "power_sum":
            if co.get("beta") is None:
                raise ConfigError("coefficient.beta: required for power_sum")
            _num(d, "coefficient.beta")
        pr = d["problem"]
        _num(d, "problem.lambda")
        if pr["lambda_mode"] not in ("ratio", "absolute"):
            raise ConfigError(f"problem.lambda_mode: expected 'ratio' or 'absolute', got {pr['lambda_mode']!r}")
        _num(d, "problem.gamma", positive=True)
        _num(d, "problem.N", integer=True, positive=True)
        _num(d, "discretization.level", integer=True, lo=0)
        if d["discretization"]["level"] > MAX_LEVEL:
            raise ConfigError(f"discretization.level: at most {MAX_LEVEL}")
        for k in ("eigen_tol", "newton_tol", "quad_rel_tol"):
            _num(d, f"discretization.{k}", positive=True)
        _num(d, "eigen.modes", integer=True, positive=True)
        tr = d["truncation"]
        if tr["family"] not in ("inner", "outer"):
            raise ConfigError(f"truncation.family: expected 'inner' or 'outer', got {tr['family']!r}")
        if not isinstance(tr["radii"], list) or len(tr["radii"]) < 2:
            raise ConfigError("truncation.radii: expected a list of at least two radii")
        for i, r in enumerate(tr["radii"]):
            if isinstance(r, bool) or not isinstance(r, (int, float)) or not r > 0:
                raise ConfigError(f"truncation.radii[{i}]: expected a positive number, got {r!r}")
        for k in ("lambda_max", "delta0", "probe_lambda"):
            _num(d, f"branch.{k}", positive=True)
        _num(d, "branch.steps", integer=True, lo=2)
        _num(d, "branch.probe_starts", integer=True, lo=3)
        ev = d["evolve"]
        for k in ("dt", "t_max", "dt_min", "dt_max"):
            _num(d, f"evolve.{k}", positive=True)
        _num(d, "evolve.snapshot_stride", integer=True, lo=0)
        if not ev["dt_min"] <= ev["dt"] <= ev["dt_max"]:
            raise ConfigError("evolve.dt: must lie in [evolve.dt_min, evolve.dt_max]")
        if not isinstance(ev["initial"], list) or not ev["initial"]:
            raise ConfigError("evolve.initial: expected a non-empty list")
        for i, g in enumerate(ev["initial"]):
            name = g.get("generator") if isinstance(g, dict) else None
            if name not in _GENERATORS:
                raise ConfigError(f"evolve.initial[{i}].generator: unknown generator {name!r}")
            extra = set(g) - _GENERATORS[name] - {"generator"}
            if extra:
                raise ConfigError(f"evolve.initial[{i}]: unexpected field {sorted(extra)[0]!r}")
        _num(d, "verify.n_fields", integer=True, positive=True)
        _num(d, "verify.t_short", positive=True)
        _num(d, "verify.dt", positive=True)
        _num(d, "seed", integer=True, lo=0)

    # typed views

    @property
    def level(self):
        return int(self.data["discretization"]["level"])

    @property
    def seed(self):
        return int(self.data["seed"])

    def domain(self):
        dom = self.data["domain"]
        try:
            if dom["kind"] == "disk":
                return DomainSpec.disk(dom["radius"])
            if dom["kind"] == "annulus":
                return DomainSpec.annulus(dom["radius"], dom["inner_radius"])
            return DomainSpec.truncated_plane(dom["radius"])
        except ValueError as exc:
            raise ConfigError(f"domain: {exc}") from None

    def coefficient(self):
        co = self.data["coefficient"]
        c = DiffusionCoefficient(co["model"], float(co["alpha"]), co.get("beta"))
        try:
            c.check()
        except ValueError as exc:
            raise ConfigError(f"coefficient: {exc}") from None
        return c

    def quadrature(self):
        from .quadrature import QuadratureRule
        return QuadratureRule(rel_tol=float(self.data["discretization"]["quad_rel_tol"]))

    def params(self, lambda_1=None, value=None):
        """Problem parameters; a ratio lambda is resolved against ``lambda_1``."""
        pr = self.data["problem"]
        lam = pr["lambda"] if value is None else value
        if pr["lambda_mode"] == "ratio":
            if lambda_1 is None:
                raise ConfigError("problem.lambda: ratio mode needs lambda_1")
            lam = lam * lambda_1
        return ProblemParams(float(lam), float(pr["gamma"]), int(pr["N"]))

    def resolve_lambda(self, value, lambda_1):
        return value * lambda_1 if self.data["problem"]["lambda_mode"] == "ratio" else value

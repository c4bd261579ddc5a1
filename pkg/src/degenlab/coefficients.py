"""Diffusion coefficients, problem parameters and exponent arithmetic."""
from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """Raised for parameter combinations outside an operation's contract."""


@dataclass(frozen=True)
class DiffusionCoefficient:
    """sigma(x) = |x|^alpha (``power``) or |x|^alpha + |x|^beta (``power_sum``).

    ``alpha == 0`` with the power model is accepted as a validation mode
    (sigma = 1, the classical Laplacian); it lies outside the degenerate
    theory and is flagged by :func:`validate_assumptions`.
    """

    model: str
    alpha: float
    beta: float = None

    def __post_init__(self):
        if self.model not in ("power", "power_sum"):
            raise ValidationError(f"unknown coefficient model {self.model!r}")
        if not (np.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValidationError(f"alpha must be a finite nonnegative number, got {self.alpha}")
        if self.model == "power_sum":
            if self.beta is None or not np.isfinite(self.beta):
                raise ValidationError("power_sum requires a finite beta")
        elif self.beta is not None:
            raise ValidationError("power model takes no beta")

    def check(self):
        """Raise unless the coefficient satisfies its range invariants."""
        if not 0.0 <= self.alpha < 2.0:
            raise ValidationError(f"alpha not in (0,2): {self.alpha}")
        if self.model == "power_sum":
            if self.alpha == 0.0:
                raise ValidationError("power_sum requires alpha > 0")
            if not self.beta > 2.0:
                raise ValidationError(f"beta <= 2 breaks compact embedding: {self.beta}")
        return self

    @classmethod
    def power(cls, alpha):
        return cls("power", float(alpha))

    @classmethod
    def power_sum(cls, alpha, beta):
        return cls("power_sum", float(alpha), float(beta))

    @property
    def validation_mode(self):
        return self.model == "power" and self.alpha == 0.0

    @property
    def kernel_model(self):
        """Model name understood by the element kernels."""
        return "constant" if self.validation_mode else self.model

    def to_dict(self):
        d = {"model": self.model, "alpha": self.alpha}
        if self.beta is not None:
            d["beta"] = self.beta
        return d

    @classmethod
    def from_dict(cls, d):
        model = d.get("model")
        if model == "power":
            return cls.power(d["alpha"])
        if model == "power_sum":
            return cls.power_sum(d["alpha"], d["beta"])
        raise ValidationError(f"coefficient.model: unknown model {model!r}")


def sigma_eval(coeff, x):
    """Evaluate sigma at a point or an array of points (last axis of length 2)."""
    x = np.asarray(x, dtype=float)
    rho = np.hypot(x[..., 0], x[..., 1])
    if coeff.validation_mode:
        out = np.ones_like(rho)
    else:
        out = rho ** coeff.alpha
        if coeff.model == "power_sum":
            out = out + rho ** coeff.beta
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ProblemParams:
    """Spectral parameter ``lam``, nonlinearity exponent ``gamma`` and dimension ``N``."""

    lam: float
    gamma: float = 1.0
    N: int = 2

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if int(self.N) != self.N or self.N < 2:
            raise ValidationError(f"N must be an integer >= 2, got {self.N}")

    def with_lambda(self, lam):
        return ProblemParams(float(lam), self.gamma, self.N)


def two_star(N, a):
    """Critical embedding exponent 2N/(N-2+a); for N = 2 this is 4/a."""
    return 2.0 * N / (N - 2.0 + a)


def gamma_star(N, alpha):
    return (2.0 - alpha) / (2.0 * (N - 2.0 + alpha))


def gamma_one(N, alpha):
    return (2.0 - alpha) / (N - 2.0 + alpha)


def alpha_star(N, gamma):
    return 2.0 * (1.0 - gamma * (N - 2.0)) / (2.0 * gamma + 1.0)


@dataclass(frozen=True)
class ExponentTable:
    two_star_alpha: float
    two_star_beta: float
    gamma_star: float
    gamma_one: float
    alpha_star: float


def exponents(params, coeff):
    N, a = params.N, coeff.alpha
    with np.errstate(divide="ignore"):
        tsa = two_star(N, a) if (N - 2 + a) > 0 else np.inf
        gs = gamma_star(N, a) if (N - 2 + a) > 0 else np.inf
        g1 = gamma_one(N, a) if (N - 2 + a) > 0 else np.inf
    tsb = two_star(N, coeff.beta) if coeff.beta is not None else np.nan
    return ExponentTable(tsa, tsb, gs, g1, alpha_star(N, params.gamma))


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    attractor_regime: bool = False      # gamma <= gamma*
    bifurcation_regime: bool = False    # gamma < gamma*

    @property
    def ok(self):
        return not self.violations


def validate_assumptions(coeff, params, spec):
    """Check the coefficient/exponent/domain combination against the theory.

    Never raises for theory violations; every breach is listed in the report.
    """
    rep = ValidationReport()
    a = coeff.alpha
    if not 0.0 < a < 2.0:
        if a == 0.0:
            rep.notes.append("alpha = 0: validation mode, outside the degenerate theory")
        else:
            rep.violations.append("alpha not in (0,2)")
    if coeff.model == "power_sum" and not coeff.beta > 2.0:
        rep.violations.append("beta <= 2 breaks compact embedding")
    if spec.kind == "truncated_plane" and coeff.model != "power_sum":
        rep.violations.append("truncated_plane requires a power_sum coefficient (beta > 2)")
    table = exponents(params, coeff)
    rep.attractor_regime = params.gamma <= table.gamma_star
    rep.bifurcation_regime = params.gamma < table.gamma_star
    if not rep.attractor_regime:
        rep.notes.append(f"gamma = {params.gamma} > gamma* = {table.gamma_star}: global attractor regime not covered")
    elif not rep.bifurcation_regime:
        rep.notes.append(f"gamma = gamma* = {table.gamma_star}: branch regime requires gamma < gamma*")
    if params.N != 2:
        rep.notes.append("discrete solvers require N = 2")
    return rep


"""Implicit Euler time integration of the gradient flow of J and its diagnostics."""
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import lyapunov, norms
from .coefficients import ValidationError


class StepFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float = 1e-3
    t_max: float = 50.0
    dt_min: float = 1e-6
    dt_max: float = 1.0
    grow: float = 1.2
    shrink: float = 0.5
    adaptive: bool = True
    stationary_tol: float = 1e-8
    classify_tol: float = 1e-6
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    easy_iters: int = 8
    energy_slack: float = 1e-12
    max_steps: int = 100000
    snapshot_stride: int = 0

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_max:
            raise ValidationError("need 0 < dt_min <= dt_max")
        if not self.dt_min <= self.dt <= self.dt_max:
            raise ValidationError(f"dt={self.dt} outside [{self.dt_min}, {self.dt_max}]")
        if not self.t_max > 0:
            raise ValidationError("t_max must be positive")


class _Stepper:
    """Newton solver for one implicit Euler step, reusing a factorised Jacobian while it contracts."""

    def __init__(self, params, ops, cfg):
        self.params, self.ops, self.cfg = params, ops, cfg
        self._lu = None
        self._dt = None

    def _factor(self, v, dt):
        ops, g = self.ops, self.params.gamma
        A = ops.K_int + (1.0 / dt - self.params.lam) * ops.M_int
        if np.any(v):
            A = A + (2 * g + 1) * ops.weight_matrix(ops.extend(v), 2 * g)
        self._lu = splu(A.tocsc())
        self._dt = dt

    def residual(self, v, v_old, dt):
        ops, p = self.ops, self.params
        u = ops.extend(v)
        r = (ops.M_int @ (v - v_old)) / dt + ops.K_int @ v - p.lam * (ops.M_int @ v)
        return r + ops.nonlinear_load(u, 2 * p.gamma)[ops.interior]

    def solve(self, v_old, dt):
        cfg = self.cfg
        v = v_old.copy()
        r = self.residual(v, v_old, dt)
        rn = np.linalg.norm(r)
        fresh = False
        if self._lu is None or self._dt != dt:
            self._factor(v, dt)
            fresh = True
        for it in range(1, cfg.newton_max_iter + 1):
            if rn <= cfg.newton_tol:
                return v, it - 1
            dv = self._lu.solve(-r)
            v_new = v + dv
            r_new = self.residual(v_new, v_old, dt)
            rn_new = np.linalg.norm(r_new)
            if fresh:
                # exact Newton direction: backtrack on the residual norm before giving up
                s = 1.0
                while not (np.isfinite(rn_new) and rn_new < rn) and s > 2.0 ** -10:
                    s *= 0.5
                    v_new = v + s * dv
                    r_new = self.residual(v_new, v_old, dt)
                    rn_new = np.linalg.norm(r_new)
            if not np.isfinite(rn_new):
                raise StepFailure("non-finite Newton iterate")
            if rn_new > 0.25 * rn and rn_new > cfg.newton_tol:
                if fresh and rn_new >= rn:
                    raise StepFailure(f"Newton diverged (residual {rn:.2e} -> {rn_new:.2e})")
                # slow contraction: refresh the Jacobian at the better of the two iterates
                if rn_new < rn:
                    v, r, rn = v_new, r_new, rn_new
                self._factor(v, dt)
                fresh = True
                continue
            v, r, rn = v_new, r_new, rn_new
            fresh = False
        if rn <= cfg.newton_tol:
            return v, cfg.newton_max_iter
        raise StepFailure(f"Newton did not converge (residual {rn:.2e})")


def step(phi_n, dt, params, ops, cfg=EvolutionConfig()):
    """One implicit Euler step: M(phi - phi_n)/dt + K phi - lam M phi + N(phi) = 0."""
    phi_n = ops.check_boundary(phi_n, "phi_n")
    v, _ = _Stepper(params, ops, cfg).solve(ops.restrict(phi_n), dt)
    return ops.extend(v)


@dataclass
class TrajectoryRecord:
    times: list = field(default_factory=list)
    J: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    min_value: list = field(default_factory=list)
    dissipation: list = field(default_factory=list)
    dts: list = field(default_factory=list)
    energy_defect: list = field(default_factory=list)
    distances: dict = field(default_factory=dict)
    classification: str = "undecided"
    final_distance: dict = field(default_factory=dict)
    stationary: bool = False
    failed: bool = False
    message: str = ""
    rejected_steps: int = 0
    snapshots: list = field(default_factory=list)
    final: np.ndarray = None
    initial_nonnegative: bool = True

    def rows(self):
        names = list(self.distances)
        d_triv = self.distances.get("trivial", [np.nan] * len(self.times))
        d_eq = self.distances.get("nonneg_equilibrium", [np.nan] * len(self.times))
        return [(t, j, l, m, q, a, b) for t, j, l, m, q, a, b in
                zip(self.times, self.J, self.l2, self.min_value, self.dissipation, d_triv, d_eq)], names


def evolve(phi_0, params, ops, cfg=EvolutionConfig(), known_equilibria=None):
    """Integrate to ``t_max`` or stationarity and classify the limit.

    ``known_equilibria`` maps labels (``"trivial"``, ``"nonneg_equilibrium"``)
    to fields. A step is accepted only when Newton converges and the discrete
    energy inequality J(phi_{n+1}) + ||phi_{n+1} - phi_n||^2 / (2 dt) <= J(phi_n)
    holds; otherwise dt is halved.
    """
    phi = ops.check_boundary(np.array(phi_0, dtype=float), "phi_0")
    eqs = dict(known_equilibria or {})
    eqs.setdefault("trivial", np.zeros_like(phi))
    rec = TrajectoryRecord(distances={k: [] for k in eqs})
    rec.initial_nonnegative = bool(phi.min() >= 0)
    stepper = _Stepper(params, ops, cfg)
    M = ops.M

    def log(t, u, j, diss, dt, edef):
        rec.times.append(t)
        rec.J.append(j)
        rec.l2.append(float(np.sqrt(max(u @ (M @ u), 0.0))))
        rec.min_value.append(float(u.min()) + 0.0)
        rec.dissipation.append(diss)
        rec.dts.append(dt)
        rec.energy_defect.append(edef)
        for k, e in eqs.items():
            rec.distances[k].append(norms(u - e, ops)["weighted_h1"])

    t = 0.0
    J0 = lyapunov(phi, params, ops)
    log(t, phi, J0, 0.0, 0.0, 0.0)
    if cfg.snapshot_stride:
        rec.snapshots.append((t, phi.copy()))
    dt = cfg.dt
    v = ops.restrict(phi)
    p2 = 2 * params.gamma + 2
    for n in range(cfg.max_steps):
        if t >= cfg.t_max * (1 - 1e-12):
            break
        h = min(dt, cfg.t_max - t)
        try:
            v_new, iters = stepper.solve(v, h)
            u_new = ops.extend(v_new)
            J1 = lyapunov(u_new, params, ops)
            d = v_new - v
            dMd = float(d @ (ops.M_int @ d))
            if J1 + dMd / (2 * h) > J0 + cfg.energy_slack:
                raise StepFailure(f"energy inequality violated at dt={h:.3e}")
        except StepFailure as exc:
            rec.rejected_steps += 1
            if not cfg.adaptive or h * cfg.shrink < cfg.dt_min:
                rec.failed = True
                rec.message = f"dt floor reached at t={t:.6g}: {exc}"
                break
            dt = h * cfg.shrink
            continue
        m1 = float(v_new @ (ops.M_int @ v_new))
        m0 = float(v @ (ops.M_int @ v))
        edef = (0.5 * (m1 - m0) / h + float(u_new @ (ops.K @ u_new)) - params.lam * m1
                + ops.power_integral(u_new, p2))
        t += h
        log(t, u_new, J1, -dMd / h ** 2, h, edef)
        v, J0 = v_new, J1
        if cfg.snapshot_stride and (n + 1) % cfg.snapshot_stride == 0:
            rec.snapshots.append((t, u_new.copy()))
        if np.sqrt(dMd) / h <= cfg.stationary_tol:
            rec.stationary = True
            break
        if cfg.adaptive and iters <= cfg.easy_iters:
            dt = min(h * cfg.grow, cfg.dt_max)
    rec.final = ops.extend(v)
    rec.final_distance = {k: d[-1] for k, d in rec.distances.items()}
    if rec.stationary:
        label, dist = min(rec.final_distance.items(), key=lambda kv: kv[1])
        if dist <= cfg.classify_tol:
            rec.classification = label
    return rec


def fit_decay_rate(record, drop=1e-2):
    """Slope of log ||phi||_L2 against t over the last half of the steps with ||phi|| < drop ||phi_0||."""
    t = np.asarray(record.times)
    l2 = np.asarray(record.l2)
    sel = np.flatnonzero((l2 < drop * l2[0]) & (l2 > 0))
    if len(sel) < 4:
        raise ValueError("trajectory does not reach the linear decay regime")
    sel = sel[len(sel) // 2:]
    slope, _ = np.polyfit(t[sel], np.log(l2[sel]), 1)
    return float(slope)


@dataclass
class DissipationReport:
    max_defect: float
    max_rate_defect: float
    monotone_ok: bool
    max_increase: float


def lyapunov_dissipation_check(record, slack=1e-12):
    """Residual of the discrete dissipation identity and the monotonicity of J.

    ``max_defect`` is max_n |(J_{n+1} - J_n)/dt + ||(phi_{n+1} - phi_n)/dt||^2| * dt;
    ``max_rate_defect`` omits the final factor dt (first order in dt).
    """
    if len(record.times) < 2:
        raise ValidationError("record needs at least two steps")
    J = np.asarray(record.J)
    dt = np.asarray(record.dts[1:])
    rate = -np.asarray(record.dissipation[1:])
    dJ = np.diff(J)
    per = np.abs(dJ / dt + rate)
    inc = float(dJ.max())
    return DissipationReport(float(np.max(per * dt)), float(np.max(per)), bool(inc <= slack), inc)


@dataclass
class PositivityReport:
    applicable: bool
    min_value: float
    passed: bool


def positivity_check(record, phi_series=None, tol=-1e-8):
    """Global minimum over time of the vertex values; N/A when phi_0 has a negative value."""
    if phi_series is not None:
        mins = [float(np.min(p)) for p in phi_series]
        nonneg0 = mins[0] >= 0
    else:
        mins = record.min_value
        nonneg0 = record.initial_nonnegative
    if not nonneg0:
        return PositivityReport(False, float(min(mins)), True)
    m = float(min(mins))
    return PositivityReport(True, m, m >= tol)


@dataclass
class AbsorbingSetDiagnostics:
    theta: float
    c_1: float
    R_1: float
    rho_squared: float


def absorbing_diagnostics(params, coeff, C_beta):
    """Interpolation exponent and absorbing-ball constants for a power_sum coefficient."""
    if coeff.model != "power_sum" or not coeff.beta > 2:
        raise ValidationError("absorbing-set diagnostics need power_sum with beta > 2")
    g, b, N, lam = params.gamma, coeff.beta, params.N, params.lam
    theta = (g + 1) * (b - 2) / ((N + b - 2) * (g + 1) - N)
    if not 0 < theta < 1:
        raise ValidationError(f"theta = {theta} outside (0, 1)")
    c1 = C_beta ** 2 * (2 * lam) ** (1 / (1 - theta)) * (1 - theta) * (2 * theta) ** (theta / (1 - theta))
    # logs: the exponents 1/g blow up for small gamma
    log_r1 = ((g + 1) / g) * np.log(c1) + np.log(2) / g + np.log(g) - (g + 1) * np.log(g + 1)
    R1 = float(np.exp(log_r1)) if log_r1 < 709 else np.inf
    return AbsorbingSetDiagnostics(theta, c1, R1, float(np.exp(-np.log(lam) - log_r1)))


def gronwall_bound(l2_initial_sq, t, params, diag):
    """Right-hand side ||phi_0||^2 exp(-2 lam t) + (1 - exp(-2 lam t)) / (lam R_1); recorded, not asserted."""
    e = np.exp(-2 * params.lam * np.asarray(t))
    return l2_initial_sq * e + (1 - e) / (params.lam * diag.R_1)


def scaled_eigenfunction(t, eig):
    """t * u_1 for a principal eigenpair ``eig``."""
    return float(t) * eig.u


def random_positive(ops, seed, amplitude=1.0):
    from .stationary import random_positive_field
    return random_positive_field(ops, seed, amplitude)


def constant_interior(ops, c):
    from .stationary import constant_interior_field
    return constant_interior_field(ops, c)

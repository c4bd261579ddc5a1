"""Nonnegative stationary states: Newton solves, the branch from lam_1, and its properties."""
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import WeightedOperatorSet, jacobian, lyapunov, nonlinear_residual, norms
from .coefficients import ValidationError
from .geometry import DomainSpec, build_mesh, transfer
from .spectral import linearized_spectrum, principal_eigenpair

TRIVIAL_L2 = 1e-12


class NewtonError(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(f"{msg}; residual history {[f'{h:.2e}' for h in history[-8:]]}")
        self.history = list(history)


class BranchError(RuntimeError):
    def __init__(self, msg, lam=None):
        super().__init__(msg)
        self.lam = lam


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 50
    armijo: float = 1e-4
    min_step: float = 2.0 ** -30
    step_tol: float = 1e-8

    def __post_init__(self):
        if not self.tol > 0 or self.max_iter < 1:
            raise ValidationError("NewtonConfig needs tol > 0 and max_iter >= 1")


@dataclass
class NewtonResult:
    u: np.ndarray
    trivial: bool
    iterations: int
    residual: float
    history: list = field(default_factory=list)


def _l2(u, ops):
    return float(np.sqrt(max(u @ (ops.M @ u), 0.0)))


def newton(F, Jac, u0, ops, cfg, extra_norm=None):
    """Damped Newton with Armijo backtracking on half the squared residual norm.

    ``F(u)`` returns the interior residual, ``Jac(u)`` the interior Jacobian.
    Returns ``(u, iterations, residual, history)``; the trivial-marker test
    is left to callers.
    """
    u = u0.copy()
    history = []
    r = F(u)
    for it in range(cfg.max_iter + 1):
        rn = float(np.linalg.norm(r))
        history.append(rn)
        if _l2(u, ops) < TRIVIAL_L2:
            return u, it, rn, history
        try:
            d = splu(Jac(u).tocsc()).solve(-r)
        except RuntimeError as exc:
            raise NewtonError(f"singular Jacobian ({exc})", history) from exc
        du = ops.extend(d)
        if rn <= cfg.tol and _l2(du, ops) <= cfg.step_tol * max(_l2(u, ops), TRIVIAL_L2):
            return u, it, rn, history
        if it == cfg.max_iter:
            break
        phi0 = 0.5 * rn * rn
        t = 1.0
        while True:
            trial = u + t * du
            rt = F(trial)
            if 0.5 * float(rt @ rt) <= (1.0 - 2.0 * cfg.armijo * t) * phi0 or rn <= cfg.tol:
                break
            t *= 0.5
            if t < cfg.min_step:
                raise NewtonError("line search failed", history)
        u, r = trial, rt
    raise NewtonError(f"no convergence in {cfg.max_iter} iterations", history)


def solve_stationary(params, init, ops, cfg=NewtonConfig(), lambda_1=None):
    """Newton solve of K u - lam M u + N(u) = 0 from ``init``.

    ``result.trivial`` is set when the iterate collapses to zero. With
    ``lambda_1`` supplied, a nontrivial solution at lam <= lambda_1 is
    rejected (no such nonnegative solution exists).
    """
    u0 = ops.check_boundary(np.array(init, dtype=float), "initial field")
    u, it, rn, hist = newton(lambda v: nonlinear_residual(v, params, ops),
                             lambda v: jacobian(v, params, ops), u0, ops, cfg)
    trivial = _l2(u, ops) < TRIVIAL_L2
    if trivial:
        u = np.zeros_like(u)
    elif lambda_1 is not None and params.lam <= lambda_1:
        raise BranchError(
            f"rejected nontrivial solution at lam={params.lam} <= lam_1={lambda_1} "
            f"(min u = {u.min():.3e}, L2 = {_l2(u, ops):.3e})", params.lam)
    return NewtonResult(u, trivial, it, rn, hist)


def amplitude_seed(lam, eig, params, ops):
    """Minimiser over t > 0 of J(t u_1): [(lam - lam_1) ||u_1||^2 / ||u_1||_{2g+2}^{2g+2}]^{1/(2g)}."""
    if not lam > eig.lam:
        raise ValidationError(f"amplitude seed needs lam > lam_1 ({lam} <= {eig.lam})")
    g = params.gamma
    l2sq = float(eig.u @ (ops.M @ eig.u))
    pp = ops.power_integral(eig.u, 2 * g + 2)
    return ((lam - eig.lam) * l2sq / pp) ** (1.0 / (2.0 * g))


def energy_identity_defect(u, params, ops):
    """Relative defect of u'Ku = lam u'Mu - integral |u|^{2 gamma + 2}."""
    a = float(u @ (ops.K @ u))
    b = params.lam * float(u @ (ops.M @ u)) - ops.power_integral(u, 2 * params.gamma + 2)
    return abs(a - b) / max(abs(a), 1e-300)


@dataclass
class BranchPoint:
    lam: float
    u: np.ndarray = field(repr=False)
    l2_norm: float
    weighted_h1_norm: float
    J: float
    mu_1: float
    min_u: float
    newton_iters: int
    residual: float


@dataclass
class Branch:
    lambda_1: float
    points: list
    fit_exponent: float = None
    fit_prefactor: float = None

    @property
    def supercritical_ok(self):
        l2 = [p.l2_norm for p in self.points]
        return bool(np.all(np.diff(l2) > 0)) and all(p.lam > self.lambda_1 for p in self.points)

    def rows(self):
        return [(p.lam, p.l2_norm, p.weighted_h1_norm, p.J, p.mu_1, p.min_u, p.newton_iters)
                for p in self.points]


def branch_grid(lambda_1, lambda_max, steps, delta0=0.02):
    """``steps`` values in (lam_1 (1 + delta0), lambda_max], geometric in lam - lam_1."""
    if steps < 2:
        raise ValidationError("continuation needs steps >= 2")
    lo = delta0 * lambda_1
    hi = lambda_max - lambda_1
    if not lambda_max > lambda_1 * (1.0 + delta0):
        raise ValidationError(
            f"lambda_max={lambda_max} must exceed lam_1 (1 + delta0) = {lambda_1 * (1 + delta0)}")
    return lambda_1 + np.geomspace(lo, hi, steps + 1)[1:]


def continue_branch(lambda_max, steps, params, ops, eig, cfg=NewtonConfig(), delta0=0.02,
                    stability=True, positivity_tol=-1e-10):
    """Natural continuation of the nonnegative branch bifurcating from (lam_1, 0)."""
    grid = branch_grid(eig.lam, lambda_max, steps, delta0)
    pts = []
    prev = []
    for k, lam in enumerate(grid):
        p = params.with_lambda(lam)
        if k == 0:
            guess = amplitude_seed(lam, eig, p, ops) * eig.u
        elif k == 1:
            guess = prev[-1][1] * np.sqrt((lam - eig.lam) / (prev[-1][0] - eig.lam))
        else:
            (l0, u0), (l1, u1) = prev[-2], prev[-1]
            guess = u1 + (lam - l1) / (l1 - l0) * (u1 - u0)
        res = solve_stationary(p, guess, ops, cfg, lambda_1=eig.lam)
        if res.trivial:
            raise BranchError(f"branch lost: Newton collapsed to the trivial state at lam={lam}", lam)
        u = res.u
        if u.min() < positivity_tol:
            raise BranchError(f"branch positivity violated at lam={lam}: min u = {u.min():.3e}", lam)
        nr = norms(u, ops)
        mu = linearized_spectrum(u, p, ops).mu_1 if stability else np.nan
        pts.append(BranchPoint(float(lam), u, nr["l2"], nr["weighted_h1"], lyapunov(u, p, ops), mu,
                               float(u.min()), res.iterations, res.residual))
        prev.append((lam, u))
    branch = Branch(eig.lam, pts)
    nfit = max(2, int(np.ceil(steps / 4)))
    x = np.log([q.lam - eig.lam for q in pts[:nfit]])
    y = np.log([q.l2_norm for q in pts[:nfit]])
    slope, icpt = np.polyfit(x, y, 1)
    branch.fit_exponent, branch.fit_prefactor = float(slope), float(np.exp(icpt))
    return branch


def random_positive_field(ops, seed, amplitude=1.0, bumps=4):
    """Sum of Gaussian bumps at random interior points times a boundary cutoff; positive inside.

    Drawn from a counter-based Philox generator so fields reproduce across platforms.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    mesh = ops.mesh
    R = mesh.spec.radius
    r_in = mesh.spec.inner_radius
    x = mesh.vertices
    val = np.zeros(mesh.nv)
    for _ in range(bumps):
        rho = r_in + (R - r_in) * np.sqrt(rng.uniform(0.05, 0.8))
        th = rng.uniform(0, 2 * np.pi)
        c = rho * np.array([np.cos(th), np.sin(th)])
        w = rng.uniform(0.15, 0.4) * R
        val += rng.uniform(0.5, 1.0) * np.exp(-np.sum((x - c) ** 2, axis=1) / (2 * w * w))
    rho = mesh.origin_distance
    cut = (R - rho) * (rho - r_in) / ((R - r_in) / 2) ** 2 if r_in > 0 else 1 - (rho / R) ** 2
    val = val * np.clip(cut, 0, None) + 0.05 * np.clip(cut, 0, None)
    val[mesh.boundary_flags] = 0.0
    return amplitude * val / val.max()


def constant_interior_field(ops, c):
    u = np.full(ops.mesh.nv, float(c))
    u[ops.mesh.boundary_flags] = 0.0
    return u


@dataclass
class UniquenessProbe:
    max_distance: float
    relative_distance: float
    outcomes: list
    n_nontrivial: int
    n_trivial: int
    n_failed: int
    n_sign_changing: int = 0


def uniqueness_probe(params, ops, eig, n_starts=5, cfg=NewtonConfig(), seed=0):
    """Newton from distinct positive starts; max pairwise weighted-H1 distance of nontrivial limits.

    Newton may cross zero and land on a solution of the other sign (the
    equation is odd in u). Such limits lie outside the nonnegative class, are
    reported as ``not_nonnegative`` and excluded from the distance.
    """
    if n_starts < 3:
        raise ValidationError(f"uniqueness probe needs n_starts >= 3, got {n_starts}")
    lam = params.lam
    t = amplitude_seed(lam, eig, params, ops) if lam > eig.lam else 1.0
    scale = t * eig.u.max()
    starts = [("scaled_eigenfunction", t * eig.u), ("constant_interior", constant_interior_field(ops, scale))]
    k = 0
    while len(starts) < n_starts:
        starts.append((f"random_positive[{seed + k}]", random_positive_field(ops, seed + k, scale)))
        k += 1
    outcomes, limits = [], []
    for name, u0 in starts:
        try:
            res = solve_stationary(params, u0, ops, cfg)
        except (NewtonError, BranchError) as exc:
            outcomes.append((name, "failed", str(exc)))
            continue
        if not res.trivial and res.u.min() < -1e-10 * np.abs(res.u).max():
            outcomes.append((name, "not_nonnegative", res.iterations))
            continue
        outcomes.append((name, "trivial" if res.trivial else "nontrivial", res.iterations))
        if not res.trivial:
            limits.append(res.u)
    dmax = 0.0
    for a, b in itertools.combinations(limits, 2):
        dmax = max(dmax, norms(a - b, ops)["weighted_h1"])
    ref = max((norms(u, ops)["weighted_h1"] for u in limits), default=0.0)
    rel = dmax / ref if ref > 0 else 0.0
    nt = sum(o[1] == "trivial" for o in outcomes)
    nf = sum(o[1] == "failed" for o in outcomes)
    ns = sum(o[1] == "not_nonnegative" for o in outcomes)
    return UniquenessProbe(dmax, rel, outcomes, len(limits), nt, nf, ns)


@dataclass
class ComparisonResult:
    violation: float
    max_difference: float
    lambda_1: float
    lambda_1_r: float
    min_interior_u_r: float
    shared_vertices: int


def truncation_comparison(lam_ratio, params, r, level, coeff, spec=DomainSpec.disk(1.0), cfg=NewtonConfig()):
    """Compare the annulus solution u_{lam,r} with the full-domain u_lam at lam = lam_ratio * lam_1.

    ``violation`` is the positive part of max(u_{lam,r} - u_lam) over the
    interior vertices of the annulus mesh; ``max_difference`` is the signed max.
    """
    full_mesh = build_mesh(spec, level)
    ops = WeightedOperatorSet(full_mesh, coeff)
    eig = principal_eigenpair(ops)
    lam = lam_ratio * eig.lam
    p = params.with_lambda(lam)
    ann_mesh = build_mesh(DomainSpec.annulus(spec.radius, r), level)
    ops_r = WeightedOperatorSet(ann_mesh, coeff)
    eig_r = principal_eigenpair(ops_r)
    if not lam > eig_r.lam:
        raise ValidationError(f"lam = {lam} <= lam_1,r = {eig_r.lam}: the annulus solution is trivial")
    u = solve_stationary(p, amplitude_seed(lam, eig, p, ops) * eig.u, ops, cfg, eig.lam)
    u_r = solve_stationary(p, amplitude_seed(lam, eig_r, p, ops_r) * eig_r.u, ops_r, cfg, eig_r.lam)
    if u.trivial or u_r.trivial:
        raise BranchError("comparison needs nontrivial solutions on both domains", lam)
    u_on_r = transfer(u.u, full_mesh, ann_mesh, outside=np.nan)
    inner = ~ann_mesh.boundary_flags
    diff = u_r.u[inner] - u_on_r[inner]
    dmax = float(np.nanmax(diff))
    return ComparisonResult(max(dmax, 0.0), dmax, eig.lam, eig_r.lam, float(u_r.u[inner].min()),
                            int(np.sum(np.isfinite(u_on_r[inner]))))

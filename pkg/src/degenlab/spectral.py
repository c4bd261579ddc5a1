"""Generalized symmetric eigenproblems K u = lam M u on the interior dofs."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .assembly import WeightedOperatorSet, nonlinear_residual
from .coefficients import ValidationError
from .geometry import DomainSpec, build_mesh, truncation_family


class EigenSolverError(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(f"{msg}; residual history tail {history[-5:]}")
        self.history = history


@dataclass
class EigenPair:
    lam: float
    u: np.ndarray
    residual: float
    iterations: int = 0


def _start_block(n, p, seed=0):
    rng = np.random.Generator(np.random.Philox(seed))
    X = rng.standard_normal((n, p))
    X[:, 0] = 1.0
    return X


def subspace_iteration(A, B, k, tol=1e-10, maxiter=300, guard=4, x0=None):
    """Smallest ``k`` eigenpairs of the SPD pencil (A, B) by inverse subspace iteration.

    Returns eigenvalues (ascending), B-orthonormal vectors (columns) and the
    relative residuals ``||A x - t B x|| / (|t| ||B x||)``.
    """
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k must lie in [1, {n}], got {k}")
    p = min(n, k + guard)
    lu = splu(A.tocsc())
    X = _start_block(n, p) if x0 is None else np.column_stack([x0, _start_block(n, p)[:, 1:]])[:, :p]
    history = []
    best, since = np.inf, 0
    for it in range(1, maxiter + 1):
        Y = lu.solve(B @ X)
        Q, _ = np.linalg.qr(Y)
        AQ, BQ = A @ Q, B @ Q
        theta, C = sla.eigh(Q.T @ AQ, Q.T @ BQ)
        X = Q @ C
        AX, BX = AQ @ C, BQ @ C
        res = np.linalg.norm(AX[:, :k] - BX[:, :k] * theta[:k], axis=0) / (
            np.abs(theta[:k]) * np.linalg.norm(BX[:, :k], axis=0))
        worst = float(res.max())
        history.append(worst)
        if worst <= tol:
            return theta[:k], X[:, :k], res, it
        if worst < 0.5 * best:
            best, since = worst, 0
        else:
            since += 1
            if since >= 15:
                raise EigenSolverError(f"subspace iteration stagnated at residual {worst:.3e} > tol {tol:.1e}",
                                       history)
    raise EigenSolverError(f"no convergence in {maxiter} iterations", history)


def _normalize(ops, v):
    u = ops.extend(v)
    u /= np.sqrt(u @ (ops.M @ u))
    if np.sum(ops.M @ u) < 0:
        u = -u
    return u


def eigen_modes(ops, k=1, tol=1e-10):
    """First ``k`` eigenpairs of the weighted Dirichlet problem, ascending, M-orthonormal."""
    theta, X, res, it = subspace_iteration(ops.K_int, ops.M_int, k, tol)
    return [EigenPair(float(theta[i]), _normalize(ops, X[:, i]), float(res[i]), it) for i in range(k)]


def principal_eigenpair(ops, tol=1e-10):
    """Principal pair (lam_1, u_1): ||u_1||_L2 = 1, sign fixed by a nonnegative integral."""
    return eigen_modes(ops, 1, tol)[0]


def rayleigh_quotient(u, ops):
    return float(u @ (ops.K @ u) / (u @ (ops.M @ u)))


@dataclass
class EigenFamilyRecord:
    radius: float
    lambda_1_trunc: float
    u: np.ndarray
    residual: float
    mesh: object = field(repr=False, default=None)
    extended: np.ndarray = field(repr=False, default=None)

    @property
    def extension_by_zero(self):
        return self.extended is not None


@dataclass
class TruncationStudy:
    kind: str
    records: list
    lambda_full: float = None
    monotone_ok: bool = False
    differences: list = field(default_factory=list)
    stabilizing_ok: bool = None
    extrapolated: float = None
    empirical_rate: float = None

    def rows(self):
        ok = self.monotone_ok
        return [(r.radius, r.lambda_1_trunc, r.residual, ok) for r in self.records]


def richardson_limit(radii, values):
    """Limit as radius -> 0 of values ~ L + C radius^p fitted to the last three points.

    Returns ``(L, p)``; ``p`` is the empirical rate.
    """
    r1, r2, r3 = radii[-3:]
    v1, v2, v3 = values[-3:]
    d1, d2 = v1 - v2, v2 - v3
    if d1 * d2 <= 0:
        raise ValueError("values are not monotone; no power-law fit")
    target = d1 / d2

    def f(p):
        return (r1 ** p - r2 ** p) / (r2 ** p - r3 ** p) - target

    p = brentq(f, 1e-6, 20.0)
    C = d2 / (r2 ** p - r3 ** p)
    return v3 - C * r3 ** p, p


def capacity_variable(radii, alpha, outer_radius=1.0, N=2):
    """g(r) = 1/(r^-k - R^-k), k = N - 2 + alpha: the sigma-capacity of B_r in B_R up to a constant."""
    k = N - 2.0 + alpha
    if not k > 0:
        raise ValidationError("capacity variable needs N - 2 + alpha > 0")
    r = np.asarray(radii, dtype=float)
    return 1.0 / (r ** -k - outer_radius ** -k)


def capacity_limit(radii, values, alpha, outer_radius=1.0, N=2):
    """Limit r -> 0 of lambda_1,r by eliminating the g and g^2 terms on the three smallest radii."""
    if len(radii) < 3:
        raise ValueError("need at least three radii")
    order = np.argsort(radii)[:3]
    g = capacity_variable(np.asarray(radii)[order], alpha, outer_radius, N)
    A = np.vander(g, 3, increasing=True)
    return float(np.linalg.solve(A, np.asarray(values, dtype=float)[order])[0])


def _solve_member(spec, coeff, level, tol):
    mesh = build_mesh(spec, level)
    ops = WeightedOperatorSet(mesh, coeff)
    return mesh, principal_eigenpair(ops, tol)


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def inner_truncation_study(spec, coeff, r_list, level, tol=1e-10, workers=1, extend=False):
    """Principal eigenvalues on the annuli spec minus B_r, for decreasing r."""
    if spec.kind != "disk":
        raise ValidationError("inner truncation study needs a disk domain")
    meshes = truncation_family(spec, r_list, level)
    full_mesh = build_mesh(spec, level)
    full_ops = WeightedOperatorSet(full_mesh, coeff)
    full = principal_eigenpair(full_ops, tol)

    def member(mesh):
        ops = WeightedOperatorSet(mesh, coeff)
        return mesh, principal_eigenpair(ops, tol)

    out = _map(member, meshes, workers)
    records = []
    for r, (mesh, ep) in zip(r_list, out):
        ext = None
        if extend:
            from .geometry import transfer
            ext = transfer(ep.u, mesh, full_mesh, outside=0.0)
        records.append(EigenFamilyRecord(float(r), ep.lam, ep.u, ep.residual, mesh, ext))
    lams = np.array([rec.lambda_1_trunc for rec in records])
    study = TruncationStudy("inner", records, full.lam)
    study.differences = list(-np.diff(lams))
    study.monotone_ok = bool(np.all(np.diff(lams) < 0))
    if len(records) >= 3 and study.monotone_ok:
        if coeff.alpha > 0:
            study.extrapolated = capacity_limit(r_list, lams, coeff.alpha, spec.radius)
        try:
            lim, study.empirical_rate = richardson_limit(list(r_list), list(lams))
            if study.extrapolated is None:
                study.extrapolated = lim
        except ValueError:
            pass
    return study


def outer_truncation_study(coeff, R_list, level, tol=1e-10, workers=1):
    """Principal eigenvalues on the balls B_R for increasing R (power_sum, beta > 2)."""
    if coeff.model != "power_sum":
        raise ValidationError("outer truncation requires a power_sum coefficient with beta > 2")
    if not coeff.beta > 2:
        raise ValidationError(f"beta <= 2 breaks compact embedding (beta = {coeff.beta})")
    meshes = truncation_family(DomainSpec.truncated_plane(R_list[0]), R_list, level)

    def member(mesh):
        ops = WeightedOperatorSet(mesh, coeff)
        return mesh, principal_eigenpair(ops, tol)

    out = _map(member, meshes, workers)
    records = [EigenFamilyRecord(float(R), ep.lam, ep.u, ep.residual, mesh)
               for R, (mesh, ep) in zip(R_list, out)]
    lams = np.array([r.lambda_1_trunc for r in records])
    diffs = -np.diff(lams)
    study = TruncationStudy("outer", records)
    study.differences = list(diffs)
    study.monotone_ok = bool(np.all(diffs > 0))
    study.stabilizing_ok = bool(np.all(np.diff(diffs) < 0)) if len(diffs) >= 2 else None
    return study


@dataclass
class StabilityReport:
    mu_1: float
    psi_1: np.ndarray
    identity_residual: float
    residual: float


def linearized_spectrum(u_eq, params, ops, tol=1e-10, stationarity_tol=1e-8):
    """Principal eigenpair of the linearization K - lam M + (2 gamma + 1) W(u) at an equilibrium.

    The shift by lam keeps the factorised operator K + (2 gamma + 1) W(u)
    positive definite, so the trivial state at lam > lam_1 is handled too.
    """
    u_eq = ops.check_boundary(u_eq, "equilibrium")
    r = np.linalg.norm(nonlinear_residual(u_eq, params, ops))
    if r > stationarity_tol:
        raise ValidationError(f"u_eq is not stationary: residual {r:.3e} > {stationarity_tol:.1e}")
    g = params.gamma
    A = ops.K_int
    if np.any(u_eq):
        A = (A + (2 * g + 1) * ops.weight_matrix(u_eq, 2 * g)).tocsr()
    theta, X, res, _ = subspace_iteration(A, ops.M_int, 1, tol)
    mu = float(theta[0] - params.lam)
    psi = _normalize(ops, X[:, 0])
    ident = np.nan
    if np.any(u_eq):
        lhs = 2 * g * float(psi @ ops.nonlinear_load(u_eq, 2 * g))
        rhs = mu * float(u_eq @ (ops.M @ psi))
        ident = abs(lhs - rhs) / abs(rhs) if rhs != 0 else np.inf
    return StabilityReport(mu, psi, ident, float(res[0]))

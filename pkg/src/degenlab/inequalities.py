"""Poincare and CKN constants, the Picone identity and a Harnack ratio probe."""
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import WeightedOperatorSet, p1_gradients
from .coefficients import ValidationError, two_star
from .quadrature import DEFAULT_RULE
from .spectral import principal_eigenpair


class AscentError(RuntimeError):
    pass


def poincare_constant(ops, tol=1e-10):
    """Best constant c in ||u||_L2^2 <= c a_sigma(u, u) over the discrete space, i.e. 1/lambda_1."""
    return 1.0 / principal_eigenpair(ops, tol).lam


def _ratio(v, ops, p, K):
    u = ops.extend(v)
    a = float(v @ (K @ v))
    return ops.power_integral(u, p) ** (2.0 / p) / a


def _ascend(v, ops, p, lu, K, maxiter, rtol):
    """Nonlinear inverse iteration v <- K^{-1} grad(1/2 ||v||_p^2); keeps the best iterate."""
    best = _ratio(v, ops, p, K)
    for _ in range(maxiter):
        u = ops.extend(np.abs(v))
        g = ops.nonlinear_load(u, p - 2.0)[ops.interior]
        w = lu.solve(g)
        if not np.all(np.isfinite(w)) or not np.any(w):
            raise AscentError("CKN ascent produced a non-finite or zero iterate")
        w = np.abs(w)
        w /= np.sqrt(w @ (K @ w))
        r = _ratio(w, ops, p, K)
        if not np.isfinite(r):
            raise AscentError("CKN ascent produced a non-finite ratio")
        v = w
        if r <= best * (1 + rtol):
            best = max(best, r)
            break
        best = r
    return best, v


def ckn_lower_bound(ops, params=None, n_starts=20, p=None, seed=0, maxiter=500, rtol=1e-12, return_field=False):
    """Lower bound on the best K in ||phi||_p^2 <= K int sigma |grad phi|^2.

    ``p`` defaults to the critical exponent of the alpha part of sigma. The
    starts are u_1 followed by seeded positive bump fields; the returned value is
    the largest ratio reached.
    """
    coeff = ops.coeff
    if not 0 < coeff.alpha < 2:
        raise ValidationError(f"alpha={coeff.alpha} not in (0,2)")
    if p is None:
        p = two_star(2 if params is None else params.N, coeff.alpha)
    if n_starts < 1:
        raise ValidationError("n_starts must be positive")
    from .stationary import random_positive_field
    K = ops.K_int
    lu = splu(K.tocsc())
    starts = [principal_eigenpair(ops).u]
    starts += [random_positive_field(ops, seed + k) for k in range(n_starts - 1)]
    best, best_v = -np.inf, None
    for u0 in starts:
        v = ops.restrict(u0)
        v = v / np.sqrt(v @ (K @ v))
        r, v = _ascend(v, ops, p, lu, K, maxiter, rtol)
        if r > best:
            best, best_v = r, v
    if return_field:
        return best, ops.extend(best_v)
    return best


def ckn_ratio(u, ops, p):
    """||u||_p^2 / a_sigma(u, u) for a single field."""
    return _ratio(ops.restrict(u), ops, p, ops.K_int)


def _quad_values(mesh, u, rule=DEFAULT_RULE):
    bary = rule.barycentric
    return u[mesh.triangles] @ bary.T


def picone_terms(u, v, mesh, eps=1e-8, rule=DEFAULT_RULE):
    """L and R at every quadrature point, shape (nt, nq).

    ``v`` is regularised as max(v, eps) so that u = k v gives u/v = k exactly
    wherever v exceeds eps. R uses the P1 interpolant of u^2/v.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    mesh_int = ~mesh.boundary_flags
    if np.any(v[mesh_int] <= 0):
        bad = int(np.flatnonzero(mesh_int & (v <= 0))[0])
        raise ValidationError(f"v must be positive at interior vertices (vertex {bad} has {v[bad]!r})")
    if np.any(u < 0):
        raise ValidationError("u must be nonnegative")
    G = p1_gradients(mesh)
    tri = mesh.triangles
    gu = np.einsum("tij,ti->tj", G, u[tri])
    gv = np.einsum("tij,ti->tj", G, v[tri])
    uq = _quad_values(mesh, u, rule)
    vq = np.maximum(_quad_values(mesh, v, rule), eps)
    q = uq / vq
    guu = np.sum(gu * gu, axis=1)[:, None]
    gvv = np.sum(gv * gv, axis=1)[:, None]
    guv = np.sum(gu * gv, axis=1)[:, None]
    L = guu + q * q * gvv - 2.0 * q * guv
    w = u * u / np.maximum(v, eps)
    gw = np.einsum("tij,ti->tj", G, w[tri])
    R = guu - np.sum(gw * gv, axis=1)[:, None]
    return L, np.broadcast_to(R, L.shape)


def picone_check(u, v, mesh, eps=1e-8):
    """Return (max |L - R|, min L) over quadrature points."""
    L, R = picone_terms(u, v, mesh, eps)
    return float(np.max(np.abs(L - R))), float(np.min(L))


@dataclass
class HarnackResult:
    ratio: float
    n_vertices: int
    touches_zero: bool


def harnack_probe(u, mesh, bounds):
    """max/min of u over vertices with a <= |x| <= b."""
    a, b = bounds
    if not 0 < a < b:
        raise ValidationError(f"need 0 < a < b, got ({a}, {b})")
    rho = mesh.origin_distance
    tol = 1e-12 * max(b, 1.0)
    sel = (rho >= a - tol) & (rho <= b + tol)
    if not np.any(sel):
        raise ValidationError(f"no vertices with {a} <= |x| <= {b}")
    vals = np.asarray(u, dtype=float)[sel]
    lo, hi = float(vals.min()), float(vals.max())
    if lo <= 0:
        return HarnackResult(np.inf, int(sel.sum()), True)
    return HarnackResult(hi / lo, int(sel.sum()), False)


@dataclass
class InequalityReport:
    poincare_c: float
    ckn_K_lower: float
    picone_max_LR_gap: float
    picone_min_L: float
    harnack_ratio: float
    level: int
    n_vertices: int
    domain: str

    def to_dict(self):
        d = asdict(self)
        return {
            "poincare_c": d["poincare_c"],
            "ckn_K_lower": d["ckn_K_lower"],
            "picone": {"max_gap": d["picone_max_LR_gap"], "min_L": d["picone_min_L"]},
            "harnack_ratio": d["harnack_ratio"] if np.isfinite(d["harnack_ratio"]) else "inf",
            "mesh": {"level": d["level"], "n_vertices": d["n_vertices"], "domain": d["domain"]},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def inequality_report(mesh, coeff, params=None, n_starts=20, harnack_bounds=(0.3, 0.6), seed=0):
    """Collect all constants for one mesh; Picone uses a seeded positive field against u_1."""
    ops = WeightedOperatorSet(mesh, coeff)
    eig = principal_eigenpair(ops)
    c = 1.0 / eig.lam
    K = ckn_lower_bound(ops, params, n_starts=n_starts, seed=seed) if 0 < coeff.alpha < 2 else float("nan")
    from .stationary import random_positive_field
    u = random_positive_field(ops, seed)
    gap, minL = picone_check(u, eig.u, mesh)
    h = harnack_probe(eig.u, mesh, harnack_bounds)
    return InequalityReport(c, K, gap, minL, h.ratio, mesh.level, mesh.nv, mesh.spec.kind)

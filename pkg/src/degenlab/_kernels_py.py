"""Pure-numpy implementation of the element kernels.

Mirrors ``_kernels.pyx`` operation for operation; results agree up to
summation order. Model codes: 0 constant, 1 power, 2 power_sum.
"""
import numpy as np

from .quadrature import DUNAVANT7_POINTS, DUNAVANT7_WEIGHTS, GL8_NODES, GL8_WEIGHTS

_PHI = np.column_stack([
    1.0 - DUNAVANT7_POINTS[:, 0] - DUNAVANT7_POINTS[:, 1],
    DUNAVANT7_POINTS[:, 0],
    DUNAVANT7_POINTS[:, 1],
])
_W = DUNAVANT7_WEIGHTS


def _sigma(x, y, model, alpha, beta):
    r2 = x * x + y * y
    if model == 1:
        return r2 ** (0.5 * alpha)
    return r2 ** (0.5 * alpha) + r2 ** (0.5 * beta)


def _q7(A, B, C, model, alpha, beta):
    # A, B, C: (k, 2) arrays
    area = 0.5 * np.abs((B[:, 0] - A[:, 0]) * (C[:, 1] - A[:, 1])
                        - (C[:, 0] - A[:, 0]) * (B[:, 1] - A[:, 1]))
    x = np.outer(A[:, 0], _PHI[:, 0]) + np.outer(B[:, 0], _PHI[:, 1]) + np.outer(C[:, 0], _PHI[:, 2])
    y = np.outer(A[:, 1], _PHI[:, 0]) + np.outer(B[:, 1], _PHI[:, 1]) + np.outer(C[:, 1], _PHI[:, 2])
    return 2.0 * area * (_sigma(x, y, model, alpha, beta) @ _W)


def _children(A, B, C):
    ab, bc, ca = 0.5 * (A + B), 0.5 * (B + C), 0.5 * (C + A)
    return [(A, ab, ca), (ab, B, bc), (ca, bc, C), (ab, bc, ca)]


def _segment_power(P, Q, a, tol):
    """Adaptive Gauss-Legendre for the integral of |P + t(Q-P)|^a over [0, 1]."""

    def gl(lo, hi):
        t = lo + (hi - lo) * GL8_NODES
        x = P[0] + t * (Q[0] - P[0])
        y = P[1] + t * (Q[1] - P[1])
        return (hi - lo) * np.dot(GL8_WEIGHTS, (x * x + y * y) ** (0.5 * a))

    def rec(lo, hi, whole, tau, depth):
        mid = 0.5 * (lo + hi)
        left, right = gl(lo, mid), gl(mid, hi)
        if abs(left + right - whole) <= tau or depth >= 40:
            return left + right
        return rec(lo, mid, left, 0.5 * tau, depth + 1) + rec(mid, hi, right, 0.5 * tau, depth + 1)

    whole = gl(0.0, 1.0)
    return rec(0.0, 1.0, whole, tol * abs(whole), 0)


def _duffy(B, C, area, model, alpha, beta, tol):
    # triangle (origin, B, C); x = s (B + t (C - B)), dx = 2 |T| s ds dt
    val = _segment_power(B, C, alpha, tol) / (2.0 + alpha)
    if model == 2:
        val += _segment_power(B, C, beta, tol) / (2.0 + beta)
    return 2.0 * area * val


def _area(A, B, C):
    return 0.5 * abs((B[0] - A[0]) * (C[1] - A[1]) - (C[0] - A[0]) * (B[1] - A[1]))


def _origin_split(A, B, C, model, alpha, beta, tol):
    """Integral over a triangle touching or containing the origin."""
    verts = [A, B, C]
    scale = max(np.hypot(*v) for v in verts)
    for k in range(3):
        if np.hypot(*verts[k]) <= 1e-14 * scale:
            P, Q = verts[(k + 1) % 3], verts[(k + 2) % 3]
            return _duffy(P, Q, _area(verts[k], P, Q), model, alpha, beta, tol)
    total = _area(A, B, C)
    out = 0.0
    O = np.zeros(2)
    for P, Q in ((A, B), (B, C), (C, A)):
        a = _area(O, P, Q)
        if a > 1e-14 * total:
            out += _duffy(P, Q, a, model, alpha, beta, tol)
    return out


def _touches_origin(A, B, C):
    """Mask of triangles whose closed hull contains the origin."""
    d = (B[:, 0] - A[:, 0]) * (C[:, 1] - A[:, 1]) - (C[:, 0] - A[:, 0]) * (B[:, 1] - A[:, 1])
    l1 = ((B[:, 0]) * (C[:, 1]) - (C[:, 0]) * (B[:, 1])) / d
    l2 = ((C[:, 0]) * (A[:, 1]) - (A[:, 0]) * (C[:, 1])) / d
    l3 = 1.0 - l1 - l2
    eps = -1e-14
    return (l1 >= eps) & (l2 >= eps) & (l3 >= eps)


def sigma_integrals(vertices, triangles, model, alpha, beta, rel_tol, max_depth):
    """Integral of the diffusion coefficient over every triangle.

    Returns ``(values, status)``; ``status[i] == 1`` flags a triangle whose
    adaptive subdivision hit ``max_depth`` before meeting ``rel_tol``.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    nt = len(triangles)
    A, B, C = (vertices[triangles[:, k]] for k in range(3))
    status = np.zeros(nt, dtype=np.int64)
    if model == 0:
        return 0.5 * np.abs((B[:, 0] - A[:, 0]) * (C[:, 1] - A[:, 1])
                            - (C[:, 0] - A[:, 0]) * (B[:, 1] - A[:, 1])), status

    values = np.zeros(nt)
    special = _touches_origin(A, B, C)
    seg_tol = 1e-2 * rel_tol
    for i in np.flatnonzero(special):
        values[i] = _origin_split(A[i], B[i], C[i], model, alpha, beta, seg_tol)

    idx = np.flatnonzero(~special)
    pa, pb, pc = A[idx], B[idx], C[idx]
    q = _q7(pa, pb, pc, model, alpha, beta)
    tau = rel_tol * np.abs(q)
    owner = idx
    depth = 0
    while len(owner):
        kids = _children(pa, pb, pc)
        kq = [_q7(a, b, c, model, alpha, beta) for a, b, c in kids]
        s = kq[0] + kq[1] + kq[2] + kq[3]
        done = np.abs(s - q) <= tau
        if depth >= max_depth:
            status[owner[~done]] = 1
            done[:] = True
        np.add.at(values, owner[done], s[done])
        keep = ~done
        if not keep.any():
            break
        pa = np.concatenate([k[0][keep] for k in kids])
        pb = np.concatenate([k[1][keep] for k in kids])
        pc = np.concatenate([k[2][keep] for k in kids])
        q = np.concatenate([v[keep] for v in kq])
        tau = np.tile(0.25 * tau[keep], 4)
        owner = np.tile(owner[keep], 4)
        depth += 1
    return values, status


def _quad_values(triangles, u):
    return u[triangles] @ _PHI.T  # (nt, 7)


def load_terms(triangles, areas, u, e):
    """Element vectors of the integral of |u|^e u phi_i, shape (nt, 3)."""
    uq = _quad_values(triangles, u)
    f = np.abs(uq) ** e * uq * _W
    return (2.0 * areas)[:, None] * (f @ _PHI)


def weight_matrix_terms(triangles, areas, u, e):
    """Element matrices of the integral of |u|^e phi_i phi_j, shape (nt, 3, 3)."""
    uq = _quad_values(triangles, u)
    g = np.abs(uq) ** e * _W
    return (2.0 * areas)[:, None, None] * np.einsum("tq,qi,qj->tij", g, _PHI, _PHI)


def power_integral(triangles, areas, u, p):
    """Integral of |u|^p over the mesh."""
    uq = _quad_values(triangles, u)
    return float(np.dot(2.0 * areas, np.abs(uq) ** p @ _W))

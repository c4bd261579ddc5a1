"""P1 discretisation of the weighted operator, the nonlinearity and the energy.

Fields are nodal vectors of length ``mesh.nv``. Dirichlet conditions are
imposed by elimination: residuals, Jacobians and the reduced operators
live on the interior vertices ``ops.interior``.
"""
import numpy as np
import scipy.sparse as sp

from . import kernels
from .coefficients import ValidationError
from .quadrature import DEFAULT_RULE


class AssemblyError(RuntimeError):
    pass


def p1_gradients(mesh):
    """Constant gradients of the three hat functions on each triangle, shape (nt, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    two_a = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    g = np.empty((mesh.nt, 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        g[:, i, 0] = (y[:, j] - y[:, k]) / two_a
        g[:, i, 1] = (x[:, k] - x[:, j]) / two_a
    return g


class _Pattern:
    """Scatter map from element 3x3 blocks to CSR storage (full and interior-reduced)."""

    def __init__(self, triangles, nv, interior):
        rows = np.repeat(triangles, 3, axis=1).ravel()
        cols = np.tile(triangles, (1, 3)).ravel()
        self.full = self._build(rows, cols, nv)
        red = np.full(nv, -1)
        red[interior] = np.arange(len(interior))
        r, c = red[rows], red[cols]
        keep = (r >= 0) & (c >= 0)
        self.keep = keep
        self.reduced = self._build(r[keep], c[keep], len(interior))

    @staticmethod
    def _build(rows, cols, n):
        key = rows.astype(np.int64) * n + cols
        uniq, pos = np.unique(key, return_inverse=True)
        r, c = np.divmod(uniq, n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, r + 1, 1)
        return dict(pos=pos, indices=c.astype(np.int32), indptr=np.cumsum(indptr).astype(np.int32),
                    n=n, nnz=len(uniq))

    def _matrix(self, part, vals):
        data = np.bincount(part["pos"], weights=vals, minlength=part["nnz"])
        return sp.csr_matrix((data, part["indices"], part["indptr"]), shape=(part["n"], part["n"]))

    def full_matrix(self, local):
        return self._matrix(self.full, local.ravel())

    def reduced_matrix(self, local):
        return self._matrix(self.reduced, local.ravel()[self.keep])


def element_sigma_integrals(mesh, coeff, rule=DEFAULT_RULE, backend=None):
    """Integral of sigma over each triangle, adaptively to ``rule.rel_tol``."""
    coeff.check()
    vals, status = kernels.sigma_integrals(
        mesh.vertices, mesh.triangles, coeff.kernel_model, coeff.alpha,
        coeff.beta or 0.0, rule.rel_tol, rule.max_depth, backend=backend)
    bad = np.flatnonzero(status)
    if len(bad):
        t = bad[0]
        raise AssemblyError(
            f"sigma quadrature did not reach rel tol {rule.rel_tol} within depth {rule.max_depth} "
            f"on triangle {t} (vertices {mesh.vertices[mesh.triangles[t]].tolist()})"
            + (f" and {len(bad) - 1} others" if len(bad) > 1 else ""))
    return vals


def _stiffness_local(mesh, sigma_t):
    g = p1_gradients(mesh)
    return sigma_t[:, None, None] * np.einsum("tik,tjk->tij", g, g)


def _mass_local(mesh):
    a = mesh.areas()
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return a[:, None, None] * base


def assemble_stiffness(mesh, coeff, rule=DEFAULT_RULE, backend=None):
    """Full weighted stiffness matrix, entries of integral sigma grad phi_i . grad phi_j."""
    pat = _Pattern(mesh.triangles, mesh.nv, mesh.interior)
    return pat.full_matrix(_stiffness_local(mesh, element_sigma_integrals(mesh, coeff, rule, backend)))


def assemble_mass(mesh):
    """Full consistent P1 mass matrix."""
    pat = _Pattern(mesh.triangles, mesh.nv, mesh.interior)
    return pat.full_matrix(_mass_local(mesh))


class WeightedOperatorSet:
    """Assembled operators on one mesh, with reduced (interior) copies.

    Attributes
    ----------
    K, M : csr_matrix
        Full stiffness and mass matrices.
    K_int, M_int : csr_matrix
        Restrictions to the interior vertices.
    interior : ndarray
        Indices of the non-boundary vertices.
    """

    def __init__(self, mesh, coeff, rule=DEFAULT_RULE, backend=None):
        self.mesh = mesh
        self.coeff = coeff
        self.rule = rule
        self.backend = backend
        self.interior = mesh.interior
        if len(self.interior) == 0:
            raise ValidationError("mesh has no interior vertices")
        self.areas = mesh.areas()
        self.sigma_t = element_sigma_integrals(mesh, coeff, rule, backend)
        self._pattern = _Pattern(mesh.triangles, mesh.nv, self.interior)
        k_loc = _stiffness_local(mesh, self.sigma_t)
        m_loc = _mass_local(mesh)
        self.K = self._pattern.full_matrix(k_loc)
        self.M = self._pattern.full_matrix(m_loc)
        self.K_int = self._pattern.reduced_matrix(k_loc)
        self.M_int = self._pattern.reduced_matrix(m_loc)

    @property
    def n_interior(self):
        return len(self.interior)

    def extend(self, v):
        """Interior vector -> full field with zero boundary values."""
        u = np.zeros(self.mesh.nv)
        u[self.interior] = v
        return u

    def restrict(self, u):
        return np.asarray(u, dtype=float)[self.interior]

    def check_boundary(self, u, what="field"):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.mesh.nv,):
            raise ValidationError(f"{what} has length {u.shape}, mesh has {self.mesh.nv} vertices")
        b = np.abs(u[self.mesh.boundary_flags])
        if b.size and b.max() > 1e-12 * max(1.0, np.abs(u).max()):
            raise ValidationError(f"{what} violates the Dirichlet condition (max boundary value {b.max():.3e})")
        return u

    def nonlinear_load(self, u, e):
        """Vector of the integral of |u|^e u phi_i over all vertices."""
        loc = kernels.load_terms(self.mesh.triangles, self.areas, u, e, backend=self.backend)
        return np.bincount(self.mesh.triangles.ravel(), weights=loc.ravel(), minlength=self.mesh.nv)

    def weight_matrix(self, u, e):
        """Interior matrix of the integral of |u|^e phi_i phi_j."""
        loc = kernels.weight_matrix_terms(self.mesh.triangles, self.areas, u, e, backend=self.backend)
        return self._pattern.reduced_matrix(loc)

    def power_integral(self, u, p):
        return kernels.power_integral(self.mesh.triangles, self.areas, u, p, backend=self.backend)


def nonlinear_residual(u, params, ops):
    """Interior residual of K u - lam M u + N(u), N_i(u) = integral |u|^{2 gamma} u phi_i."""
    if not params.gamma > 0:
        raise ValidationError("gamma must be positive")
    u = ops.check_boundary(u)
    r = ops.K @ u - params.lam * (ops.M @ u) + ops.nonlinear_load(u, 2.0 * params.gamma)
    return r[ops.interior]


def jacobian(u, params, ops):
    """Interior Jacobian K - lam M + (2 gamma + 1) W(u)."""
    if not params.gamma > 0:
        raise ValidationError("gamma must be positive")
    u = ops.check_boundary(u)
    g = params.gamma
    J = ops.K_int - params.lam * ops.M_int
    if np.any(u):
        J = J + (2.0 * g + 1.0) * ops.weight_matrix(u, 2.0 * g)
    return J.tocsr()


def lyapunov(u, params, ops):
    """Discrete energy 1/2 u'Ku - lam/2 u'Mu + 1/(2 gamma + 2) integral |u|^{2 gamma + 2}."""
    u = ops.check_boundary(u)
    p = 2.0 * params.gamma + 2.0
    return float(0.5 * u @ (ops.K @ u) - 0.5 * params.lam * u @ (ops.M @ u)
                 + ops.power_integral(u, p) / p)


def norms(u, ops, p=None):
    """``l2``, ``weighted_h1`` and, when ``p`` is given, the L^p norm by quadrature."""
    u = np.asarray(u, dtype=float)
    out = {
        "l2": float(np.sqrt(max(u @ (ops.M @ u), 0.0))),
        "weighted_h1": float(np.sqrt(max(u @ (ops.K @ u), 0.0))),
    }
    if p is not None:
        if p < 1:
            raise ValidationError(f"p must be >= 1, got {p}")
        out["lp"] = ops.power_integral(u, p) ** (1.0 / p)
    return out


def _smooth_random_field(ops, rng, scale, bumps=5):
    """Signed sum of Gaussian bumps times a boundary cutoff (zero on the boundary)."""
    mesh = ops.mesh
    R, r0 = mesh.spec.radius, mesh.spec.inner_radius
    rho = mesh.origin_distance
    x = mesh.vertices
    u = np.zeros(mesh.nv)
    for _ in range(bumps):
        rr = r0 + (R - r0) * rng.uniform(0.1, 0.9)
        th = rng.uniform(0, 2 * np.pi)
        c = rr * np.array([np.cos(th), np.sin(th)])
        w = rng.uniform(0.1, 0.4) * R
        u += rng.normal() * np.exp(-np.sum((x - c) ** 2, axis=1) / (2 * w * w))
    cut = np.clip((R - rho) * (rho - r0), 0.0, None) / ((R - r0) / 2) ** 2
    u = scale * u * cut
    u[mesh.boundary_flags] = 0.0
    return u


def gradient_consistency(params, ops, n_fields=10, seed=0, eps=1e-6):
    """Central finite-difference checks at seeded smooth random fields of either sign.

    Returns ``(grad_error, jac_error)``, the worst relative errors of
    (J(u + e d) - J(u - e d)) / 2e against r(u).d, normalised by |r||d|, and of
    (r(u + e d) - r(u - e d)) / 2e against Jac(u) d, normalised by |Jac(u) d|.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    ge = je = 0.0
    for _ in range(n_fields):
        u = _smooth_random_field(ops, rng, 3.0)
        d = _smooth_random_field(ops, rng, 1.0)
        h = eps * np.linalg.norm(u) / np.linalg.norm(d)
        r = nonlinear_residual(u, params, ops)
        dv = d[ops.interior]
        fd = (lyapunov(u + h * d, params, ops) - lyapunov(u - h * d, params, ops)) / (2 * h)
        ge = max(ge, abs(fd - r @ dv) / (np.linalg.norm(r) * np.linalg.norm(dv)))
        Jd = jacobian(u, params, ops) @ dv
        fdr = (nonlinear_residual(u + h * d, params, ops) - nonlinear_residual(u - h * d, params, ops)) / (2 * h)
        je = max(je, np.linalg.norm(fdr - Jd) / np.linalg.norm(Jd))
    return float(ge), float(je)


def write_field(u, path=None):
    """ASCII dump ``FIELD nv`` then one value per line (round-trip precision)."""
    text = f"FIELD {len(u)}\n" + "".join(f"{float(v) + 0.0!r}\n" for v in u)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_field(text):
    rows = text.strip().splitlines()
    head = rows[0].split()
    if head[0] != "FIELD":
        raise ValueError("not a field dump")
    n = int(head[1])
    vals = np.array([float(r) for r in rows[1:1 + n]])
    if len(vals) != n:
        raise ValueError(f"field dump declares {n} values, found {len(vals)}")
    return vals

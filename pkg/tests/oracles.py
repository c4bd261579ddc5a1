"""Independent reference values for the tests.

Radial problems are solved as 1-D ODEs; nothing here touches the finite
element code.
"""
import math

import mpmath
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

J01_SQ = 5.783185962946784  # j_{0,1}^2


def bessel_lambda1(alpha, R=1.0):
    """Principal eigenvalue of -div(|x|^alpha grad u) on the 2-D ball B_R."""
    s = 2.0 - alpha
    nu = alpha / s
    j = float(mpmath.besseljzero(nu, 1))
    return (s / 2.0) ** 2 * j * j / R ** s


def _sigma(rho, alpha, beta):
    v = rho ** alpha
    return v + rho ** beta if beta is not None else v


def _rhs(lam, alpha, beta, nonlinear):
    def f(rho, y):
        u, q = y  # q = rho sigma u'
        src = lam * u - (u ** 3 if nonlinear else 0.0)
        return [q / (rho * _sigma(rho, alpha, beta)), -rho * src]
    return f


def _series_start(lam, alpha, rho0, a=1.0, nonlinear=False):
    """u and rho sigma u' at rho0 from the power series in t = rho^(2-alpha)."""
    s = 2.0 - alpha
    c = [a]
    for k in range(1, 8):
        c.append(-lam * c[-1] / (k * s * (k * s + alpha)))
    if nonlinear:  # first correction of the cubic term
        c[1] = -(lam * a - a ** 3) / (s * (s + alpha))
    t = rho0 ** s
    u = sum(ck * t ** k for k, ck in enumerate(c))
    du = sum(k * s * ck * rho0 ** (k * s - 1) for k, ck in enumerate(c) if k)
    return u, rho0 * rho0 ** alpha * du


def shoot_disk(lam, alpha, beta=None, R=1.0, rho0=1e-5, a=1.0, nonlinear=False):
    u0, q0 = _series_start(lam, alpha, rho0, a, nonlinear)
    sol = solve_ivp(_rhs(lam, alpha, beta, nonlinear), (rho0, R), [u0, q0], method="DOP853",
                    rtol=1e-12, atol=1e-14)
    return sol.y[0, -1]


def shoot_annulus(lam, alpha, beta, r, R=1.0):
    sol = solve_ivp(_rhs(lam, alpha, beta, False), (r, R), [0.0, 1.0], method="DOP853",
                    rtol=1e-12, atol=1e-14)
    return sol.y[0, -1]


def _first_root(f, lo, hi, n=400):
    grid = np.linspace(lo, hi, n)
    vals = [f(x) for x in grid]
    for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
        if fa == 0:
            return a
        if fa * fb < 0:
            return brentq(f, a, b, xtol=1e-14, rtol=1e-14)
    raise ValueError("no sign change")


def radial_lambda1(alpha, beta=None, R=1.0, r=None, lam_max=None):
    """Principal eigenvalue by shooting; annulus when ``r`` is given."""
    guess = bessel_lambda1(alpha, R) if beta is None else bessel_lambda1(alpha, R) / 4
    hi = lam_max or (8.0 * bessel_lambda1(alpha, min(R, 1.0)) if r is None else 40.0 / (R - r) ** 2 + 2 * guess)
    lo = 1e-3 * guess
    if r is None:
        return _first_root(lambda l: shoot_disk(l, alpha, beta, R), lo, hi)
    return _first_root(lambda l: shoot_annulus(l, alpha, beta, r, R), lo, hi, n=800)


def radial_equilibrium(lam, alpha, R=1.0):
    """Centre value a of the positive radial solution of -div(rho^alpha grad u) = lam u - u^3, u(R) = 0."""
    f = lambda a: shoot_disk(lam, alpha, None, R, a=a, nonlinear=True)
    return _first_root(f, 1e-3, 4.0 * math.sqrt(lam), n=200)


def sigma_triangle_polar(p1, p2, alpha, dps=30):
    """Integral of |x|^alpha over the triangle (0, p1, p2) in polar coordinates."""
    mpmath.mp.dps = dps
    p1 = [mpmath.mpf(float(v)) for v in p1]
    p2 = [mpmath.mpf(float(v)) for v in p2]
    e = [p2[0] - p1[0], p2[1] - p1[1]]
    n = [e[1], -e[0]]
    nn = mpmath.sqrt(n[0] ** 2 + n[1] ** 2)
    d = abs(n[0] * p1[0] + n[1] * p1[1]) / nn
    phi0 = mpmath.atan2(n[1], n[0]) if n[0] * p1[0] + n[1] * p1[1] > 0 else mpmath.atan2(-n[1], -n[0])
    a1 = mpmath.atan2(p1[1], p1[0])
    a2 = mpmath.atan2(p2[1], p2[0])
    da = (a2 - a1 + mpmath.pi) % (2 * mpmath.pi) - mpmath.pi
    f = lambda phi: (d / mpmath.cos(phi - phi0)) ** (alpha + 2) / (alpha + 2)
    return float(abs(mpmath.quad(f, [a1, a1 + da])))


def cotangent_laplacian(vertices, triangles):
    """Dense P1 stiffness matrix for sigma = 1 from the cotangent formula."""
    n = len(vertices)
    K = np.zeros((n, n))
    for tri in triangles:
        for k in range(3):
            i, j, o = tri[(k + 1) % 3], tri[(k + 2) % 3], tri[k]
            a = vertices[i] - vertices[o]
            b = vertices[j] - vertices[o]
            cot = np.dot(a, b) / abs(a[0] * b[1] - a[1] * b[0])
            K[i, j] -= 0.5 * cot
            K[j, i] -= 0.5 * cot
            K[i, i] += 0.5 * cot
            K[j, j] += 0.5 * cot
    return K

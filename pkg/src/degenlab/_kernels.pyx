# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, fabs, sqrt

from .quadrature import DUNAVANT7_POINTS, DUNAVANT7_WEIGHTS, GL8_NODES, GL8_WEIGHTS

cnp.import_array()

cdef double QX[7]
cdef double QY[7]
cdef double QW[7]
cdef double GX[8]
cdef double GW[8]

for _i in range(7):
    QX[_i] = DUNAVANT7_POINTS[_i, 0]
    QY[_i] = DUNAVANT7_POINTS[_i, 1]
    QW[_i] = DUNAVANT7_WEIGHTS[_i]
for _i in range(8):
    GX[_i] = GL8_NODES[_i]
    GW[_i] = GL8_WEIGHTS[_i]


cdef inline int _int_exponent(double e):
    if e >= 0.0 and e <= 32.0 and e == <double>(<int>e):
        return <int>e
    return -1


cdef inline double _apow(double a, double e, int ie) nogil:
    """|a|^e, by repeated squaring when e is a small nonnegative integer."""
    cdef double r = 1.0, b = fabs(a)
    if ie < 0:
        return pow(b, e)
    while ie:
        if ie & 1:
            r *= b
        b *= b
        ie >>= 1
    return r


cdef inline double _sigma(double x, double y, int model, double alpha, double beta) nogil:
    cdef double r2 = x * x + y * y
    if model == 1:
        return pow(r2, 0.5 * alpha)
    return pow(r2, 0.5 * alpha) + pow(r2, 0.5 * beta)


cdef inline double _area(double ax, double ay, double bx, double by, double cx, double cy) nogil:
    return 0.5 * fabs((bx - ax) * (cy - ay) - (cx - ax) * (by - ay))


cdef double _q7(double ax, double ay, double bx, double by, double cx, double cy,
                int model, double alpha, double beta) nogil:
    cdef double s = 0.0, l0, x, y
    cdef int q
    for q in range(7):
        l0 = 1.0 - QX[q] - QY[q]
        x = l0 * ax + QX[q] * bx + QY[q] * cx
        y = l0 * ay + QX[q] * by + QY[q] * cy
        s += QW[q] * _sigma(x, y, model, alpha, beta)
    return 2.0 * _area(ax, ay, bx, by, cx, cy) * s


cdef double _adapt(double ax, double ay, double bx, double by, double cx, double cy,
                   double whole, double tau, int depth, int max_depth,
                   int model, double alpha, double beta, int* fail) nogil:
    cdef double abx = 0.5 * (ax + bx), aby = 0.5 * (ay + by)
    cdef double bcx = 0.5 * (bx + cx), bcy = 0.5 * (by + cy)
    cdef double cax = 0.5 * (cx + ax), cay = 0.5 * (cy + ay)
    cdef double q0 = _q7(ax, ay, abx, aby, cax, cay, model, alpha, beta)
    cdef double q1 = _q7(abx, aby, bx, by, bcx, bcy, model, alpha, beta)
    cdef double q2 = _q7(cax, cay, bcx, bcy, cx, cy, model, alpha, beta)
    cdef double q3 = _q7(abx, aby, bcx, bcy, cax, cay, model, alpha, beta)
    cdef double s = q0 + q1 + q2 + q3
    if fabs(s - whole) <= tau:
        return s
    if depth >= max_depth:
        fail[0] = 1
        return s
    tau *= 0.25
    return (_adapt(ax, ay, abx, aby, cax, cay, q0, tau, depth + 1, max_depth, model, alpha, beta, fail)
            + _adapt(abx, aby, bx, by, bcx, bcy, q1, tau, depth + 1, max_depth, model, alpha, beta, fail)
            + _adapt(cax, cay, bcx, bcy, cx, cy, q2, tau, depth + 1, max_depth, model, alpha, beta, fail)
            + _adapt(abx, aby, bcx, bcy, cax, cay, q3, tau, depth + 1, max_depth, model, alpha, beta, fail))


cdef double _gl(double px, double py, double qx, double qy, double a, double lo, double hi) nogil:
    cdef double s = 0.0, t, x, y
    cdef int k
    for k in range(8):
        t = lo + (hi - lo) * GX[k]
        x = px + t * (qx - px)
        y = py + t * (qy - py)
        s += GW[k] * pow(x * x + y * y, 0.5 * a)
    return (hi - lo) * s


cdef double _seg_rec(double px, double py, double qx, double qy, double a,
                     double lo, double hi, double whole, double tau, int depth) nogil:
    cdef double mid = 0.5 * (lo + hi)
    cdef double left = _gl(px, py, qx, qy, a, lo, mid)
    cdef double right = _gl(px, py, qx, qy, a, mid, hi)
    if fabs(left + right - whole) <= tau or depth >= 40:
        return left + right
    return (_seg_rec(px, py, qx, qy, a, lo, mid, left, 0.5 * tau, depth + 1)
            + _seg_rec(px, py, qx, qy, a, mid, hi, right, 0.5 * tau, depth + 1))


cdef double _segment_power(double px, double py, double qx, double qy, double a, double tol) nogil:
    cdef double whole = _gl(px, py, qx, qy, a, 0.0, 1.0)
    return _seg_rec(px, py, qx, qy, a, 0.0, 1.0, whole, tol * fabs(whole), 0)


cdef double _duffy(double px, double py, double qx, double qy, double area,
                   int model, double alpha, double beta, double tol) nogil:
    cdef double val = _segment_power(px, py, qx, qy, alpha, tol) / (2.0 + alpha)
    if model == 2:
        val += _segment_power(px, py, qx, qy, beta, tol) / (2.0 + beta)
    return 2.0 * area * val


cdef double _origin_split(double* xs, double* ys, int model, double alpha, double beta, double tol) nogil:
    cdef double scale = 0.0, r, total, a, out = 0.0
    cdef int k, p, q
    for k in range(3):
        r = sqrt(xs[k] * xs[k] + ys[k] * ys[k])
        if r > scale:
            scale = r
    for k in range(3):
        if sqrt(xs[k] * xs[k] + ys[k] * ys[k]) <= 1e-14 * scale:
            p = (k + 1) % 3
            q = (k + 2) % 3
            return _duffy(xs[p], ys[p], xs[q], ys[q],
                          _area(xs[k], ys[k], xs[p], ys[p], xs[q], ys[q]),
                          model, alpha, beta, tol)
    total = _area(xs[0], ys[0], xs[1], ys[1], xs[2], ys[2])
    for k in range(3):
        p = (k + 1) % 3
        a = _area(0.0, 0.0, xs[k], ys[k], xs[p], ys[p])
        if a > 1e-14 * total:
            out += _duffy(xs[k], ys[k], xs[p], ys[p], a, model, alpha, beta, tol)
    return out


def sigma_integrals(const double[:, ::1] vertices, const long[:, ::1] triangles, int model,
                    double alpha, double beta, double rel_tol, int max_depth):
    cdef Py_ssize_t nt = triangles.shape[0], i
    cdef int k, fail
    cdef double xs[3]
    cdef double ys[3]
    cdef double d, l1, l2, l3, q
    values = np.zeros(nt)
    status = np.zeros(nt, dtype=np.int64)
    cdef double[::1] v = values
    cdef long[::1] st = status
    with nogil:
        for i in range(nt):
            for k in range(3):
                xs[k] = vertices[triangles[i, k], 0]
                ys[k] = vertices[triangles[i, k], 1]
            if model == 0:
                v[i] = _area(xs[0], ys[0], xs[1], ys[1], xs[2], ys[2])
                continue
            d = (xs[1] - xs[0]) * (ys[2] - ys[0]) - (xs[2] - xs[0]) * (ys[1] - ys[0])
            l1 = (xs[1] * ys[2] - xs[2] * ys[1]) / d
            l2 = (xs[2] * ys[0] - xs[0] * ys[2]) / d
            l3 = 1.0 - l1 - l2
            if l1 >= -1e-14 and l2 >= -1e-14 and l3 >= -1e-14:
                v[i] = _origin_split(xs, ys, model, alpha, beta, 1e-2 * rel_tol)
                continue
            q = _q7(xs[0], ys[0], xs[1], ys[1], xs[2], ys[2], model, alpha, beta)
            fail = 0
            v[i] = _adapt(xs[0], ys[0], xs[1], ys[1], xs[2], ys[2], q, rel_tol * fabs(q),
                          0, max_depth, model, alpha, beta, &fail)
            st[i] = fail
    return values, status


def load_terms(const long[:, ::1] triangles, const double[::1] areas, const double[::1] u, double e):
    cdef Py_ssize_t nt = triangles.shape[0], t
    cdef int q, i
    cdef double uq, f, l[3]
    cdef int ie = _int_exponent(e)
    out = np.zeros((nt, 3))
    cdef double[:, ::1] o = out
    with nogil:
        for t in range(nt):
            for q in range(7):
                l[0] = 1.0 - QX[q] - QY[q]
                l[1] = QX[q]
                l[2] = QY[q]
                uq = l[0] * u[triangles[t, 0]] + l[1] * u[triangles[t, 1]] + l[2] * u[triangles[t, 2]]
                f = 2.0 * areas[t] * QW[q] * _apow(uq, e, ie) * uq
                for i in range(3):
                    o[t, i] += f * l[i]
    return out


def weight_matrix_terms(const long[:, ::1] triangles, const double[::1] areas, const double[::1] u, double e):
    cdef Py_ssize_t nt = triangles.shape[0], t
    cdef int q, i, j
    cdef double uq, g, l[3]
    cdef int ie = _int_exponent(e)
    out = np.zeros((nt, 3, 3))
    cdef double[:, :, ::1] o = out
    with nogil:
        for t in range(nt):
            for q in range(7):
                l[0] = 1.0 - QX[q] - QY[q]
                l[1] = QX[q]
                l[2] = QY[q]
                uq = l[0] * u[triangles[t, 0]] + l[1] * u[triangles[t, 1]] + l[2] * u[triangles[t, 2]]
                g = 2.0 * areas[t] * QW[q] * _apow(uq, e, ie)
                for i in range(3):
                    for j in range(3):
                        o[t, i, j] += g * l[i] * l[j]
    return out


def power_integral(const long[:, ::1] triangles, const double[::1] areas, const double[::1] u, double p):
    cdef Py_ssize_t nt = triangles.shape[0], t
    cdef int q
    cdef double uq, s = 0.0, l0
    cdef int ie = _int_exponent(p)
    with nogil:
        for t in range(nt):
            for q in range(7):
                l0 = 1.0 - QX[q] - QY[q]
                uq = l0 * u[triangles[t, 0]] + QX[q] * u[triangles[t, 1]] + QY[q] * u[triangles[t, 2]]
                s += 2.0 * areas[t] * QW[q] * _apow(uq, p, ie)
    return s

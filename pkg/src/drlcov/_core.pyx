# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.

Every function here has a numpy/pure-Python twin in ``_fallback`` with the
same signature and semantics; ``drlcov.kernels`` picks one at import.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sin, cos, floor, fabs

cnp.import_array()

cdef double LN2 = 0.6931471805599453


def conditional_affinities(double[:, ::1] sqdist, double perplexity,
                           double tol=1e-5, int max_iter=200):
    """Row-wise Gaussian conditionals p(j|i) with entropy log2(perplexity).

    Returns ``(P, betas, failed_row)``; ``failed_row`` is -1 on success.
    """
    cdef Py_ssize_t n = sqdist.shape[0]
    cdef Py_ssize_t i, j
    cdef int it
    cdef double beta, lo, hi, dmin, d, p, sum_p, sum_dp, entropy, diff
    cdef double target = log(perplexity)
    cdef double tol_nat = tol * LN2
    cdef bint has_hi, done
    P_arr = np.zeros((n, n), dtype=np.float64)
    betas_arr = np.zeros(n, dtype=np.float64)
    cdef double[:, ::1] P = P_arr
    cdef double[::1] betas = betas_arr

    for i in range(n):
        dmin = 1e300
        for j in range(n):
            if j != i and sqdist[i, j] < dmin:
                dmin = sqdist[i, j]
        beta = 1.0
        lo = 0.0
        hi = 0.0
        has_hi = False
        done = False
        for it in range(max_iter):
            sum_p = 0.0
            sum_dp = 0.0
            for j in range(n):
                if j == i:
                    continue
                d = sqdist[i, j] - dmin
                p = exp(-d * beta)
                P[i, j] = p
                sum_p += p
                sum_dp += d * p
            entropy = log(sum_p) + beta * sum_dp / sum_p
            diff = entropy - target
            if fabs(diff) < tol_nat:
                done = True
                break
            if diff > 0:
                lo = beta
                if has_hi:
                    beta = 0.5 * (beta + hi)
                else:
                    beta = beta * 2.0
            else:
                hi = beta
                has_hi = True
                beta = 0.5 * (beta + lo)
        if not done:
            return P_arr, betas_arr, i
        for j in range(n):
            P[i, j] /= sum_p
        betas[i] = beta
    return P_arr, betas_arr, -1


def tsne_gradient(double[:, ::1] Y, double[:, ::1] P, double exaggeration,
                  bint with_kl, double p_log_p=0.0):
    """KL(P||Q) gradient for a 2-D Student-t embedding.

    P must be symmetric with zero diagonal. Returns ``(grad, kl)``; ``kl``
    is NaN unless ``with_kl``. ``p_log_p`` is the constant sum(P log P).
    """
    cdef Py_ssize_t n = Y.shape[0]
    cdef Py_ssize_t i, j
    cdef double d0, d1, num, a, r, z = 0.0, cross = 0.0, pij
    cdef double ai0, ai1, ri0, ri1, yi0, yi1, kl
    attr_arr = np.zeros((n, 2), dtype=np.float64)
    rep_arr = np.zeros((n, 2), dtype=np.float64)
    cdef double[:, ::1] attr = attr_arr
    cdef double[:, ::1] rep = rep_arr

    for i in range(n):
        yi0 = Y[i, 0]
        yi1 = Y[i, 1]
        ai0 = 0.0
        ai1 = 0.0
        ri0 = 0.0
        ri1 = 0.0
        for j in range(i + 1, n):
            d0 = yi0 - Y[j, 0]
            d1 = yi1 - Y[j, 1]
            num = 1.0 / (1.0 + d0 * d0 + d1 * d1)
            z += num
            pij = P[i, j]
            a = exaggeration * pij * num
            r = num * num
            ai0 += a * d0
            ai1 += a * d1
            ri0 += r * d0
            ri1 += r * d1
            attr[j, 0] -= a * d0
            attr[j, 1] -= a * d1
            rep[j, 0] -= r * d0
            rep[j, 1] -= r * d1
            if with_kl and pij > 0.0:
                cross += pij * log(num)
        attr[i, 0] += ai0
        attr[i, 1] += ai1
        rep[i, 0] += ri0
        rep[i, 1] += ri1
    z *= 2.0
    grad = 4.0 * (attr_arr - rep_arr / z)
    if with_kl:
        kl = p_log_p - 2.0 * cross + log(z)
    else:
        kl = float("nan")
    return grad, kl


cpdef tuple cartpole_step(double x, double x_dot, double theta, double theta_dot,
                          double force, double gravity, double masscart,
                          double masspole, double half_length, double dt,
                          bint rk4):
    """Advance the cart-pole ODE one step (classic RK4 or explicit Euler)."""
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double s[4]
    cdef double h = 0.5 * dt
    s[0] = x; s[1] = x_dot; s[2] = theta; s[3] = theta_dot
    _cartpole_deriv(s, force, gravity, masscart, masspole, half_length, k1)
    if not rk4:
        return (x + dt * k1[0], x_dot + dt * k1[1],
                theta + dt * k1[2], theta_dot + dt * k1[3])
    s[0] = x + h * k1[0]; s[1] = x_dot + h * k1[1]
    s[2] = theta + h * k1[2]; s[3] = theta_dot + h * k1[3]
    _cartpole_deriv(s, force, gravity, masscart, masspole, half_length, k2)
    s[0] = x + h * k2[0]; s[1] = x_dot + h * k2[1]
    s[2] = theta + h * k2[2]; s[3] = theta_dot + h * k2[3]
    _cartpole_deriv(s, force, gravity, masscart, masspole, half_length, k3)
    s[0] = x + dt * k3[0]; s[1] = x_dot + dt * k3[1]
    s[2] = theta + dt * k3[2]; s[3] = theta_dot + dt * k3[3]
    _cartpole_deriv(s, force, gravity, masscart, masspole, half_length, k4)
    return (
        x + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x_dot + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        theta + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        theta_dot + dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    )


cdef inline void _cartpole_deriv(double* s, double force, double gravity,
                                 double masscart, double masspole,
                                 double half_length, double* out) noexcept:
    cdef double total = masscart + masspole
    cdef double pml = masspole * half_length
    cdef double st = sin(s[2])
    cdef double ct = cos(s[2])
    cdef double temp = (force + pml * s[3] * s[3] * st) / total
    cdef double thacc = (gravity * st - ct * temp) / (
        half_length * (4.0 / 3.0 - masspole * ct * ct / total))
    out[0] = s[1]
    out[1] = temp - pml * thacc * ct / total
    out[2] = s[3]
    out[3] = thacc


cdef inline long _cell(double x, int cells):
    # floor(x * G) can land one cell off when x sits on an edge i / G;
    # settle it against the edges themselves so cells are [i/G, (i+1)/G)
    cdef long i = <long>floor(x * cells)
    if i > 0 and x < (<double>i) / cells:
        i -= 1
    elif i < cells and x >= (<double>(i + 1)) / cells:
        i += 1
    if i >= cells:
        i = cells - 1
    return i


def vote_flat(double[:, ::1] points, int cells):
    """Flat cell index (i * cells + j) for each unit-square point."""
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t k
    out_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    for k in range(n):
        out[k] = _cell(points[k, 0], cells) * cells + _cell(points[k, 1], cells)
    return out_arr

"""Pure-Python/numpy twins of the compiled kernels in ``_core.pyx``."""
import math

import numpy as np

_LN2 = math.log(2.0)


def conditional_affinities(sqdist, perplexity, tol=1e-5, max_iter=200):
    sqdist = np.asarray(sqdist, dtype=np.float64)
    n = sqdist.shape[0]
    P = np.zeros((n, n))
    betas = np.zeros(n)
    target = math.log(perplexity)
    tol_nat = tol * _LN2
    mask = ~np.eye(n, dtype=bool)
    for i in range(n):
        row = sqdist[i, mask[i]]
        d = row - row.min()
        beta, lo, hi = 1.0, 0.0, None
        done = False
        for _ in range(max_iter):
            p = np.exp(-d * beta)
            sum_p = p.sum()
            entropy = math.log(sum_p) + beta * float(np.dot(d, p)) / sum_p
            diff = entropy - target
            if abs(diff) < tol_nat:
                done = True
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi is None else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        if not done:
            return P, betas, i
        P[i, mask[i]] = p / sum_p
        betas[i] = beta
    return P, betas, -1


def tsne_gradient(Y, P, exaggeration, with_kl, p_log_p=0.0):
    Y = np.asarray(Y, dtype=np.float64)
    diff0 = Y[:, 0][:, None] - Y[:, 0][None, :]
    diff1 = Y[:, 1][:, None] - Y[:, 1][None, :]
    num = 1.0 / (1.0 + diff0 * diff0 + diff1 * diff1)
    np.fill_diagonal(num, 0.0)
    z = num.sum()
    pq = (exaggeration * P - num / z) * num
    grad = 4.0 * np.stack([(pq * diff0).sum(axis=1), (pq * diff1).sum(axis=1)], axis=1)
    if with_kl:
        pos = P > 0
        kl = p_log_p - float(np.sum(P[pos] * np.log(num[pos]))) + math.log(z)
    else:
        kl = float("nan")
    return grad, kl


def _cartpole_deriv(x_dot, theta, theta_dot, force, gravity, masscart, masspole, half_length):
    total = masscart + masspole
    pml = masspole * half_length
    st = math.sin(theta)
    ct = math.cos(theta)
    temp = (force + pml * theta_dot * theta_dot * st) / total
    thacc = (gravity * st - ct * temp) / (half_length * (4.0 / 3.0 - masspole * ct * ct / total))
    return x_dot, temp - pml * thacc * ct / total, theta_dot, thacc


def cartpole_step(x, x_dot, theta, theta_dot, force, gravity, masscart, masspole, half_length, dt, rk4):
    args = (force, gravity, masscart, masspole, half_length)
    k1 = _cartpole_deriv(x_dot, theta, theta_dot, *args)
    if not rk4:
        return (x + dt * k1[0], x_dot + dt * k1[1], theta + dt * k1[2], theta_dot + dt * k1[3])
    h = 0.5 * dt
    k2 = _cartpole_deriv(x_dot + h * k1[1], theta + h * k1[2], theta_dot + h * k1[3], *args)
    k3 = _cartpole_deriv(x_dot + h * k2[1], theta + h * k2[2], theta_dot + h * k2[3], *args)
    k4 = _cartpole_deriv(x_dot + dt * k3[1], theta + dt * k3[2], theta_dot + dt * k3[3], *args)
    s = (x, x_dot, theta, theta_dot)
    return tuple(
        s[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]) for c in range(4)
    )


def vote_flat(points, cells):
    points = np.asarray(points, dtype=np.float64)
    idx = np.floor(points * cells).astype(np.int64)
    # settle edge cases against the cell edges i / G themselves
    idx -= (idx > 0) & (points < idx / cells)
    idx += (idx < cells) & (points >= (idx + 1) / cells)
    np.minimum(idx, cells - 1, out=idx)
    return idx[:, 0] * cells + idx[:, 1]

"""Exact t-SNE projection of buffered states to two dimensions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


class EmbeddingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TSNEConfig:
    perplexity: float = 30.0
    iterations: int = 500
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_fraction: float = 0.1
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    min_gain: float = 0.01
    init_std: float = 1e-4
    entropy_tol: float = 1e-5
    max_bisection: int = 200
    kl_every: int = 25


@dataclass
class Embedding:
    points: np.ndarray
    kl_trace: list = field(default_factory=list)  # (iteration, KL) pairs
    exaggeration_end: int = 0

    @property
    def final_kl(self) -> float:
        return self.kl_trace[-1][1]

    @property
    def kl_after_exaggeration(self) -> float:
        for it, kl in self.kl_trace:
            if it == self.exaggeration_end:
                return kl
        raise KeyError("no KL recorded at the end of early exaggeration")


def squared_distances(X: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, with the 1e-12 guard for duplicates."""
    X = np.asarray(X, dtype=np.float64)
    diff_sq = np.zeros((len(X), len(X)))
    for c in range(X.shape[1]):
        col = X[:, c]
        d = col[:, None] - col[None, :]
        diff_sq += d * d
    return diff_sq + 1e-12


def conditional_probabilities(X, perplexity: float, tol: float = 1e-5, max_iter: int = 200):
    """Rows ``p(j|i)`` with per-point bandwidth matched to the perplexity.

    Returns ``(P_cond, betas)`` where ``beta_i = 1 / (2 sigma_i^2)``.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if not 1.0 <= perplexity < n:
        raise ValueError(f"perplexity must be in [1, n={n}), got {perplexity}")
    sq = np.ascontiguousarray(squared_distances(X))
    P, betas, failed = kernels.conditional_affinities(sq, float(perplexity), float(tol), int(max_iter))
    if failed >= 0:
        raise EmbeddingError(
            f"bandwidth bisection for point {failed} did not converge in {max_iter} iterations"
        )
    return np.asarray(P), np.asarray(betas)


def compute_affinities(X, perplexity: float = 30.0, tol: float = 1e-5, max_iter: int = 200) -> np.ndarray:
    """Symmetric joint probabilities ``p_ij = (p(j|i) + p(i|j)) / 2n``."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) < 4:
        raise ValueError(f"need at least 4 samples, got {len(X)}")
    P_cond, _ = conditional_probabilities(X, perplexity, tol, max_iter)
    P = (P_cond + P_cond.T) / (2.0 * len(X))
    np.fill_diagonal(P, 0.0)
    return P


def row_entropies_bits(P_cond: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(P_cond > 0, np.log2(P_cond), 0.0)
    return -(P_cond * logs).sum(axis=1)


def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    """KL(P || Q) for the Student-t kernel on ``Y`` (reference implementation)."""
    _, kl = kernels.tsne_gradient(np.ascontiguousarray(Y, dtype=np.float64), P, 1.0, True,
                                  _p_log_p(P))
    return kl


def _p_log_p(P: np.ndarray) -> float:
    pos = P > 0
    return float(np.sum(P[pos] * np.log(P[pos])))


def tsne_embed(X, config: TSNEConfig = TSNEConfig(), rng: np.random.Generator | None = None,
               init: np.ndarray | None = None, P: np.ndarray | None = None) -> Embedding:
    """Gradient descent with momentum and adaptive gains on KL(P || Q).

    Early exaggeration applies to the first ``exaggeration_fraction`` of the
    iterations. KL is recorded every ``kl_every`` iterations, at the first
    iteration after exaggeration, and on the final coordinates.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if n < 4:
        raise ValueError(f"t-SNE needs at least 4 samples, got {n}")
    if P is None:
        P = compute_affinities(X, config.perplexity, config.entropy_tol, config.max_bisection)
    P = np.ascontiguousarray(P)
    plogp = _p_log_p(P)
    if init is not None:
        Y = np.array(init, dtype=np.float64)
        if Y.shape != (n, 2):
            raise ValueError(f"init must have shape ({n}, 2)")
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        Y = rng.normal(0.0, config.init_std, size=(n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    n_exag = int(math.ceil(config.exaggeration_fraction * config.iterations))
    trace = []
    for it in range(config.iterations):
        exag = config.early_exaggeration if it < n_exag else 1.0
        momentum = config.momentum_initial if it < config.momentum_switch else config.momentum_final
        want_kl = it % config.kl_every == 0 or it == n_exag
        grad, kl = kernels.tsne_gradient(Y, P, exag, want_kl, plogp)
        if want_kl:
            trace.append((it, float(kl)))
        same_sign = (grad > 0) == (update > 0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, config.min_gain, out=gains)
        update = momentum * update - config.learning_rate * gains * grad
        Y = Y + update
        Y -= Y.mean(axis=0)
        if not np.all(np.isfinite(Y)):
            raise EmbeddingError(f"non-finite embedding coordinates at iteration {it}")
    _, kl = kernels.tsne_gradient(Y, P, 1.0, True, plogp)
    trace.append((config.iterations, float(kl)))
    return Embedding(Y, trace, n_exag)


def subsample_buffer(states, n_max: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform subsample without replacement (original order kept) above ``n_max`` rows."""
    if n_max < 4:
        raise ValueError("n_max must be at least 4")
    states = np.asarray(states)
    if len(states) <= n_max:
        return states
    idx = np.sort(rng.choice(len(states), size=n_max, replace=False))
    return states[idx]

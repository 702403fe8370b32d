"""Minimal (mu/mu_w, lambda) CMA-ES for low-dimensional black-box problems.

Weighted recombination, cumulative step-size adaptation, and rank-one plus
rank-mu covariance updates. Deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class CmaResult:
    x: np.ndarray
    fun: float
    evaluations: int
    generations: int


def default_popsize(dim: int) -> int:
    return 4 + int(3 * math.log(dim))


def cmaes_minimize(
    f,
    x0,
    sigma0: float,
    budget: int,
    seed: int = 0,
    popsize: int | None = None,
) -> CmaResult:
    """Minimize f over R^dim within an evaluation budget; returns best-ever."""
    x0 = np.asarray(x0, dtype=float)
    dim = len(x0)
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    lam = popsize or default_popsize(dim)
    if budget < lam:
        raise ValueError(f"budget {budget} below population size {lam}")

    f0 = float(f(x0))
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at the initial point")
    evals = 1
    best_x, best_f = x0.copy(), f0

    mu = lam // 2
    raw = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mueff = 1.0 / float(np.sum(weights**2))

    cc = (4 + mueff / dim) / (dim + 4 + 2 * mueff / dim)
    cs = (mueff + 2) / (dim + mueff + 5)
    c1 = 2 / ((dim + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((dim + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (dim + 1)) - 1) + cs
    chi_n = math.sqrt(dim) * (1 - 1 / (4 * dim) + 1 / (21 * dim**2))

    rng = np.random.default_rng(seed)
    mean = x0.copy()
    sigma = float(sigma0)
    cov = np.eye(dim)
    p_sigma = np.zeros(dim)
    p_cov = np.zeros(dim)
    eigvecs = np.eye(dim)
    eigvals_sqrt = np.ones(dim)

    gen = 0
    while evals + lam <= budget:
        gen += 1
        z = rng.standard_normal((lam, dim))
        y = z @ (eigvecs * eigvals_sqrt).T  # rows ~ N(0, C)
        xs = mean + sigma * y
        fs = np.array([f(x) for x in xs], dtype=float)
        evals += lam

        order = np.argsort(fs, kind="stable")
        if fs[order[0]] < best_f:
            best_f = float(fs[order[0]])
            best_x = xs[order[0]].copy()

        y_sel = y[order[:mu]]
        y_w = weights @ y_sel
        mean = mean + sigma * y_w

        inv_sqrt_y = (eigvecs / eigvals_sqrt) @ (eigvecs.T @ y_w)
        p_sigma = (1 - cs) * p_sigma + math.sqrt(cs * (2 - cs) * mueff) * inv_sqrt_y
        ps_norm = float(np.linalg.norm(p_sigma))
        sigma *= math.exp((cs / damps) * (ps_norm / chi_n - 1))

        h_sigma = 1.0 if ps_norm / math.sqrt(
            1 - (1 - cs) ** (2 * (gen + 1))
        ) < (1.4 + 2 / (dim + 1)) * chi_n else 0.0
        p_cov = (1 - cc) * p_cov + h_sigma * math.sqrt(cc * (2 - cc) * mueff) * y_w

        rank_one = np.outer(p_cov, p_cov)
        rank_mu = (y_sel * weights[:, None]).T @ y_sel
        delta_h = (1 - h_sigma) * cc * (2 - cc)
        cov = (
            (1 - c1 - cmu) * cov
            + c1 * (rank_one + delta_h * cov)
            + cmu * rank_mu
        )

        if not (math.isfinite(sigma) and np.all(np.isfinite(cov))):
            break
        cov = 0.5 * (cov + cov.T)
        vals, eigvecs = np.linalg.eigh(cov)
        vals = np.maximum(vals, 1e-20)
        eigvals_sqrt = np.sqrt(vals)

    return CmaResult(x=best_x, fun=best_f, evaluations=evals, generations=gen)

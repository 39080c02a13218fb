"""Projected-gradient load balancing over per-server reward scalings."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bandit import average_profile, simulate
from .reward import NetworkConfig

log = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9
# points this close to the simplex are returned as-is, which makes projection idempotent
_ON_SIMPLEX_EPS = 1e-12


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold).

    Uses a stable sort so that equal components are handled deterministically.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("expected a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a non-finite vector")
    if np.all(v >= 0) and abs(v.sum() - 1.0) <= _ON_SIMPLEX_EPS:
        return v.copy()
    u = -np.sort(-v, kind="stable")
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    k = ks[u - css / ks > 0][-1]
    x = np.maximum(v - css[k - 1] / k, 0.0)
    # re-normalize the active set so the sum is 1 to machine precision
    return x / x.sum()


def is_on_simplex(x, tol: float = SIMPLEX_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.all(x >= 0) and abs(x.sum() - 1.0) <= tol)


def check_target(f_star, n: int | None = None) -> np.ndarray:
    f_star = np.asarray(f_star, dtype=float)
    if n is not None and f_star.shape != (n,):
        raise ValueError(f"target profile must have length {n}")
    if abs(f_star.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("target profile must sum to 1")
    if np.any(f_star <= 0) or np.any(f_star >= 1):
        raise ValueError("target profile components must lie strictly inside (0, 1)")
    return f_star


def estimate_gradient(f_measured, f_star) -> np.ndarray:
    f_measured = np.asarray(f_measured, dtype=float)
    f_star = np.asarray(f_star, dtype=float)
    if f_measured.shape != f_star.shape:
        raise ValueError(f"dimension mismatch: {f_measured.shape} vs {f_star.shape}")
    return f_measured - f_star


def objective(f, f_star) -> float:
    """Half squared Euclidean distance between profiles."""
    d = np.asarray(f, dtype=float) - np.asarray(f_star, dtype=float)
    return 0.5 * float(d @ d)


@dataclass
class IterationRecord:
    alpha: np.ndarray
    f: np.ndarray
    objective: float

    @property
    def distance_sq(self) -> float:
        """Squared distance ||f - f*||^2 (twice the objective)."""
        return 2.0 * self.objective


@dataclass
class OptimizationTrace:
    step_size: float
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    best_alpha: np.ndarray | None = None
    best_objective: float = np.inf

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def __len__(self):
        return len(self.records)


def moving_average(x, width: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if len(x) < width:
        return np.empty(0)
    c = np.cumsum(np.insert(x, 0, 0.0))
    return (c[width:] - c[:-width]) / width


def load_balance(
    f_star,
    step_size: float,
    iterations: int,
    sim_rounds: int,
    window: int,
    cfg: NetworkConfig,
    seed: int,
    *,
    early_stop: bool = True,
    tol: float = 1e-4,
    patience: int = 10,
    workers: int = 1,
    callback=None,
):
    """Drive the steady profile toward ``f_star`` by projected gradient steps.

    Iteration ``k`` simulates with seed ``seed + k`` and measures the trailing
    ``window``-round average profile. With ``early_stop``, the loop ends once
    the ``patience``-iteration moving average of the objective drops below
    ``tol``.

    Returns ``(alpha, trace)``. ``trace.best_alpha`` keeps the iterate with the
    lowest measured objective.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    if not step_size > 0:
        raise ValueError("step size must be positive")
    if window < 1 or window > sim_rounds:
        raise ValueError("window must satisfy 1 <= window <= sim_rounds")
    f_star = check_target(f_star, cfg.n)
    alpha = np.full(cfg.n, 1.0 / cfg.n)
    trace = OptimizationTrace(step_size=step_size)
    for k in range(iterations):
        sim = simulate(cfg, alpha, sim_rounds, seed + k, workers=workers)
        f = average_profile(sim, window)
        obj = objective(f, f_star)
        if not np.isfinite(obj):
            raise FloatingPointError(f"non-finite objective at iteration {k + 1}")
        trace.records.append(IterationRecord(alpha.copy(), f, obj))
        if obj < trace.best_objective:
            trace.best_objective = obj
            trace.best_alpha = alpha.copy()
        log.debug("iter %d objective %.3e alpha %s", k + 1, obj, alpha)
        if callback is not None:
            callback(k, alpha, f, obj)
        if early_stop and len(trace) >= patience and trace.objectives()[-patience:].mean() < tol:
            trace.converged = True
            break
        alpha = project_simplex(alpha - step_size * estimate_gradient(f, f_star))
    return alpha, trace


def scale_invariance_check(cfg: NetworkConfig, alpha, T: int, window: int, seed: int, factor: float = 0.5, workers: int = 1) -> dict:
    """Compare the trailing profile under ``alpha`` and ``factor * alpha``.

    The scaled vector is deliberately left off the simplex. Both runs share
    the same seed, so the difference isolates the effect of the scaling.
    """
    alpha = np.asarray(alpha, dtype=float)
    f_a = average_profile(simulate(cfg, alpha, T, seed, workers=workers), window)
    f_b = average_profile(simulate(cfg, factor * alpha, T, seed, workers=workers), window)
    return {
        "factor": factor,
        "alpha": alpha.tolist(),
        "f_alpha": f_a.tolist(),
        "f_scaled": f_b.tolist(),
        "max_abs_diff": float(np.max(np.abs(f_a - f_b))),
    }

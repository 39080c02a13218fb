"""Analytic companions: Lipschitz bound, uniqueness condition, type pushforward,
and an exact population-map oracle on a truncated state space."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .bandit import ucb_choice_distribution
from .reward import NetworkConfig, spectral_efficiency, success_probability


class ConvergenceError(RuntimeError):
    """Raised when a fixed-point iteration hits its iteration cap."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class UniquenessReport:
    L: float
    beta: float
    condition_value: float
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def lipschitz_constant(theta, cfg: NetworkConfig):
    """Upper bound on |dQ/df| over f in [0, 1] for a fixed type component.

    Obtained by dropping the Gaussian factor (bounded by 1) and taking the
    denominator at f = 0.
    """
    d_max = cfg.require_dmax()
    r = np.asarray(spectral_efficiency(theta, cfg))
    pref = 1.0 / (math.sqrt(2 * math.pi) * cfg.sigma_s * cfg.truncation_mass)
    L = pref * cfg.m * d_max * cfg.F * cfg.B * r * (cfg.c * cfg.B * r + cfg.F) / (cfg.rho * cfg.nu * cfg.F) ** 2
    return float(L) if L.ndim == 0 else L


def uniqueness_check(cfg: NetworkConfig, theta: float = 1.0) -> UniquenessReport:
    """Evaluate beta * (1 + L) < 1 with L at the worst-case type ``theta``."""
    L = lipschitz_constant(theta, cfg)
    value = cfg.beta * (1.0 + L)
    return UniquenessReport(L=L, beta=cfg.beta, condition_value=value, holds=bool(value < 1))


def pushforward_theta(alpha, theta, f, cfg: NetworkConfig, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Type component ``theta'`` in ``[0, theta]`` with Q(theta', f) = alpha * Q(theta, f).

    Bisection on the monotone map theta -> Q(theta, f) at fixed f.
    """
    for name, x in (("alpha", alpha), ("theta", theta), ("f", f)):
        if not 0 <= x <= 1:
            raise ValueError(f"{name} must lie in [0, 1]")
    if alpha == 1:
        return float(theta)
    target = alpha * success_probability(theta, f, cfg)
    if target == 0:
        return 0.0
    lo, hi = 0.0, float(theta)
    q_lo, q_hi = success_probability(lo, f, cfg), success_probability(hi, f, cfg)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        q_mid = success_probability(mid, f, cfg)
        if q_mid < target:
            lo, q_lo = mid, q_mid
        else:
            hi, q_hi = mid, q_mid
        if q_hi - q_lo < tol:
            break
    return hi if abs(q_hi - target) <= abs(q_lo - target) else lo


# --- truncated-state oracle -------------------------------------------------


def theta_marginal_cdf(x, cfg: NetworkConfig) -> float:
    """P(theta_i <= x) for one type component (exponential gain, uniform interference)."""
    if x >= 1:
        return 1.0
    if x <= 0:
        return 0.0
    k = x * cfg.gamma_max / cfg.p0
    lo, hi = cfg.I_min + cfg.N0, cfg.I_max + cfg.N0
    if hi - lo <= 0:
        return 1.0 - math.exp(-k * lo)
    return 1.0 - (math.exp(-k * lo) - math.exp(-k * hi)) / (k * (hi - lo))


def discretize_type(cfg: NetworkConfig, atoms: int = 4):
    """Equal-weight atoms at the quantile midpoints of the type marginal."""
    if not 1 <= atoms <= 8:
        raise ValueError("atoms must be between 1 and 8")
    values = []
    for j in range(atoms):
        p = (j + 0.5) / atoms
        if theta_marginal_cdf(1.0 - 1e-15, cfg) <= p:
            values.append(1.0)
        else:
            values.append(brentq(lambda x: theta_marginal_cdf(x, cfg) - p, 0.0, 1.0 - 1e-15, xtol=1e-14))
    return np.array(values), np.full(atoms, 1.0 / atoms)


class TruncatedStateSpace:
    """Win/loss counters per arm, each saturating at ``cap``."""

    def __init__(self, n: int, cap: int):
        if n > 3 or cap > 6:
            raise ValueError("state space too large: need n <= 3 and cap <= 6")
        self.n, self.cap = n, cap
        self.states = np.array(list(itertools.product(range(cap + 1), repeat=2 * n)), dtype=np.int64)
        self.size = len(self.states)
        wins, losses = self.states[:, 0::2], self.states[:, 1::2]
        self.sigma = ucb_choice_distribution(wins, losses)
        radix = (cap + 1) ** np.arange(2 * n - 1, -1, -1)
        self.next_win = np.empty((self.size, n), dtype=np.int64)
        self.next_loss = np.empty((self.size, n), dtype=np.int64)
        for i in range(n):
            for slot, table in ((2 * i, self.next_win), (2 * i + 1, self.next_loss)):
                nxt = self.states.copy()
                nxt[:, slot] = np.minimum(nxt[:, slot] + 1, cap)
                table[:, i] = nxt @ radix
        self.zero = 0


def steady_profile_oracle(
    cfg: NetworkConfig,
    alpha,
    cap: int = 4,
    atoms: int = 4,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    type_atoms=None,
):
    """Fixed-point profile of the exact mean-field dynamics on a truncated chain.

    The state measure evolves exactly as the simulator's round: regeneration,
    UCB decision (uniform tie-break), congestion-dependent Bernoulli rewards.
    ``type_atoms`` may pass ``(values, weights)`` for the per-arm marginal;
    otherwise it is discretized into ``atoms`` quantile atoms. Joint types are
    the product of independent marginals.
    """
    alpha = np.asarray(alpha, dtype=float)
    n = cfg.n
    if alpha.shape != (n,):
        raise ValueError(f"alpha must have length {n}")
    cfg.require_dmax()
    space = TruncatedStateSpace(n, cap)
    values, weights = discretize_type(cfg, atoms) if type_atoms is None else map(np.asarray, type_atoms)
    combos = np.array(list(itertools.product(range(len(values)), repeat=n)))
    theta = values[combos]  # (C, n)
    w = np.prod(weights[combos], axis=1)
    C, S = len(w), space.size

    mu = np.zeros((C, S))
    mu[:, space.zero] = w
    offsets = (np.arange(C) * S)[:, None, None]
    win_idx = (offsets + space.next_win[None]).ravel()
    loss_idx = (offsets + space.next_loss[None]).ravel()
    f_prev = None
    for it in range(max_iter):
        mu_prev = mu
        mu = cfg.beta * mu
        mu[:, space.zero] += (1 - cfg.beta) * w
        flows = mu[:, :, None] * space.sigma[None]  # (C, S, n)
        f = flows.sum(axis=(0, 1))
        p = alpha * success_probability(theta, np.broadcast_to(f, theta.shape), cfg)  # (C, n)
        won = flows * p[:, None, :]
        mu = (
            np.bincount(win_idx, weights=won.ravel(), minlength=C * S)
            + np.bincount(loss_idx, weights=(flows - won).ravel(), minlength=C * S)
        ).reshape(C, S)
        # forced exploration keeps f uniform for the first rounds, so the
        # state measure must have settled as well
        if f_prev is not None and np.max(np.abs(f - f_prev)) < tol and np.abs(mu - mu_prev).sum() < tol:
            return f / f.sum()
        f_prev = f
    raise ConvergenceError(f"oracle did not converge in {max_iter} iterations", last=f_prev)

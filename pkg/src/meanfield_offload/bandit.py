"""Mean-field multi-agent UCB engine.

The population is held as dense arm-major ``(n, m)`` arrays. Every round
draws one block of uniforms of shape ``(2n + 3, m)`` from a stream keyed by
``(seed, round)``; column ``k`` belongs to agent ``k``. Because an agent's
randomness is addressed by its id rather than by execution order, splitting
the agents into any number of worker chunks gives bit-identical results.

Row layout of a round block::

    0              regeneration coin
    1 .. n         fading gains (inverse-CDF of Exponential(1))
    n+1 .. 2n      interference powers
    2n+1           arm tie-break
    2n+2           reward coin
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .reward import NetworkConfig, size_threshold, theta_from_uniforms, truncated_normal_cdf

_INIT_STREAM = 0
_ROUND_STREAM = 1


@dataclass
class AgentState:
    wins: np.ndarray
    losses: np.ndarray
    rounds_alive: int = 0

    @classmethod
    def fresh(cls, n: int) -> "AgentState":
        return cls(np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64), 0)

    def __post_init__(self):
        self.wins = np.asarray(self.wins, dtype=np.int64)
        self.losses = np.asarray(self.losses, dtype=np.int64)
        if self.wins.shape != self.losses.shape:
            raise ValueError("wins and losses must have the same length")
        if np.any(self.wins < 0) or np.any(self.losses < 0):
            raise ValueError("counters must be nonnegative")
        if self.wins.sum() + self.losses.sum() != self.rounds_alive:
            raise ValueError("sum(wins) + sum(losses) must equal rounds_alive")


@dataclass
class Agent:
    theta: np.ndarray
    state: AgentState

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != self.state.wins.shape:
            raise ValueError("type and state dimensions differ")


@dataclass
class SimulationTrace:
    profiles: np.ndarray  # (T, n)
    mean_reward: np.ndarray  # (T,)
    seed: int

    def __len__(self):
        return len(self.profiles)


def ucb_indices(wins, losses, rounds_alive, axis: int = -1):
    """UCB1 index per arm; unpulled arms get +inf (forced exploration).

    ``axis`` is the arm axis of ``wins``/``losses``; ``rounds_alive`` has the
    remaining (agent) shape.
    """
    wins = np.asarray(wins, dtype=float)
    pulls = wins + np.asarray(losses, dtype=float)
    log_t = np.log(np.maximum(np.asarray(rounds_alive, dtype=float), 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        idx = wins / pulls + np.sqrt(2.0 * np.expand_dims(log_t, axis) / pulls)
    return np.where(pulls > 0, idx, np.inf)


def pick_among_best(indices, u, axis: int = -1):
    """Argmax along ``axis``, ties broken by the uniform ``u``.

    With ``k`` tied arms, ``u`` in ``[j/k, (j+1)/k)`` selects the ``j``-th
    tied arm in index order.
    """
    indices = np.asarray(indices)
    tied = indices == indices.max(axis=axis, keepdims=True)
    k = tied.sum(axis=axis)
    target = np.minimum(np.floor(np.asarray(u) * k), k - 1)
    return np.argmax(np.cumsum(tied, axis=axis) > np.expand_dims(target, axis), axis=axis)


def ucb_select(state: AgentState, rng: np.random.Generator) -> int:
    """Arm chosen by UCB1 from a single agent's state."""
    idx = ucb_indices(state.wins, state.losses, state.rounds_alive)
    return int(pick_among_best(idx, rng.random()))


def ucb_choice_distribution(wins, losses, rounds_alive=None) -> np.ndarray:
    """Exact probability that ``ucb_select`` picks each arm (uniform ties)."""
    wins = np.asarray(wins)
    losses = np.asarray(losses)
    if rounds_alive is None:
        rounds_alive = wins.sum(axis=-1) + losses.sum(axis=-1)
    idx = ucb_indices(wins, losses, rounds_alive)
    tied = idx == idx.max(axis=-1, keepdims=True)
    return tied / tied.sum(axis=-1, keepdims=True)


def regenerate_if_needed(agent: Agent, cfg: NetworkConfig, rng: np.random.Generator) -> Agent:
    """With probability 1 - beta, reset the state and draw a fresh type."""
    if rng.random() < cfg.beta:
        return agent
    theta = theta_from_uniforms(rng.random(cfg.n), rng.random(cfg.n), cfg)
    return Agent(theta, AgentState.fresh(cfg.n))


def round_stream(seed: int, t: int) -> np.random.Generator:
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(seed, spawn_key=(_ROUND_STREAM, t))))


def round_uniforms(seed: int, t: int, m: int, n: int) -> np.ndarray:
    return round_stream(seed, t).random((2 * n + 3, m))


@dataclass
class Population:
    """Dense arm-major arrays: ``theta``, ``wins``, ``losses`` are ``(n, m)``.

    ``rounds_alive`` has shape ``(m,)``.
    """

    theta: np.ndarray
    wins: np.ndarray
    losses: np.ndarray
    rounds_alive: np.ndarray = field(default=None)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.wins = np.asarray(self.wins, dtype=np.int64)
        self.losses = np.asarray(self.losses, dtype=np.int64)
        if self.rounds_alive is None:
            self.rounds_alive = self.wins.sum(axis=0) + self.losses.sum(axis=0)
        self.rounds_alive = np.asarray(self.rounds_alive, dtype=np.int64)

    @property
    def m(self):
        return self.theta.shape[1]

    @property
    def n(self):
        return self.theta.shape[0]

    @classmethod
    def fresh(cls, cfg: NetworkConfig, seed: int) -> "Population":
        rng = np.random.Generator(np.random.SFC64(np.random.SeedSequence(seed, spawn_key=(_INIT_STREAM,))))
        u = rng.random((2 * cfg.n, cfg.m))
        theta = theta_from_uniforms(u[: cfg.n], u[cfg.n :], cfg)
        zeros = np.zeros((cfg.n, cfg.m), dtype=np.int64)
        return cls(theta, zeros, zeros.copy(), np.zeros(cfg.m, dtype=np.int64))

    @classmethod
    def from_agents(cls, agents) -> "Population":
        return cls(
            np.array([a.theta for a in agents]).T,
            np.array([a.state.wins for a in agents]).T,
            np.array([a.state.losses for a in agents]).T,
            np.array([a.state.rounds_alive for a in agents]),
        )

    def to_agents(self) -> list[Agent]:
        return [
            Agent(
                self.theta[:, k].copy(),
                AgentState(self.wins[:, k].copy(), self.losses[:, k].copy(), int(self.rounds_alive[k])),
            )
            for k in range(self.m)
        ]

    def copy(self) -> "Population":
        return Population(self.theta.copy(), self.wins.copy(), self.losses.copy(), self.rounds_alive.copy())


def _decide(pop: Population, u: np.ndarray, sl: slice, cfg: NetworkConfig) -> np.ndarray:
    n = cfg.n
    u = u[:, sl]
    regen = np.flatnonzero(u[0] >= cfg.beta)
    if regen.size:
        cols = regen + sl.start
        pop.theta[:, cols] = theta_from_uniforms(u[1 : n + 1, regen], u[n + 1 : 2 * n + 1, regen], cfg)
        pop.wins[:, cols] = 0
        pop.losses[:, cols] = 0
        pop.rounds_alive[cols] = 0
    idx = ucb_indices(pop.wins[:, sl], pop.losses[:, sl], pop.rounds_alive[sl], axis=0)
    return pick_among_best(idx, u[2 * n + 1], axis=0)


def _reward(pop, u, sl, arms, f, alpha, cfg) -> np.ndarray:
    arms = arms[sl]
    cols = np.arange(sl.start, sl.stop)
    theta = pop.theta[arms, cols]
    q = truncated_normal_cdf(size_threshold(theta, f[arms], cfg), cfg)
    won = u[2 * cfg.n + 2, sl] < alpha[arms] * q
    pop.wins[arms, cols] += won
    pop.losses[arms, cols] += ~won
    pop.rounds_alive[sl] += 1
    return won


def _chunks(m: int, workers: int) -> list[slice]:
    workers = max(1, min(workers, m))
    bounds = np.linspace(0, m, workers + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def _check_alpha(alpha, n):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (n,):
        raise ValueError(f"alpha must have length {n}")
    if np.any(~((alpha >= 0) & (alpha <= 1))):
        raise ValueError("alpha components must lie in [0, 1]")
    return alpha


def step_population(pop: Population, alpha, cfg: NetworkConfig, u: np.ndarray, pool=None, workers: int = 1):
    """Advance ``pop`` in place by one round using the uniform block ``u``.

    Returns ``(profile, mean_reward)``.
    """
    alpha = _check_alpha(alpha, cfg.n)
    if pop.m != cfg.m or pop.n != cfg.n:
        raise ValueError("population shape does not match the config")
    parts = _chunks(cfg.m, workers)
    if pool is None or len(parts) == 1:
        arms = np.concatenate([_decide(pop, u, sl, cfg) for sl in parts])
    else:
        arms = np.concatenate(list(pool.map(lambda sl: _decide(pop, u, sl, cfg), parts)))
    f = np.bincount(arms, minlength=cfg.n) / cfg.m
    if pool is None or len(parts) == 1:
        won = [_reward(pop, u, sl, arms, f, alpha, cfg) for sl in parts]
    else:
        won = list(pool.map(lambda sl: _reward(pop, u, sl, arms, f, alpha, cfg), parts))
    return f, float(np.concatenate(won).mean())


def step(agents, alpha, cfg: NetworkConfig, rng: np.random.Generator):
    """One round for a list of ``Agent``.

    Returns ``(profile, updated agents, mean reward)``; the input list is not
    modified.
    """
    if len(agents) != cfg.m:
        raise ValueError(f"expected {cfg.m} agents, got {len(agents)}")
    pop = Population.from_agents(agents)
    u = rng.random((2 * cfg.n + 3, cfg.m))
    f, mean_reward = step_population(pop, alpha, cfg, u)
    return f, pop.to_agents(), mean_reward


def simulate(cfg: NetworkConfig, alpha, T: int, seed: int, workers: int = 1, population: Population | None = None) -> SimulationTrace:
    """Run ``T`` rounds from a freshly generated population (or ``population``)."""
    if T < 1:
        raise ValueError("T must be at least 1")
    cfg.require_dmax()
    alpha = _check_alpha(alpha, cfg.n)
    pop = Population.fresh(cfg, seed) if population is None else population.copy()
    profiles = np.empty((T, cfg.n))
    rewards = np.empty(T)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for t in range(T):
            u = round_uniforms(seed, t, cfg.m, cfg.n)
            profiles[t], rewards[t] = step_population(pop, alpha, cfg, u, pool, workers)
    finally:
        if pool is not None:
            pool.shutdown()
    return SimulationTrace(profiles, rewards, seed)


def average_profile(trace: SimulationTrace, window: int) -> np.ndarray:
    """Component-wise mean of the last ``window`` profiles."""
    if window < 1 or window > len(trace):
        raise ValueError(f"window must be in [1, {len(trace)}], got {window}")
    return np.asarray(trace.profiles[-window:]).mean(axis=0)


def max_round_change(trace: SimulationTrace, start: int = 0) -> float:
    """Largest sup-norm change between consecutive profiles after ``start``."""
    p = np.asarray(trace.profiles[start:])
    if len(p) < 2:
        return 0.0
    return float(np.abs(np.diff(p, axis=0)).max())



"""Channel, delay and task-size physics, and the closed-form success probability.

All functions broadcast over numpy arrays. Randomness is always passed in
explicitly, either as a ``numpy.random.Generator`` or as pre-drawn uniforms,
so callers control the stream layout.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy.special import erf, ndtri

# 99.9th percentile of Exponential(1): -ln(1e-3)
EXP1_Q999 = -math.log(1e-3)

# -174 dBm expressed in watts
NOISE_174_DBM_W = 10 ** (-17.4) * 1e-3

MBIT = 1e6


@dataclass(frozen=True)
class NetworkConfig:
    """Physical and game constants. Task sizes are in bits, times in seconds.

    ``gamma_max`` left as ``None`` is calibrated so that the 99.9th percentile
    fading gain at the lowest interference maps to ``theta = 1``. ``d_max``
    left as ``None`` must be calibrated (see ``experiment.calibrate_dmax``)
    before any success probability can be evaluated.
    """

    m: int = 100
    n: int = 2
    B: float = 10e6
    F: float = 4e9
    c: float = 100.0
    rho: float = 0.1
    nu: float = 10.0
    p0: float = 0.2
    N0: float = NOISE_174_DBM_W
    I_min: float = 8e-3
    I_max: float = 12e-3
    gamma_max: float | None = None
    s_a: float = 0.5 * MBIT
    s_b: float = 1.0 * MBIT
    mu_s: float = 0.75 * MBIT
    sigma_s: float = 0.125 * MBIT
    d_max: float | None = None
    beta: float = 0.95

    def __post_init__(self):
        if self.gamma_max is None:
            object.__setattr__(
                self, "gamma_max", self.p0 * EXP1_Q999 / (self.I_min + self.N0)
            )
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))
        for name in ("B", "F", "c", "rho", "nu", "p0", "N0", "gamma_max", "sigma_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.I_min <= self.I_max:
            raise ValueError("interference bounds must satisfy 0 <= I_min <= I_max")
        if not 0 < self.s_a < self.s_b:
            raise ValueError("task-size bounds must satisfy 0 < s_a < s_b")
        if not 0 <= self.beta <= 1:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.d_max is not None and not self.d_max > 0:
            raise ValueError(f"d_max must be positive, got {self.d_max}")

    def replace(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        """Build from a mapping; ``*_mbit`` keys are accepted for task sizes."""
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key.endswith("_mbit") and key[: -len("_mbit")] in known:
                kwargs[key[: -len("_mbit")]] = float(value) * MBIT
            elif key in known:
                kwargs[key] = value
            else:
                raise KeyError(f"unknown network config key: {key!r}")
        return cls(**kwargs)

    @property
    def truncation_mass(self) -> float:
        """Normal probability mass inside ``[s_a, s_b]``."""
        return float(_normal_cdf(self.s_b, self) - _normal_cdf(self.s_a, self))

    def require_dmax(self) -> float:
        if self.d_max is None:
            raise ValueError("d_max is not set; calibrate it or pin it in the config")
        return self.d_max


def _check_unit(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(~((x >= 0) & (x <= 1))):
        raise ValueError(f"{name} must lie in [0, 1]")
    return x


def _as_output(x):
    return float(x) if np.ndim(x) == 0 else x


def _normal_cdf(x, cfg: NetworkConfig):
    return 0.5 * (1.0 + erf((np.asarray(x, dtype=float) - cfg.mu_s) / (math.sqrt(2.0) * cfg.sigma_s)))


def spectral_efficiency(theta, cfg: NetworkConfig):
    """log2(1 + gamma_max * theta), in bits/s/Hz."""
    theta = _check_unit(theta, "theta")
    return _as_output(np.log2(1.0 + cfg.gamma_max * theta))


def theta_from_uniforms(u_gain, u_interf, cfg: NetworkConfig):
    """Map uniforms on [0, 1) to normalized SINRs (inverse-CDF sampling).

    ``u_gain`` drives the Exponential(1) fading gain, ``u_interf`` the
    uniform interference power.
    """
    h = -np.log1p(-np.asarray(u_gain, dtype=float))
    interference = cfg.I_min + (cfg.I_max - cfg.I_min) * np.asarray(u_interf, dtype=float)
    sinr = cfg.p0 * h / (interference + cfg.N0)
    return np.minimum(1.0, sinr / cfg.gamma_max)


def sample_type(cfg: NetworkConfig, rng: np.random.Generator, size=None):
    """Draw agent types. Returns shape ``(n,)`` or ``(*size, n)``."""
    shape = (cfg.n,) if size is None else tuple(np.atleast_1d(size)) + (cfg.n,)
    return theta_from_uniforms(rng.random(shape), rng.random(shape), cfg)


def task_size_from_uniforms(u, cfg: NetworkConfig):
    """Inverse-CDF map from uniforms to truncated-normal task sizes in bits."""
    lo = _normal_cdf(cfg.s_a, cfg)
    hi = _normal_cdf(cfg.s_b, cfg)
    p = lo + np.asarray(u, dtype=float) * (hi - lo)
    s = cfg.mu_s + cfg.sigma_s * ndtri(p)
    return np.clip(s, cfg.s_a, cfg.s_b)


def sample_task_size(cfg: NetworkConfig, rng: np.random.Generator, size=None):
    return _as_output(task_size_from_uniforms(rng.random(size), cfg))


def truncated_normal_cdf(s, cfg: NetworkConfig):
    """CDF of the task-size law, exactly 0 below ``s_a`` and 1 above ``s_b``."""
    s = np.asarray(s, dtype=float)
    lo = _normal_cdf(cfg.s_a, cfg)
    hi = _normal_cdf(cfg.s_b, cfg)
    out = np.clip((_normal_cdf(s, cfg) - lo) / (hi - lo), 0.0, 1.0)
    out = np.where(s <= cfg.s_a, 0.0, np.where(s >= cfg.s_b, 1.0, out))
    return _as_output(out)


def total_delay(theta, f, s, cfg: NetworkConfig):
    """Processing + uplink + downlink delay in seconds; +inf when theta == 0."""
    theta = _check_unit(theta, "theta")
    f = _check_unit(f, "f")
    s = np.asarray(s, dtype=float)
    r = np.log2(1.0 + cfg.gamma_max * theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = (
            cfg.c * cfg.m * s * f / cfg.F
            + s * cfg.m * f / (cfg.B * r)
            + cfg.rho * s * cfg.nu / (cfg.B * r)
        )
    d = np.where(r > 0, d, np.inf)
    return _as_output(d)


def size_threshold(theta, f, cfg: NetworkConfig):
    """Largest task size that still meets the deadline at (theta, f)."""
    d_max = cfg.require_dmax()
    r = np.log2(1.0 + cfg.gamma_max * np.asarray(theta, dtype=float))
    f = np.asarray(f, dtype=float)
    num = d_max * cfg.F * cfg.B * r
    den = cfg.m * f * (cfg.c * cfg.B * r + cfg.F) + cfg.rho * cfg.nu * cfg.F
    return _as_output(num / den)


def success_probability(theta, f, cfg: NetworkConfig):
    """Q(theta, f): probability the total delay meets ``d_max``."""
    theta = _check_unit(theta, "theta")
    f = _check_unit(f, "f")
    return truncated_normal_cdf(size_threshold(theta, f, cfg), cfg)


def success_probability_df(theta, f, cfg: NetworkConfig):
    """Analytic partial derivative of Q with respect to f.

    Zero where the size threshold is clamped outside ``(s_a, s_b)``.
    """
    theta = _check_unit(theta, "theta")
    f = _check_unit(f, "f")
    d_max = cfg.require_dmax()
    r = np.log2(1.0 + cfg.gamma_max * theta)
    k = cfg.c * cfg.B * r + cfg.F
    den = cfg.m * f * k + cfg.rho * cfg.nu * cfg.F
    tau = d_max * cfg.F * cfg.B * r / den
    density = np.exp(-0.5 * ((tau - cfg.mu_s) / cfg.sigma_s) ** 2) / (
        math.sqrt(2 * math.pi) * cfg.sigma_s * cfg.truncation_mass
    )
    dtau_df = -cfg.m * d_max * cfg.F * cfg.B * r * k / den**2
    inside = (tau > cfg.s_a) & (tau < cfg.s_b)
    return _as_output(np.where(inside, density * dtau_df, 0.0))


def sample_reward(theta, f, alpha, cfg: NetworkConfig, rng: np.random.Generator):
    """Binary reward with success probability ``alpha * Q(theta, f)``."""
    alpha = _check_unit(alpha, "alpha")
    p = alpha * success_probability(theta, f, cfg)
    draw = (rng.random(np.shape(p)) < p).astype(np.int8)
    return int(draw) if draw.ndim == 0 else draw

"""Experiment presets, deadline calibration, the end-to-end run, and report I/O."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .analysis import uniqueness_check
from .balancer import check_target, load_balance, scale_invariance_check
from .bandit import SimulationTrace, average_profile, simulate
from .reward import NetworkConfig, task_size_from_uniforms, theta_from_uniforms, total_delay

log = logging.getLogger(__name__)

_PROBE_STREAM = 2

TARGET_2 = (0.2, 0.8)
TARGET_8 = (0.07, 0.08, 0.09, 0.10, 0.11, 0.12, 0.13, 0.3)

# Published experiment settings; everything else keeps the NetworkConfig defaults.
PRESETS = {
    "fig1-small": {"m": 100, "n": 2},
    "fig1-large": {"m": 10_000, "n": 2},
    "fig2-8arms-small": {"m": 100, "n": 8},
    "fig2-8arms-large": {"m": 10_000, "n": 8},
}
ALIASES = {"fig2-8arms": "fig2-8arms-large"}

FORMATS = ("csv", "json")


def default_target(n: int) -> tuple:
    if n == 2:
        return TARGET_2
    if n == 8:
        return TARGET_8
    raise ValueError(f"no default target profile for n={n}; set f_star explicitly")


def resolve_preset(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS) + sorted(ALIASES)}")
    return name


@dataclass
class ExperimentConfig:
    preset: str | None = None
    network: NetworkConfig = field(default_factory=NetworkConfig)
    f_star: tuple | None = None
    T: int = 300
    window: int = 50
    K: int = 150
    step_size: float = 0.5
    seed: int = 0
    probe_rounds: int = 20
    early_stop: bool = True
    workers: int = 1
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.preset is not None:
            self.preset = resolve_preset(self.preset)
        if self.f_star is None:
            self.f_star = default_target(self.network.n)
        self.f_star = tuple(float(x) for x in self.f_star)
        check_target(self.f_star, self.network.n)
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not 1 <= self.window <= self.T:
            raise ValueError("window must satisfy 1 <= window <= T")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "ExperimentConfig":
        name = resolve_preset(name)
        net = overrides.pop("network", {})
        if isinstance(net, NetworkConfig):
            net = net.to_dict()
        network = NetworkConfig.from_dict({**PRESETS[name], **net})
        return cls(preset=name, network=network, **overrides)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["network"] = self.network.to_dict()
        d["f_star"] = list(self.f_star)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown experiment config keys: {sorted(unknown)}")
        preset = data.get("preset")
        net = data.pop("network", {}) or {}
        if preset is not None:
            net = {**PRESETS[resolve_preset(preset)], **net}
        return cls(network=NetworkConfig.from_dict(net), **data)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def load_config(source: str) -> ExperimentConfig:
    """A preset name or a path to a JSON config document."""
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise OSError(f"cannot read config file {path}: {exc}") from exc
        return ExperimentConfig.from_dict(data)
    return ExperimentConfig.from_preset(source)


def mean_agent_delay(cfg: NetworkConfig, probe_rounds: int, seed: int, theta=None, task_size=None) -> float:
    """Empirical mean of total delay / m under uniform random arm choice.

    Every probe round draws fresh types and task sizes for all agents.
    ``theta`` and ``task_size`` pin those draws (for degenerate checks).
    Infinite delays (zero channel gain) are excluded.
    """
    if probe_rounds < 1:
        raise ValueError("probe_rounds must be at least 1")
    m, n = cfg.m, cfg.n
    total, count = 0.0, 0
    for t in range(probe_rounds):
        rng = np.random.Generator(np.random.SFC64(np.random.SeedSequence(seed, spawn_key=(_PROBE_STREAM, t))))
        u = rng.random((2 * n + 2, m))
        arms = np.minimum((u[0] * n).astype(np.int64), n - 1)
        f = np.bincount(arms, minlength=n) / m
        cols = np.arange(m)
        if theta is None:
            th = theta_from_uniforms(u[1 : n + 1], u[n + 1 : 2 * n + 1], cfg)[arms, cols]
        else:
            th = np.broadcast_to(np.asarray(theta, dtype=float), (m,))
        s = task_size_from_uniforms(u[2 * n + 1], cfg) if task_size is None else np.full(m, float(task_size))
        d = np.asarray(total_delay(th, f[arms], s, cfg))
        finite = np.isfinite(d)
        total += float(d[finite].sum())
        count += int(finite.sum())
    return total / count / m


def calibrate_dmax(cfg: NetworkConfig, probe_rounds: int = 20, seed: int = 0, **pin) -> float:
    """Deadline 2 * m * (mean per-agent delay)."""
    return 2.0 * cfg.m * mean_agent_delay(cfg, probe_rounds, seed, **pin)


def _trace_dict(trace: SimulationTrace) -> dict:
    return {"seed": trace.seed, "profiles": trace.profiles.tolist(), "mean_reward": trace.mean_reward.tolist()}


@dataclass
class ExperimentReport:
    config: dict
    calibration: dict | None
    uniqueness: dict
    baseline: SimulationTrace
    final: SimulationTrace
    optimizer: list = field(default_factory=list)  # rows of (iter, alpha, f, objective)
    converged: bool = False
    final_alpha: list = field(default_factory=list)
    best_alpha: list = field(default_factory=list)
    baseline_f: list = field(default_factory=list)
    final_f: list = field(default_factory=list)
    scale_invariance: dict | None = None
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["baseline"] = _trace_dict(self.baseline)
        d["final"] = _trace_dict(self.final)
        return d


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Calibrate, check uniqueness, baseline run, optimize, final run."""
    timings = {}
    cfg = config.network
    calibration = None
    t0 = time.perf_counter()
    if cfg.d_max is None:
        d_bar = mean_agent_delay(cfg, config.probe_rounds, config.seed)
        cfg = cfg.replace(d_max=2.0 * cfg.m * d_bar)
        calibration = {"mean_agent_delay": d_bar, "d_max": cfg.d_max, "probe_rounds": config.probe_rounds}
        log.info("calibrated d_max = %.6g s (mean per-agent delay %.6g s)", cfg.d_max, d_bar)
    timings["calibration"] = time.perf_counter() - t0

    uniq = uniqueness_check(cfg)
    if not uniq.holds:
        log.info("uniqueness condition fails: beta(1+L) = %.3g", uniq.condition_value)

    t0 = time.perf_counter()
    uniform = np.full(cfg.n, 1.0 / cfg.n)
    baseline = simulate(cfg, uniform, config.T, config.seed, workers=config.workers)
    timings["baseline"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    alpha, trace = load_balance(
        config.f_star, config.step_size, config.K, config.T, config.window, cfg, config.seed,
        early_stop=config.early_stop, workers=config.workers,
    )
    timings["optimizer"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    final = simulate(cfg, alpha, config.T, config.seed + config.K, workers=config.workers)
    timings["final"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    scale = scale_invariance_check(cfg, alpha, config.T, config.window, config.seed + config.K + 1, workers=config.workers)
    timings["scale_invariance"] = time.perf_counter() - t0

    f_star = np.asarray(config.f_star)
    rows = []
    for k, rec in enumerate(trace.records, start=1):
        dist_sq = float(np.sum((rec.f - f_star) ** 2))
        rows.append({"iter": k, "objective_sq": dist_sq, "objective": float(np.sqrt(dist_sq)),
                     "alpha": rec.alpha.tolist(), "f": rec.f.tolist()})
    return ExperimentReport(
        config=config.to_dict(),
        calibration=calibration,
        uniqueness=uniq.to_dict(),
        baseline=baseline,
        final=final,
        optimizer=rows,
        converged=trace.converged,
        final_alpha=alpha.tolist(),
        best_alpha=trace.best_alpha.tolist(),
        baseline_f=average_profile(baseline, config.window).tolist(),
        final_f=average_profile(final, config.window).tolist(),
        scale_invariance=scale,
        timings=timings,
    )


def _fmt(x) -> str:
    return f"{x:.9g}"


def write_profiles_csv(path, profiles, mean_reward, n: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round"] + [f"f_{i + 1}" for i in range(n)] + ["mean_reward"])
        for t, (row, r) in enumerate(zip(profiles, mean_reward)):
            w.writerow([t] + [_fmt(x) for x in row] + [_fmt(r)])


def write_optimizer_csv(path, rows, n: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "objective_sq", "objective"] + [f"alpha_{i + 1}" for i in range(n)] + [f"f_{i + 1}" for i in range(n)])
        for r in rows:
            w.writerow([r["iter"], _fmt(r["objective_sq"]), _fmt(r["objective"])] + [_fmt(x) for x in r["alpha"]] + [_fmt(x) for x in r["f"]])


def export_report(report: ExperimentReport, out_dir, fmt: str = "csv", overwrite: bool = False) -> list[Path]:
    """Write ``report.json`` and, for ``fmt == "csv"``, the profile/optimizer CSVs.

    ``profiles.csv`` holds the final (load-balanced) run and
    ``baseline_profiles.csv`` the uniform-alpha run.
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    out = Path(out_dir)
    names = ["report.json"]
    if fmt == "csv":
        names += ["profiles.csv", "baseline_profiles.csv", "optimizer.csv"]
    paths = [out / name for name in names]
    if not overwrite:
        existing = [str(p) for p in paths if p.exists()]
        if existing:
            raise FileExistsError(f"refusing to overwrite {existing}; pass overwrite")
    try:
        out.mkdir(parents=True, exist_ok=True)
        n = len(report.config["f_star"])
        if fmt == "csv":
            write_profiles_csv(out / "profiles.csv", report.final.profiles, report.final.mean_reward, n)
            write_profiles_csv(out / "baseline_profiles.csv", report.baseline.profiles, report.baseline.mean_reward, n)
            write_optimizer_csv(out / "optimizer.csv", report.optimizer, n)
        (out / "report.json").write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing report to {out}: {exc}") from exc
    return paths


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())


def config_from_report(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(read_report(path)["config"])

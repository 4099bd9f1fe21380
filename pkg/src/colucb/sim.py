"""Seeded Monte Carlo harness: run policies over seeds, aggregate collaborative regret, compare policies.

Stream split: trial ``i`` of policy ``p`` draws rewards from
``SeedSequence([base_seed, i, env_id, 0])`` and policy randomness from
``SeedSequence([base_seed, i, p, 1])``, where ``env_id`` is ``p + 1`` for
independent streams and ``0`` for all policies when ``coupled`` is set.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from .algo import POLICIES, Trajectory, run
from .core import AlgoConfig, Instance

CURVE_POINTS = 512


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    instance: Instance
    policies: tuple[str, ...] = ("ColUCB", "IndependentUCB")
    horizon: int = 10_000
    num_seeds: int = 20
    base_seed: int = 0
    const_scale: float = 1.0
    coupled: bool = False
    default_arm: str = "empirical_best"
    jobs: int = 1
    curve_points: int = CURVE_POINTS
    instance_path: str | None = None

    def __post_init__(self):
        if self.num_seeds < 1:
            raise ValueError("num_seeds must be at least 1")
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if not self.policies:
            raise ValueError("at least one policy is required")
        for p in self.policies:
            if p not in POLICIES:
                raise ValueError(f"unknown policy {p!r}; choose from {POLICIES}")
        object.__setattr__(self, "policies", tuple(self.policies))

    def algo_config(self) -> AlgoConfig:
        return AlgoConfig.for_structure(self.instance.structure, self.horizon, self.const_scale, self.default_arm)

    def resolved(self) -> dict:
        """Every setting that influences the run, for manifests."""
        cfg = self.algo_config()
        return {
            "instance_path": self.instance_path,
            "num_arms": self.instance.num_arms,
            "num_groups": self.instance.num_groups,
            "policies": list(self.policies),
            "horizon": self.horizon,
            "num_seeds": self.num_seeds,
            "base_seed": self.base_seed,
            "const_scale": self.const_scale,
            "coupled": self.coupled,
            "default_arm": self.default_arm,
            "jobs": self.jobs,
            "curve_points": self.curve_points,
            "c_G": cfg.c_G,
            "conf_const": cfg.conf_const,
            "burnin_pulls": cfg.burnin_pulls,
        }


def trial_streams(base_seed: int, trial: int, policy_index: int, coupled: bool):
    env_id = 0 if coupled else policy_index + 1
    env = np.random.Generator(np.random.PCG64(np.random.SeedSequence([base_seed, trial, env_id, 0])))
    pol = np.random.Generator(np.random.PCG64(np.random.SeedSequence([base_seed, trial, policy_index, 1])))
    return env, pol


def curve_times(T: int, points: int = CURVE_POINTS) -> np.ndarray:
    """Round counts (1..T) at which curves are sampled, log-spaced, at most ``points``."""
    ts = np.unique(np.round(np.geomspace(1, T, points)).astype(np.int64))
    return ts[: points]


@dataclass(eq=False)
class TrialResult:
    policy: str
    trial: int
    group_regret: np.ndarray  # (G,)
    collaborative: float
    curve: np.ndarray  # max-over-groups cumulative regret at curve_times
    epoch_contention: dict
    epoch_q: dict
    t_min: int


def summarize_trajectory(tr: Trajectory, trial: int, times: np.ndarray) -> TrialResult:
    cum = tr.cumulative_regret()
    collab_curve = cum.max(axis=1)[times - 1]
    ec, eq = {}, {}
    if tr.policy == "ColUCB":
        for k in np.unique(tr.epoch):
            sel = tr.epoch == k
            ec[int(k)] = float(tr.contention_size[sel].mean())
            qs = tr.q_value[sel]
            qs = qs[np.isfinite(qs)]
            if qs.size:
                eq[int(k)] = float(qs.mean())
    return TrialResult(tr.policy, trial, tr.group_regret(), tr.collaborative_regret(), collab_curve, ec, eq, tr.t_min)


def run_trial(config: ExperimentConfig, policy_index: int, trial: int, keep: bool = False):
    policy = config.policies[policy_index]
    env, pol = trial_streams(config.base_seed, trial, policy_index, config.coupled)
    tr = run(policy, config.instance, config.algo_config(), env_rng=env, policy_rng=pol)
    res = summarize_trajectory(tr, trial, curve_times(config.horizon, config.curve_points))
    return (res, tr) if keep else res


def _run_trial_args(args):
    return run_trial(*args)


def mean_stderr(values: Sequence[float]) -> tuple[float, float | None]:
    v = np.asarray(values, dtype=float)
    mean = math.fsum(v) / len(v)
    if len(v) < 2:
        return mean, None
    var = math.fsum((v - mean) ** 2) / (len(v) - 1)
    return mean, math.sqrt(var / len(v))


@dataclass(eq=False)
class PolicySummary:
    policy: str
    per_seed: np.ndarray  # collaborative regret per trial
    group_regret: np.ndarray  # (seeds, G)
    mean: float
    stderr: float | None
    group_means: np.ndarray
    curve_t: np.ndarray
    curve_mean: np.ndarray
    curve_stderr: np.ndarray | None
    epoch_contention: dict
    epoch_q: dict
    t_min: int


@dataclass(eq=False)
class ExperimentReport:
    config: ExperimentConfig
    summaries: dict = field(default_factory=dict)

    def __getitem__(self, policy: str) -> PolicySummary:
        return self.summaries[policy]

    def to_dict(self) -> dict:
        out = {"config": self.config.resolved(), "policies": {}}
        for name, s in self.summaries.items():
            out["policies"][name] = {
                "mean_collaborative_regret": s.mean,
                "stderr": "NA" if s.stderr is None else s.stderr,
                "per_seed": s.per_seed.tolist(),
                "group_means": s.group_means.tolist(),
                "t_min": s.t_min,
                "epoch_mean_contention": {str(k): v for k, v in sorted(s.epoch_contention.items())},
                "epoch_mean_q": {str(k): v for k, v in sorted(s.epoch_q.items())},
            }
        return out


def _epoch_means(dicts: list[dict]) -> dict:
    keys = sorted({k for d in dicts for k in d})
    return {k: math.fsum(d[k] for d in dicts if k in d) / sum(1 for d in dicts if k in d) for k in keys}


def aggregate(config: ExperimentConfig, results: list[TrialResult]) -> ExperimentReport:
    report = ExperimentReport(config)
    times = curve_times(config.horizon, config.curve_points)
    for policy in config.policies:
        rs = sorted((r for r in results if r.policy == policy), key=lambda r: r.trial)
        per_seed = np.array([r.collaborative for r in rs])
        groups = np.array([r.group_regret for r in rs])
        mean, se = mean_stderr(per_seed)
        curves = np.array([r.curve for r in rs])
        cm = np.array([math.fsum(col) / len(col) for col in curves.T])
        cs = None
        if len(rs) > 1:
            cs = curves.std(axis=0, ddof=1) / math.sqrt(len(rs))
        gm = np.array([math.fsum(col) / len(col) for col in groups.T])
        report.summaries[policy] = PolicySummary(
            policy, per_seed, groups, mean, se, gm, times, cm, cs,
            _epoch_means([r.epoch_contention for r in rs]), _epoch_means([r.epoch_q for r in rs]),
            rs[0].t_min,
        )
    return report


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Every (policy, trial) pair once; the result does not depend on ``jobs``."""
    tasks = [(config, p, i) for p in range(len(config.policies)) for i in range(config.num_seeds)]
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_run_trial_args, tasks, chunksize=max(1, len(tasks) // (4 * config.jobs))))
    else:
        results = [run_trial(*t) for t in tasks]
    return aggregate(config, results)


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def compare(report: ExperimentReport, policy_a: str, policy_b: str) -> tuple[float, float]:
    """Mean paired difference ``a - b`` of collaborative regret and its z-score."""
    for p in (policy_a, policy_b):
        if p not in report.summaries:
            raise KeyError(f"policy {p!r} not in report")
    a, b = report[policy_a].per_seed, report[policy_b].per_seed
    if len(a) < 2:
        raise ValueError("paired comparison needs at least two seeds")
    d = a - b
    mean, se = mean_stderr(d)
    if se == 0:
        return mean, 0.0 if mean == 0 else math.copysign(math.inf, mean)
    return mean, mean / se


# ---------------------------------------------------------------------------- outputs


def _fmt(x) -> str:
    return "NA" if x is None else f"{x:.17g}"


def write_curves_csv(report: ExperimentReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("policy,t,mean_collaborative_regret,stderr\n")
        for name, s in report.summaries.items():
            for k, t in enumerate(s.curve_t):
                se = None if s.curve_stderr is None else float(s.curve_stderr[k])
                fh.write(f"{name},{t},{_fmt(float(s.curve_mean[k]))},{_fmt(se)}\n")


def write_summary_csv(report: ExperimentReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("policy,num_seeds,mean_collaborative_regret,stderr\n")
        for name, s in report.summaries.items():
            fh.write(f"{name},{len(s.per_seed)},{_fmt(s.mean)},{_fmt(s.stderr)}\n")


def write_per_seed_csv(report: ExperimentReport, path) -> None:
    with open(path, "w") as fh:
        G = report.config.instance.num_groups
        fh.write("policy,trial,collaborative_regret," + ",".join(f"group_{g}" for g in range(G)) + "\n")
        for name, s in report.summaries.items():
            for i, v in enumerate(s.per_seed):
                fh.write(f"{name},{i},{_fmt(float(v))}," + ",".join(_fmt(float(x)) for x in s.group_regret[i]) + "\n")


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def render_svg(report: ExperimentReport, reproducible: bool = False, width: int = 640, height: int = 400) -> str:
    """Line chart of mean collaborative regret vs t per policy with a +-2 stderr band."""
    pad_l, pad_r, pad_t, pad_b = 70, 20, 20, 50
    T = report.config.horizon
    ymax = 0.0
    for s in report.summaries.values():
        hi = s.curve_mean + (2 * s.curve_stderr if s.curve_stderr is not None else 0)
        ymax = max(ymax, float(hi.max()))
    ymax = ymax or 1.0

    def px(t):
        return pad_l + (width - pad_l - pad_r) * t / T

    def py(y):
        return height - pad_b - (height - pad_t - pad_b) * y / ymax

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">']
    if not reproducible:
        parts.append(f"<!-- generated {datetime.now(timezone.utc).isoformat()} -->")
    parts.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    x0, y0 = pad_l, height - pad_b
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{width - pad_r}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{pad_t}" stroke="black"/>')
    for k in range(5):
        t = T * k / 4
        y = ymax * k / 4
        parts.append(f'<text x="{px(t):.1f}" y="{y0 + 18}" text-anchor="middle">{t:.0f}</text>')
        parts.append(f'<text x="{x0 - 6}" y="{py(y) + 4:.1f}" text-anchor="end">{y:.3g}</text>')
    parts.append(f'<text x="{(width + pad_l) / 2:.0f}" y="{height - 10}" text-anchor="middle">round t</text>')
    for i, (name, s) in enumerate(report.summaries.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(t):.2f},{py(y):.2f}" for t, y in zip(s.curve_t, s.curve_mean))
        if s.curve_stderr is not None:
            up = s.curve_mean + 2 * s.curve_stderr
            lo = np.maximum(s.curve_mean - 2 * s.curve_stderr, 0)
            band = [f"{px(t):.2f},{py(y):.2f}" for t, y in zip(s.curve_t, up)]
            band += [f"{px(t):.2f},{py(y):.2f}" for t, y in zip(s.curve_t[::-1], lo[::-1])]
            parts.append(f'<polygon points="{" ".join(band)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{x0 + 10}" y="{pad_t + 16 * (i + 1)}" fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

"""Statistics over simulation results and multi-run experiment sweeps.

Percentiles are nearest-rank (sort ascending, take element ceil(p*n)-1) so
summaries are bit-exact across platforms. Throughput counts only completions
inside the trace horizon; requests drained after the horizon still count in
latency statistics. Sweeps run `runs_per_point` independently seeded
simulations per (axis value, policy) cell and report the mean and the
25th/75th percentile across runs of each per-run metric.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

from . import engine
from .errors import ValidationError
from .model_graph import ModelGraph
from .policies import PolicyConfig
from .slack import SlackConfig, default_dec_timesteps
from .traffic import LengthDistribution, TrafficConfig, gen_trace


def percentile(latencies: list[int], p: float) -> int:
    """Nearest-rank percentile of a non-empty list."""
    if not latencies:
        raise ValidationError("percentile of an empty list")
    if not (0.0 <= p <= 1.0):
        raise ValidationError("percentile fraction must be in [0, 1]")
    ordered = sorted(latencies)
    idx = math.ceil(p * len(ordered)) - 1
    idx = min(max(idx, 0), len(ordered) - 1)
    return ordered[idx]


@dataclass(frozen=True)
class RunSummary:
    policy: str
    rate_qps: Optional[float]
    seed: Optional[int]
    avg_latency_us: float
    p25_latency_us: int
    p50_latency_us: int
    p75_latency_us: int
    p99_latency_us: int
    throughput_rps: float
    sla_violation_rate: float
    request_count: int


def summarize(result: engine.SimResult, sla_target_us: int, horizon_us: int) -> RunSummary:
    if not result.records:
        raise ValidationError("cannot summarize an empty result")
    lats = [r.latency_us for r in result.records]
    violated = sum(1 for l in lats if l > sla_target_us)
    in_horizon = sum(1 for r in result.records if r.complete_us <= horizon_us)
    return RunSummary(
        policy=result.meta.get("policy", "?"),
        rate_qps=result.meta.get("rate_qps"),
        seed=result.meta.get("seed"),
        avg_latency_us=sum(lats) / len(lats),
        p25_latency_us=percentile(lats, 0.25),
        p50_latency_us=percentile(lats, 0.50),
        p75_latency_us=percentile(lats, 0.75),
        p99_latency_us=percentile(lats, 0.99),
        throughput_rps=in_horizon * 1_000_000.0 / horizon_us,
        sla_violation_rate=violated / len(lats),
        request_count=len(lats),
    )


def cdf(latencies: list[int]) -> list[tuple[int, float]]:
    """Empirical CDF: sorted unique values with cumulative fractions."""
    if not latencies:
        raise ValidationError("cdf of an empty list")
    ordered = sorted(latencies)
    n = len(ordered)
    out = []
    for i, v in enumerate(ordered, start=1):
        if i == n or ordered[i] != v:
            out.append((v, i / n))
    return out


# ---------------------------------------------------------------------------
# policy/slack construction from config records

def build_policy(obj: dict, model: ModelGraph,
                 length_dist: Optional[LengthDistribution],
                 sla_override: Optional[int] = None,
                 window_override: Optional[int] = None) -> PolicyConfig:
    """Build a PolicyConfig (with embedded slack config for lazyb/oracle)
    from a JSON policy record like
    {"kind": "lazyb", "max_batch": 64, "sla_target_us": 100000}."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("policy config must be an object with a 'kind'")
    kind = obj["kind"]
    max_batch = obj.get("max_batch", 64)
    window_us = window_override if window_override is not None else obj.get("window_us", 1000)
    slack_cfg = None
    if kind in ("lazyb", "oracle"):
        sla = sla_override if sla_override is not None else obj.get("sla_target_us")
        if sla is None:
            raise ValidationError(f"{kind} policy config needs sla_target_us")
        coverage_n = obj.get("coverage_n", 0.90)
        dec = obj.get("dec_timesteps")
        if dec is None:
            dec = default_dec_timesteps(model, length_dist, coverage_n)
        slack_cfg = SlackConfig(
            sla_target_us=sla,
            dec_timesteps=dec,
            coverage_n=coverage_n,
            credit_progress=obj.get("credit_progress", False),
        )
    return PolicyConfig(
        kind=kind,
        max_batch=max_batch,
        window_us=window_us,
        slack=slack_cfg,
        preempt_overhead_us=obj.get("preempt_overhead_us", 0),
        label=obj.get("label"),
    )


def run_once(catalog: dict[str, ModelGraph], model_name: str, rate_qps: float,
             duration_us: int, seed: int, policy: PolicyConfig,
             length_dist: Optional[LengthDistribution],
             sla_target_us: int) -> RunSummary:
    """Generate one trace and simulate it under one policy."""
    model = catalog.get(model_name)
    if model is None:
        raise ValidationError(f"unknown model {model_name!r}")
    cfg = TrafficConfig(rate_qps, duration_us, seed, model_name,
                        None if model.is_static else length_dist)
    trace = gen_trace(cfg, model)
    result = engine.run(catalog, trace, policy, seed=seed,
                        rate_qps=rate_qps, duration_us=duration_us)
    return summarize(result, sla_target_us, duration_us)


# ---------------------------------------------------------------------------
# sweeps

SWEEP_AXES = ("rate_qps", "sla_target_us", "window_us")

_AGG_METRICS = (
    "avg_latency_us", "p50_latency_us", "p99_latency_us",
    "throughput_rps", "sla_violation_rate",
)

SWEEP_HEADER = ["axis", "value", "policy", "runs"] + [
    f"{m}_{s}" for m in _AGG_METRICS for s in ("mean", "p25", "p75")
]


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    policies: tuple[dict, ...]
    model: str
    duration_us: int
    runs_per_point: int = 20
    base_seed: int = 1
    rate_qps: float = 250.0          # fixed rate for non-rate axes
    sla_target_us: int = 100_000     # fixed SLA for non-SLA axes

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValidationError(f"unknown sweep axis {self.axis!r}")
        if not self.values:
            raise ValidationError("sweep needs at least one axis value")
        if not self.policies:
            raise ValidationError("sweep needs at least one policy")
        if self.runs_per_point < 1:
            raise ValidationError("runs_per_point must be >= 1")
        if self.duration_us < 1:
            raise ValidationError("duration_us must be >= 1")


def load_sweep_spec(obj: dict) -> SweepSpec:
    try:
        return SweepSpec(
            axis=obj["axis"],
            values=tuple(obj["values"]),
            policies=tuple(obj["policies"]),
            model=obj["model"],
            duration_us=obj.get("duration_us", obj.get("duration_ms", 1000) * 1000),
            runs_per_point=obj.get("runs_per_point", 20),
            base_seed=obj.get("base_seed", 1),
            rate_qps=obj.get("rate_qps", 250.0),
            sla_target_us=obj.get("sla_target_us", 100_000),
        )
    except KeyError as e:
        raise ValidationError(f"sweep spec missing field {e}") from e


def _aggregate(summaries: list[RunSummary]) -> list:
    out = []
    for metric in _AGG_METRICS:
        vals = [getattr(s, metric) for s in summaries]
        out.append(sum(vals) / len(vals))
        out.append(percentile(vals, 0.25))
        out.append(percentile(vals, 0.75))
    return out


def run_sweep(spec: SweepSpec, catalog: dict[str, ModelGraph],
              length_dist: Optional[LengthDistribution]) -> list[list]:
    """Rows (one per axis value x policy) in spec order, SWEEP_HEADER schema."""
    model = catalog.get(spec.model)
    if model is None:
        raise ValidationError(f"unknown model {spec.model!r}")
    rows = []
    for value in spec.values:
        rate = value if spec.axis == "rate_qps" else spec.rate_qps
        sla = value if spec.axis == "sla_target_us" else spec.sla_target_us
        window = value if spec.axis == "window_us" else None
        for pobj in spec.policies:
            policy = build_policy(
                pobj, model, length_dist,
                sla_override=sla if pobj["kind"] in ("lazyb", "oracle") else None,
                window_override=window,
            )
            summaries = [
                run_once(catalog, spec.model, rate, spec.duration_us,
                         spec.base_seed + i, policy, length_dist, sla)
                for i in range(spec.runs_per_point)
            ]
            rows.append([spec.axis, value, policy.display, spec.runs_per_point]
                        + _aggregate(summaries))
    return rows


# ---------------------------------------------------------------------------
# CSV emission

def write_sweep_csv(path, rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        w.writerows(rows)


CDF_HEADER = ["latency_us", "cum_fraction"]


def write_cdf_csv(path, points: list[tuple[int, float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CDF_HEADER)
        w.writerows(points)


SUMMARY_HEADER = [
    "policy", "rate_qps", "seed", "avg_latency_us", "p25_latency_us",
    "p50_latency_us", "p75_latency_us", "p99_latency_us", "throughput_rps",
    "sla_violation_rate", "request_count",
]


def write_summary_csv(path, summaries: list[RunSummary]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in summaries:
            w.writerow([s.policy, s.rate_qps, s.seed, s.avg_latency_us,
                        s.p25_latency_us, s.p50_latency_us, s.p75_latency_us,
                        s.p99_latency_us, s.throughput_rps,
                        s.sla_violation_rate, s.request_count])

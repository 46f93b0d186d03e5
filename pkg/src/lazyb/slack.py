"""SLA slack prediction.

Slack = SLA target - (initial server wait + predicted execution time).
The predicted execution time of a prospective batch is deliberately
conservative: the sum of every member's single-batch, executed-in-isolation
graph latency, with the decoder unroll fixed at a coverage quantile of the
output-length distribution rather than the unknown true length.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError
from .model_graph import ModelGraph, NodeKind
from .traffic import LengthDistribution


@dataclass(frozen=True)
class SlackConfig:
    sla_target_us: int
    dec_timesteps: int = 1
    coverage_n: float = 0.90
    credit_progress: bool = False

    def __post_init__(self):
        if self.sla_target_us < 1:
            raise ValidationError("sla_target_us must be positive")
        if self.dec_timesteps < 1:
            raise ValidationError("dec_timesteps must be >= 1")
        if not (0.0 < self.coverage_n <= 1.0):
            raise ValidationError("coverage_n must be in (0, 1]")


@dataclass(frozen=True)
class SlackEstimate:
    slack_us: int
    t_wait_us: int
    predicted_exec_us: int


def coverage_threshold(dist: LengthDistribution, n: float) -> int:
    """Smallest length whose cumulative probability reaches n."""
    if not (0.0 < n <= 1.0):
        raise ValidationError("coverage fraction must be in (0, 1]")
    for length, p in dist.cdf:
        if p >= n - 1e-12:
            return length
    return dist.max_len


def single_input_exec_time(model: ModelGraph, enc_t: int, dec_t: int) -> int:
    """Graph-wide latency of one input at batch size 1: statics once, encoder
    nodes enc_t times, decoder nodes dec_t times."""
    if not model.is_static and dec_t < 1:
        raise ValidationError("dec_t must be >= 1 for dynamic models")
    total = 0
    for node in model.nodes:
        if node.kind is NodeKind.STATIC:
            total += node.base_latency_us
        elif node.kind is NodeKind.ENCODER:
            total += node.base_latency_us * enc_t
        else:
            total += node.base_latency_us * dec_t
    return total


def default_dec_timesteps(model: ModelGraph, dist: LengthDistribution | None, n: float) -> int:
    """Predictor decoder-length assumption for a model: an explicit catalog
    override wins, otherwise the n-coverage quantile of the distribution."""
    if model.is_static:
        return 1
    if model.dec_timesteps_default is not None:
        return model.dec_timesteps_default
    if dist is None:
        return model.max_dec_timesteps
    return min(coverage_threshold(dist, n), model.max_dec_timesteps)


def slack(cfg: SlackConfig, t_wait_us: int, exec_times_us: list[int]) -> SlackEstimate:
    if not exec_times_us:
        raise ValidationError("exec time list must be non-empty")
    if t_wait_us < 0:
        raise ValidationError("t_wait_us must be non-negative")
    predicted = sum(exec_times_us)
    return SlackEstimate(
        slack_us=cfg.sla_target_us - (t_wait_us + predicted),
        t_wait_us=t_wait_us,
        predicted_exec_us=predicted,
    )

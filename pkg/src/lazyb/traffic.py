"""Open-loop request generation and trace file I/O.

Arrivals follow a Poisson process (exponential inter-arrival gaps via
inverse transform); decoder lengths for dynamic models are sampled from a
step CDF over output sequence lengths. Generation is a pure function of the
config, including the seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

from .errors import ValidationError
from .model_graph import ModelGraph
from .rng import Xoshiro256pp


@dataclass(frozen=True)
class LengthDistribution:
    cdf: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.cdf:
            raise ValidationError("empty length distribution")
        prev_len, prev_p = 0, 0.0
        for length, p in self.cdf:
            if length <= prev_len:
                raise ValidationError("lengths must be strictly increasing")
            if p <= prev_p:
                raise ValidationError("cumulative probabilities must be strictly increasing")
            prev_len, prev_p = length, p
        if abs(self.cdf[-1][1] - 1.0) > 1e-12:
            raise ValidationError("final cumulative probability must be 1.0")

    @property
    def max_len(self) -> int:
        return self.cdf[-1][0]

    def mean(self) -> float:
        out, prev = 0.0, 0.0
        for length, p in self.cdf:
            out += length * (p - prev)
            prev = p
        return out


@dataclass(frozen=True)
class TrafficConfig:
    rate_qps: float
    duration_us: int
    seed: int
    model_name: str
    length_dist: Optional[LengthDistribution] = None

    def __post_init__(self):
        if self.rate_qps <= 0:
            raise ValidationError("rate_qps must be positive")
        if self.duration_us <= 0:
            raise ValidationError("duration_us must be positive")


@dataclass(frozen=True)
class InferenceRequest:
    id: int
    arrival_us: int
    model_name: str
    actual_dec_timesteps: int = 1


def sample_length(dist: LengthDistribution, u: float) -> int:
    """Inverse-CDF step lookup: smallest length whose cumulative prob > u."""
    u = min(max(u, 0.0), math.nextafter(1.0, 0.0))
    for length, p in dist.cdf:
        if p > u:
            return length
    return dist.max_len


def gen_trace(cfg: TrafficConfig, model: ModelGraph) -> list[InferenceRequest]:
    if not model.is_static and cfg.length_dist is None:
        raise ValidationError(f"dynamic model {cfg.model_name!r} needs a length distribution")
    if cfg.length_dist is not None and cfg.length_dist.max_len > model.max_dec_timesteps:
        raise ValidationError("length distribution exceeds the model's max_dec_timesteps")
    rng = Xoshiro256pp(cfg.seed)
    out = []
    t = 0.0
    i = 0
    scale = 1_000_000.0 / cfg.rate_qps
    while True:
        u = rng.uniform()
        t += -math.log(1.0 - u) * scale
        arrival = round(t)
        if arrival > cfg.duration_us:
            break
        if model.is_static:
            dec = 1
        else:
            dec = sample_length(cfg.length_dist, rng.uniform())
        out.append(InferenceRequest(i, arrival, cfg.model_name, dec))
        i += 1
    return out


def load_band(rate_qps: float) -> str:
    """Low/medium/heavy traffic classification."""
    if rate_qps < 256:
        return "low"
    if rate_qps <= 500:
        return "medium"
    return "heavy"


TRACE_HEADER = ["id", "arrival_us", "model", "actual_dec_timesteps"]


def write_trace(path, requests: list[InferenceRequest]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in requests:
            w.writerow([r.id, r.arrival_us, r.model_name, r.actual_dec_timesteps])


def read_trace(path, catalog: Optional[dict[str, ModelGraph]] = None) -> list[InferenceRequest]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != TRACE_HEADER:
            raise ValidationError(f"bad trace header: {header}")
        prev_arrival = -1
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ValidationError(f"trace line {lineno}: expected 4 fields")
            try:
                rid, arrival, dec = int(row[0]), int(row[1]), int(row[3])
            except ValueError:
                raise ValidationError(f"trace line {lineno}: malformed integers")
            if arrival < prev_arrival:
                raise ValidationError(f"trace line {lineno}: arrivals not monotonic")
            model_name = row[2]
            if catalog is not None:
                model = catalog.get(model_name)
                if model is None:
                    raise ValidationError(f"trace line {lineno}: unknown model {model_name!r}")
                if not model.is_static and not (1 <= dec <= model.max_dec_timesteps):
                    raise ValidationError(f"trace line {lineno}: bad decoder length {dec}")
            prev_arrival = arrival
            out.append(InferenceRequest(rid, arrival, model_name, dec))
    return out


def load_length_cdf(path_or_file) -> LengthDistribution:
    import json

    if hasattr(path_or_file, "read"):
        raw = json.load(path_or_file)
    else:
        with open(path_or_file, "r", encoding="utf-8") as f:
            raw = json.load(f)
    try:
        cdf = tuple((int(l), float(p)) for l, p in raw["cdf"])
    except (KeyError, TypeError, ValueError):
        raise ValidationError("length CDF file must contain {\"cdf\": [[len, prob], ...]}")
    return LengthDistribution(cdf=cdf)


def shipped_length_cdf() -> LengthDistribution:
    from importlib.resources import files

    return load_length_cdf(files("lazyb.data").joinpath("length_cdf.json").open("r"))

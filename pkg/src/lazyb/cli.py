"""Command-line interface.

Subcommands:
  gen-trace  generate a Poisson request trace CSV
  run        simulate one trace under one policy, emit a result CSV
  sweep      run a multi-point experiment sweep, emit an aggregate CSV
  curve      throughput/latency vs batch size for one model (cost model only)
  report     post-process a result CSV into a latency CDF or a summary row

Exit codes: 0 success, 1 validation error, 2 internal invariant failure.
Set LAZYB_LOG=debug|info for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from . import engine, metrics
from .errors import InternalError, ValidationError
from .model_graph import load_catalog, shipped_catalog
from .traffic import (
    TrafficConfig,
    gen_trace,
    load_length_cdf,
    read_trace,
    shipped_length_cdf,
    write_trace,
)

log = logging.getLogger("lazyb")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse exits 2 by default; 2 is reserved for internal failures
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _load_catalog(path):
    return load_catalog(path) if path else shipped_catalog()


def _load_length_cdf(path):
    return load_length_cdf(path) if path else shipped_length_cdf()


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read JSON file {path}: {e}") from e


def cmd_gen_trace(args):
    catalog = _load_catalog(args.catalog)
    model = catalog.get(args.model)
    if model is None:
        raise ValidationError(f"unknown model {args.model!r}")
    dist = None if model.is_static else _load_length_cdf(args.length_cdf)
    cfg = TrafficConfig(args.rate, args.duration_ms * 1000, args.seed, args.model, dist)
    trace = gen_trace(cfg, model)
    write_trace(args.out, trace)
    log.info("wrote %d requests to %s", len(trace), args.out)


def cmd_run(args):
    catalog = _load_catalog(args.catalog)
    trace = read_trace(args.trace, catalog)
    if not trace:
        raise ValidationError("trace is empty")
    model = catalog[trace[0].model_name]
    pobj = _load_json(args.policy_config)
    if "policy" in pobj:
        pobj = pobj["policy"]
    dist = None if model.is_static else _load_length_cdf(args.length_cdf)
    policy = metrics.build_policy(pobj, model, dist)
    sla = pobj.get("sla_target_us", 100_000)
    result = engine.run(catalog, trace, policy,
                        collect_log=args.event_log is not None)
    engine.write_result(args.out, result, sla)
    if args.event_log is not None:
        with open(args.event_log, "w", encoding="utf-8", newline="\n") as f:
            f.write("time_us,event,detail\n")
            for line in result.event_log:
                f.write(line + "\n")
    log.info("simulated %d requests under %s", len(result.records), policy.display)


def cmd_sweep(args):
    catalog = _load_catalog(args.catalog)
    spec = metrics.load_sweep_spec(_load_json(args.spec))
    model = catalog.get(spec.model)
    if model is None:
        raise ValidationError(f"unknown model {spec.model!r}")
    dist = None if model.is_static else _load_length_cdf(args.length_cdf)
    rows = metrics.run_sweep(spec, catalog, dist)
    metrics.write_sweep_csv(args.out, rows)
    log.info("wrote %d sweep rows to %s", len(rows), args.out)


def cmd_curve(args):
    from .cost_model import throughput_curve

    catalog = _load_catalog(args.catalog)
    model = catalog.get(args.model)
    if model is None:
        raise ValidationError(f"unknown model {args.model!r}")
    try:
        batches = [int(b) for b in args.batches.split(",") if b]
    except ValueError:
        raise ValidationError(f"bad batch list {args.batches!r}")
    rows = throughput_curve(model, batches)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["batch", "throughput_rps", "total_latency_us", "latency_per_item_us"])
        w.writerows(rows)
    log.info("wrote curve for %s to %s", args.model, args.out)


def _read_result_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != engine.RESULT_HEADER:
            raise ValidationError(f"bad result header: {reader.fieldnames}")
        for row in reader:
            rows.append(row)
    if not rows:
        raise ValidationError("result CSV has no rows")
    return rows


def cmd_report(args):
    rows = _read_result_csv(getattr(args, "in"))
    lats = [int(r["latency_us"]) for r in rows]
    if args.kind == "cdf":
        metrics.write_cdf_csv(args.out, metrics.cdf(lats))
    else:
        horizon = args.horizon_ms * 1000 if args.horizon_ms else max(
            int(r["complete_us"]) for r in rows)
        violated = sum(1 for r in rows if r["sla_violated"] == "true")
        in_horizon = sum(1 for r in rows if int(r["complete_us"]) <= horizon)
        summary = metrics.RunSummary(
            policy="report", rate_qps=None, seed=None,
            avg_latency_us=sum(lats) / len(lats),
            p25_latency_us=metrics.percentile(lats, 0.25),
            p50_latency_us=metrics.percentile(lats, 0.50),
            p75_latency_us=metrics.percentile(lats, 0.75),
            p99_latency_us=metrics.percentile(lats, 0.99),
            throughput_rps=in_horizon * 1_000_000.0 / horizon,
            sla_violation_rate=violated / len(rows),
            request_count=len(rows),
        )
        metrics.write_summary_csv(args.out, [summary])
    log.info("wrote %s report to %s", args.kind, args.out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lazyb", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-trace", help="generate a Poisson request trace")
    g.add_argument("--rate", type=float, required=True, help="arrival rate, requests/sec")
    g.add_argument("--duration-ms", type=int, required=True)
    g.add_argument("--model", required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--length-cdf", default=None)
    g.add_argument("--catalog", default=None)
    g.set_defaults(func=cmd_gen_trace)

    r = sub.add_parser("run", help="simulate one trace under one policy")
    r.add_argument("--catalog", default=None)
    r.add_argument("--trace", required=True)
    r.add_argument("--policy-config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--event-log", default=None)
    r.add_argument("--length-cdf", default=None)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a multi-point experiment sweep")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--catalog", default=None)
    s.add_argument("--length-cdf", default=None)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("curve", help="cost-model throughput vs batch size")
    c.add_argument("--catalog", default=None)
    c.add_argument("--model", required=True)
    c.add_argument("--batches", required=True, help="comma-separated batch sizes")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_curve)

    rep = sub.add_parser("report", help="post-process a result CSV")
    rep.add_argument("--in", required=True)
    rep.add_argument("--kind", choices=("cdf", "summary"), required=True)
    rep.add_argument("--out", required=True)
    rep.add_argument("--horizon-ms", type=int, default=None)
    rep.set_defaults(func=cmd_report)
    return p


def _setup_logging():
    level_name = os.environ.get("LAZYB_LOG", "").lower()
    level = {"debug": logging.DEBUG, "info": logging.INFO}.get(level_name)
    if level is not None:
        logging.basicConfig(stream=sys.stderr, level=level,
                            format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except (ValidationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except InternalError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

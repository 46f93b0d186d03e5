"""Acceptance suite: one test per criterion, one pass/fail line each.

Simulation-heavy criteria share a session-scoped run cache so each
(model, policy, rate, seed) cell is simulated exactly once.
"""

import hashlib
import itertools
import json
import random

import pytest

from lazyb import engine
from lazyb.bst import BatchStateTable
from lazyb.cli import main as cli_main
from lazyb.cost_model import throughput_curve
from lazyb.metrics import build_policy, percentile, summarize
from lazyb.model_graph import NodeCursor, build_model
from lazyb.policies import PolicyConfig
from lazyb.slack import SlackConfig, single_input_exec_time, slack
from lazyb.traffic import LengthDistribution, TrafficConfig, gen_trace

DURATION_US = 5_000_000
SEEDS = tuple(range(1, 21))
WINDOWS_US = (5_000, 25_000, 50_000, 75_000, 95_000)
SLA_US = 100_000
MODELS = ("resnet", "gnmt", "transformer")


class _Run:
    __slots__ = ("lats", "summary", "admissions")

    def __init__(self, lats, summary, admissions):
        self.lats = lats
        self.summary = summary
        self.admissions = admissions


@pytest.fixture(scope="session")
def sim(catalog, length_cdf):
    """Memoised simulation runner keyed by (model, policy-key, rate, seed)."""
    cache = {}

    def policy_for(pkey, model):
        if pkey == "serial":
            return PolicyConfig("serial")
        if isinstance(pkey, tuple) and pkey[0] == "graphb":
            return PolicyConfig("graphb", window_us=pkey[1])
        kind, sla = pkey if isinstance(pkey, tuple) else (pkey, SLA_US)
        return build_policy({"kind": kind, "sla_target_us": sla},
                            model, length_cdf)

    def once(model_name, pkey, rate, seed):
        key = (model_name, pkey, rate, seed)
        if key not in cache:
            model = catalog[model_name]
            policy = policy_for(pkey, model)
            cfg = TrafficConfig(rate, DURATION_US, seed, model_name,
                                None if model.is_static else length_cdf)
            trace = gen_trace(cfg, model)
            res = engine.run(catalog, trace, policy, seed=seed,
                             rate_qps=rate, duration_us=DURATION_US)
            cache[key] = _Run([r.latency_us for r in res.records],
                              summarize(res, SLA_US, DURATION_US),
                              res.admissions)
        return cache[key]

    return once


def _mean_avg(sim, model, pkey, rate):
    return sum(sim(model, pkey, rate, s).summary.avg_latency_us
               for s in SEEDS) / len(SEEDS)


def _mean_thr(sim, model, pkey, rate):
    return sum(sim(model, pkey, rate, s).summary.throughput_rps
               for s in SEEDS) / len(SEEDS)


def _pooled_lats(sim, model, pkey, rate):
    out = []
    for s in SEEDS:
        out.extend(sim(model, pkey, rate, s).lats)
    return out


# --- criterion 1 -------------------------------------------------------------

def test_c01_slack_arithmetic():
    assert slack(SlackConfig(30), 2, [8]).slack_us == 20
    rnd = random.Random(20260823)
    for _ in range(1000):
        sla = rnd.randint(1, 200_000)
        t_wait = rnd.randint(0, 50_000)
        ex = [rnd.randint(1, 30_000) for _ in range(rnd.randint(1, 8))]
        # brute-force re-evaluation of the slack identity, bit-exact
        assert slack(SlackConfig(sla), t_wait, ex).slack_us == \
            sla - (t_wait + sum(ex))


# --- criterion 2 -------------------------------------------------------------

def test_c02_single_input_exec_times(catalog):
    assert single_input_exec_time(catalog["resnet"], 1, 1) == 1100
    gn = catalog["gnmt"]
    assert single_input_exec_time(
        gn, gn.enc_timesteps, gn.calibration_dec_timesteps) == 7200
    tf = catalog["transformer"]
    assert single_input_exec_time(
        tf, tf.enc_timesteps, tf.calibration_dec_timesteps) == 2400


# --- criterion 3 -------------------------------------------------------------

def test_c03_throughput_curve_shape(catalog):
    rows = throughput_curve(catalog["resnet"], list(range(1, 65)))
    thr = [r[1] for r in rows]
    per_item = [r[3] for r in rows]
    n_nodes = len(catalog["resnet"].nodes)
    # non-decreasing, allowing one integer-rounding step per node
    for i in range(63):
        total = rows[i + 1][2]
        assert thr[i + 1] >= thr[i] * (1 - n_nodes / total)
    # saturated for all batch >= 16 within the same rounding step
    for b, t, total, _ in rows[15:]:
        assert t >= thr[15] * (1 - n_nodes / total)
        assert t <= thr[15] + 1e-9
    # per-input latency non-increasing up to saturation
    assert all(per_item[i] >= per_item[i + 1] - 1e-9 for i in range(15))


# --- criterion 4 -------------------------------------------------------------

def test_c04_graphb_vs_serial_tradeoff(sim):
    g95 = ("graphb", 95_000)
    # light load: the 95ms window inflates latency at least 3x over serial
    assert _mean_avg(sim, "resnet", g95, 16) >= \
        3 * _mean_avg(sim, "resnet", "serial", 16)
    # overload: batching at least doubles sustained throughput
    assert _mean_thr(sim, "resnet", g95, 2000) >= \
        2 * _mean_thr(sim, "resnet", "serial", 2000)


# --- criterion 5 -------------------------------------------------------------

def test_c05_lazyb_beats_best_graphb(sim):
    for model in MODELS:
        for rate in (16, 250, 1000):
            lazy_avg = _mean_avg(sim, model, "lazyb", rate)
            lazy_thr = _mean_thr(sim, model, "lazyb", rate)
            best_g_avg = min(_mean_avg(sim, model, ("graphb", w), rate)
                             for w in WINDOWS_US)
            best_g_thr = max(_mean_thr(sim, model, ("graphb", w), rate)
                             for w in WINDOWS_US)
            assert lazy_avg <= best_g_avg, \
                f"{model}@{rate}: lazyb {lazy_avg:.0f} > best graphb {best_g_avg:.0f}"
            assert lazy_thr >= 0.95 * best_g_thr, \
                f"{model}@{rate}: lazyb thr {lazy_thr:.1f} < 0.95x {best_g_thr:.1f}"
            if rate == 1000:
                assert best_g_avg >= 1.5 * lazy_avg, \
                    f"{model}@1000: ratio {best_g_avg / lazy_avg:.2f} < 1.5"


# --- criterion 6 -------------------------------------------------------------

def test_c06_lazyb_tail_at_heavy_load(sim):
    for model in MODELS:
        lazy_p99 = percentile(_pooled_lats(sim, model, "lazyb", 1000), 0.99)
        best_g_p99 = min(
            percentile(_pooled_lats(sim, model, ("graphb", w), 1000), 0.99)
            for w in WINDOWS_US)
        assert lazy_p99 < best_g_p99, \
            f"{model}: lazyb p99 {lazy_p99} >= best graphb p99 {best_g_p99}"


# --- criterion 7 -------------------------------------------------------------

def test_c07_sla_violation_sweep(sim):
    def viol(lats, target_us):
        return sum(1 for l in lats if l > target_us) / len(lats)

    thresholds = [t * 1000 for t in range(20, 101, 10)]
    policies = ["lazyb"] + [("graphb", w) for w in WINDOWS_US]
    rates_at = {}
    for pkey in policies:
        lats = _pooled_lats(sim, "gnmt", pkey, 1000)
        series = [viol(lats, t) for t in thresholds]
        # violation rate monotonically non-increasing in the SLA target
        assert all(series[i] >= series[i + 1] for i in range(len(series) - 1)), \
            f"{pkey}: non-monotone {series}"
        rates_at[pkey] = (lats, series)
    # a finite threshold above which lazyb violates exactly nothing
    lazy_lats, _ = rates_at["lazyb"]
    finite_threshold = max(lazy_lats)
    assert viol(lazy_lats, finite_threshold) == 0.0
    # while at 100 ms at least one graphb configuration exceeds 25%
    worst_g = max(viol(rates_at[("graphb", w)][0], 100_000)
                  for w in WINDOWS_US)
    assert worst_g > 0.25, f"worst graphb violation at 100ms only {worst_g:.2f}"


# --- criterion 8 -------------------------------------------------------------

def test_c08_oracle_dominance(sim):
    # a 50 ms target at medium load makes the admission gate bind, so the
    # two estimators are actually exercised against each other
    sla = 50_000
    for model in MODELS:
        for seed in SEEDS:
            orun = sim(model, ("oracle", sla), 250, seed)
            lrun = sim(model, ("lazyb", sla), 250, seed)
            for a in orun.admissions:
                assert a.predicted_exec_us <= a.predicted_exec_cons_us, \
                    f"{model} seed {seed}: oracle estimate above conservative"
            o_avg = orun.summary.avg_latency_us
            l_avg = lrun.summary.avg_latency_us
            assert o_avg <= l_avg * 1.02, \
                f"{model} seed {seed}: oracle avg {o_avg:.0f} > lazyb {l_avg:.0f} +2%"


# --- criterion 9 -------------------------------------------------------------

def test_c09_conservativeness_exhaustive():
    # 3-node model: one encoder timestep, a recurrent decoder, a static tail
    model = build_model({
        "name": "m3", "kind": "dynamic", "enc_timesteps": 1,
        "max_dec_timesteps": 2,
        "nodes": [
            {"kind": "encoder", "base_latency_us": 100, "saturation_batch": 2,
             "weight_group": 0},
            {"kind": "decoder", "base_latency_us": 200, "saturation_batch": 2,
             "weight_group": 1},
            {"kind": "static", "base_latency_us": 50, "saturation_batch": 2},
        ],
    })
    catalog = {"m3": model}
    arrivals = (0, 500, 1000)
    checked = admitted_total = 0
    for size in (1, 2, 3):
        arrival_sets = itertools.combinations_with_replacement(arrivals, size)
        for arr in arrival_sets:
            for decs in itertools.product((1, 2), repeat=size):
                for sla in (700, 1000, 1500):
                    trace = [engine.InferenceRequest(i, a, "m3", d)
                             for i, (a, d) in enumerate(zip(arr, decs))]
                    cfg = SlackConfig(sla_target_us=sla, dec_timesteps=2)
                    res = engine.run(catalog, trace,
                                     PolicyConfig("lazyb", slack=cfg),
                                     collect_log=True)
                    complete = {r.id: r.complete_us - r.arrival_us
                                for r in res.records}
                    # every admit with non-negative slack keeps its promise
                    for line in res.event_log:
                        _, event, detail = line.split(",", 2)
                        if event != "admit":
                            continue
                        ids_part, slack_part = detail.split(",")
                        s = int(slack_part.split("=")[1])
                        if s < 0:
                            continue
                        for rid in ids_part.split("=")[1].split("|"):
                            admitted_total += 1
                            assert complete[int(rid)] <= sla, \
                                f"trace {arr}/{decs} sla {sla}: id {rid} late"
                    checked += 1
    assert checked == 330  # (3 + 6*4 + 10*8) arrival/length combos x 3 SLAs
    assert admitted_total > 0  # the gate actually admitted something


# --- criterion 10 ------------------------------------------------------------

def test_c10_cellular_degradation(mixed_model, rnn_model):
    # (a) mixed model: no two nodes share weights, so cellular may never
    # join and must replay graphb exactly, byte for byte, across 100 seeds
    dist = LengthDistribution(((2, 0.6), (4, 1.0)))
    cat = {"mixed": mixed_model}
    for seed in range(100):
        cfg = TrafficConfig(300, 200_000, seed, "mixed", dist)
        trace = gen_trace(cfg, mixed_model)
        if not trace:
            continue
        logs = []
        for kind in ("cellular", "graphb"):
            res = engine.run(cat, trace, PolicyConfig(kind, window_us=5000),
                             collect_log=True)
            logs.append("\n".join(res.event_log).encode())
        assert hashlib.sha256(logs[0]).digest() == hashlib.sha256(logs[1]).digest(), \
            f"seed {seed}: cellular and graphb logs diverge on the mixed model"

    # (b) pure-RNN shared-weight cell: joining mid-flight must win at load
    cat = {"rnn": rnn_model}
    cell_avgs, graph_avgs = [], []
    for seed in range(10):
        cfg = TrafficConfig(1000, 1_000_000, seed, "rnn", dist)
        trace = gen_trace(cfg, rnn_model)
        for kind, sink in (("cellular", cell_avgs), ("graphb", graph_avgs)):
            res = engine.run(cat, trace, PolicyConfig(kind, window_us=1000))
            lats = [r.latency_us for r in res.records]
            sink.append(sum(lats) / len(lats))
    assert sum(cell_avgs) / 10 < sum(graph_avgs) / 10, \
        "cellular did not beat graphb on the pure-RNN cell"


# --- criterion 11 ------------------------------------------------------------

def test_c11_bst_fuzzing_and_o1_audit():
    rnd = random.Random(777)
    bst = BatchStateTable()
    live = set()
    next_id = 0
    ops = 0
    while ops < 100_000:
        top = bst.active()
        choices = ["push"]
        if top is not None:
            choices.append("advance")
        if top is not None:
            choices += ["retire", "retire"]
        kind = rnd.choice(choices)
        if kind == "push":
            n = rnd.randint(1, 3)
            ids = list(range(next_id, next_id + n))
            cur = NodeCursor(rnd.randint(0, 4), rnd.randint(0, 4))
            if top is not None and top.next == cur:
                continue
            bst.push(ids, cur, "m")
            next_id += n
            live.update(ids)
        elif kind == "advance":
            bst.advance_top(NodeCursor(rnd.randint(0, 4), rnd.randint(0, 4)))
        else:
            # mutation is boundary-only: the engine retires members of the
            # active (top) entry exclusively, at node completion
            rid = rnd.choice(top.request_ids)
            bst.retire(rid)
            live.discard(rid)
        ops += 1
        # request conservation
        assert bst.request_count() == len(live)
        # merge-only-on-equality: adjacent entries never share a cursor
        entries = bst.entries
        for i in range(len(entries) - 1):
            assert not (entries[i].next == entries[i + 1].next
                        and entries[i].model_name == entries[i + 1].model_name)
        # no empty entries survive a boundary
        assert all(e.request_ids for e in entries)
    assert bst.request_ids() == live
    # O(1) audit: the probe counter advances by exactly one per active() call
    # no matter how deep the stack is
    before = bst.active_probe_ops
    for _ in range(1000):
        bst.active()
    assert bst.active_probe_ops - before == 1000


# --- criterion 12 ------------------------------------------------------------

def test_c12_cli_determinism(tmp_path):
    trace = tmp_path / "trace.csv"
    assert cli_main(["gen-trace", "--rate", "400", "--duration-ms", "500",
                     "--model", "gnmt", "--seed", "11", "--out", str(trace)]) == 0
    policy = tmp_path / "policy.json"
    policy.write_text(json.dumps({"kind": "lazyb", "sla_target_us": 100000}))
    results = []
    for tag in ("a", "b"):
        out = tmp_path / f"result_{tag}.csv"
        assert cli_main(["run", "--trace", str(trace),
                         "--policy-config", str(policy), "--out", str(out)]) == 0
        results.append(out.read_bytes())
    assert results[0] == results[1], "run is not byte-deterministic"

    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "axis": "rate_qps", "values": [50, 150], "model": "resnet",
        "policies": [{"kind": "serial"}, {"kind": "graphb", "window_us": 5000}],
        "duration_ms": 100, "runs_per_point": 3,
    }))
    sweeps = []
    for tag in ("a", "b"):
        out = tmp_path / f"sweep_{tag}.csv"
        assert cli_main(["sweep", "--spec", str(spec), "--out", str(out)]) == 0
        sweeps.append(out.read_bytes())
    assert sweeps[0] == sweeps[1], "sweep is not byte-deterministic"


# --- criterion 13 (secondary) ------------------------------------------------

def test_c13_plots_render_all_kinds(tmp_path):
    pytest.importorskip("lazyb_plots", reason="plots component not installed")
    from lazyb_plots.cli import main as plots_main

    # golden inputs produced through the primary CLI
    curve = tmp_path / "curve.csv"
    assert cli_main(["curve", "--model", "resnet",
                     "--batches", ",".join(map(str, range(1, 33))),
                     "--out", str(curve)]) == 0
    trace = tmp_path / "trace.csv"
    assert cli_main(["gen-trace", "--rate", "300", "--duration-ms", "300",
                     "--model", "gnmt", "--seed", "2", "--out", str(trace)]) == 0
    result = tmp_path / "result.csv"
    policy = tmp_path / "policy.json"
    policy.write_text(json.dumps({"kind": "lazyb", "sla_target_us": 100000}))
    assert cli_main(["run", "--trace", str(trace), "--policy-config", str(policy),
                     "--out", str(result)]) == 0
    cdf_csv = tmp_path / "cdf.csv"
    assert cli_main(["report", "--in", str(result), "--kind", "cdf",
                     "--out", str(cdf_csv)]) == 0
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "axis": "rate_qps", "values": [50, 150], "model": "resnet",
        "policies": [{"kind": "serial"}, {"kind": "graphb", "window_us": 5000}],
        "duration_ms": 100, "runs_per_point": 2,
    }))
    sweep_csv = tmp_path / "sweep.csv"
    assert cli_main(["sweep", "--spec", str(spec), "--out", str(sweep_csv)]) == 0
    sla_spec = tmp_path / "sla_spec.json"
    sla_spec.write_text(json.dumps({
        "axis": "sla_target_us", "values": [20000, 100000], "model": "gnmt",
        "policies": [{"kind": "lazyb", "sla_target_us": 100000}],
        "duration_ms": 100, "runs_per_point": 2, "rate_qps": 200,
    }))
    sla_csv = tmp_path / "sla.csv"
    assert cli_main(["sweep", "--spec", str(sla_spec), "--out", str(sla_csv)]) == 0

    jobs = [
        (curve, "curve"),
        (sweep_csv, "latency_sweep"),
        (sweep_csv, "throughput_sweep"),
        (cdf_csv, "cdf"),
        (sla_csv, "sla_sweep"),
    ]
    for src, kind in jobs:
        img = tmp_path / f"{kind}.png"
        assert plots_main(["--in", str(src), "--kind", kind,
                           "--out", str(img)]) == 0, f"render {kind} failed"
        assert img.stat().st_size > 0
        # --dump-table must echo exactly the plotted numbers
        import io
        from contextlib import redirect_stdout
        buf = io.StringIO()
        with redirect_stdout(buf):
            assert plots_main(["--in", str(src), "--kind", kind,
                               "--out", str(tmp_path / f"{kind}2.png"),
                               "--dump-table"]) == 0
        dumped = [l for l in buf.getvalue().splitlines() if l.strip()]
        src_rows = src.read_text().splitlines()
        assert dumped == src_rows, f"{kind}: dump-table diverges from input"

"""Headless rendering of lazyb CSV outputs into figures.

Consumes only the simulator's CSV files; one figure per invocation.
"""

__all__ = ["KINDS"]

KINDS = ("curve", "latency_sweep", "throughput_sweep", "cdf", "sla_sweep")

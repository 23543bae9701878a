"""
Prometheus metrics for pipeline stages.

All collectors live in a private registry, not the global default one.
"""
from prometheus_client import (
    CollectorRegistry, Counter, Gauge, Histogram, generate_latest
)

REGISTRY = CollectorRegistry()

STAGE_SECONDS = Histogram(
    'workbench_stage_duration_seconds', 'Pipeline stage duration', ['stage'],
    registry=REGISTRY,
    buckets=(0.01, 0.1, 0.5, 1.0, 5.0, 15.0, 60.0, 300.0, 900.0),
)
STAGE_FAILURES = Counter(
    'workbench_stage_failures_total', 'Pipeline stage failures', ['stage', 'code'],
    registry=REGISTRY,
)
RESIDUAL_GAUGE = Gauge(
    'workbench_residual', 'Latest measured residual', ['equation'],
    registry=REGISTRY,
)
LOCAL_SOLVES = Counter(
    'workbench_local_solves_total', 'Local MHD solutions integrated',
    registry=REGISTRY,
)


def export_metrics() -> bytes:
    """Render the registry in the Prometheus text format."""
    return generate_latest(REGISTRY)

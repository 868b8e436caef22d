"""
Run metrics exposed in the Prometheus text format.

Metrics live in a private registry and are only written out (as a textfile
next to the run outputs) when ``settings.metrics_textfile`` is on.
"""

from pathlib import Path
from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile
from surfrig.config import settings

registry = CollectorRegistry()

RENDERS = Counter(
    "surfrig_renders_total",
    "Number of completed image renders",
    registry=registry,
)
RENDER_SECONDS = Histogram(
    "surfrig_render_seconds",
    "Wall time of one render call",
    buckets=(0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 30.0),
    registry=registry,
)
FIT_ITERATIONS = Counter(
    "surfrig_fit_iterations_total",
    "Optimizer iterations run",
    registry=registry,
)
FIT_LOSS = Gauge(
    "surfrig_fit_loss",
    "Most recent total fit loss",
    registry=registry,
)


def write_metrics(out_dir: Path) -> Path:
    """Write the registry to ``<out_dir>/metrics.prom`` if enabled; returns the path."""
    path = Path(out_dir) / "metrics.prom"
    if settings.metrics_textfile:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_to_textfile(str(path), registry)
    return path

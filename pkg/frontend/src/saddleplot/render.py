"""Convergence figures from recorded traces.

One figure per job: the chosen trace column against the iteration
counter on a log y-axis, one line per algorithm, and a vertical dotted
marker at each identification iteration taken from the paired analysis
report.  Jobs are plain data; render() is the only way anything gets
drawn, and it touches nothing but the files named in the job.
"""

import os
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .artifacts import (
    PlotDataError,
    marker_iteration,
    read_report,
    read_summary,
    read_trace,
    summary_path_for,
)

# smallest positive normal double; zero distances (the final record is
# always at distance zero from itself) are clamped here before the log
_FLOOR = float(np.finfo(float).tiny)

_AXIS_LABELS = {
    "distP_ref": "distance to final iterate (P-norm)",
    "dist2_ref": "distance to final iterate",
    "kkt": "KKT residual",
    "step_norm_P": "step norm (P-norm)",
    "aux_gap_P": "auxiliary gap (P-norm)",
}


@dataclass(frozen=True)
class PlotJob:
    """What to draw: aligned trace and report paths plus axis options.

    reports pair with traces by position; an empty tuple draws no
    markers.  column picks the y quantity; log_y switches the y scale.
    """

    traces: tuple
    reports: tuple = ()
    out: str = "figure.png"
    column: str = "distP_ref"
    log_y: bool = True

    def __post_init__(self):
        assert self.traces, "a job needs at least one trace"
        assert len(self.reports) in (0, len(self.traces)), (
            "reports must pair with traces one to one (or be omitted)"
        )
        if self.column not in _AXIS_LABELS:
            raise PlotDataError(f"unknown trace column {self.column!r}")


@dataclass(frozen=True)
class RenderResult:
    """What was drawn, for callers that want to check without reopening
    the image: series legend labels in draw order, marker iterations,
    and the pixel size of the written file."""

    path: str
    labels: tuple
    markers: tuple
    size_px: tuple


def render(job):
    """Draw one job to job.out (format chosen by the extension)."""
    fig, ax = plt.subplots(figsize=(7.2, 4.5), dpi=120)
    labels = []
    for i, trace_path in enumerate(job.traces):
        data = read_trace(trace_path)
        summary = read_summary(summary_path_for(trace_path))
        label = summary["algorithm"]
        y = np.maximum(data[job.column], _FLOOR) if job.log_y else data[job.column]
        ax.plot(data["iter"], y, color=f"C{i}", linewidth=1.4, label=label)
        labels.append(label)

    markers = []
    for i, report_path in enumerate(job.reports):
        k_star = marker_iteration(read_report(report_path))
        if k_star is None:
            print(
                f"saddleplot: {report_path} records no identification "
                "iteration; drawing this series without a marker",
                file=sys.stderr,
            )
            continue
        ax.axvline(k_star, color=f"C{i}", linestyle=":", linewidth=1.2)
        markers.append(k_star)

    if job.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel(_AXIS_LABELS[job.column])
    ax.grid(True, which="major", alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()

    # SVG would otherwise embed the creation date and break
    # reproducibility between runs
    metadata = {"Date": None} if job.out.lower().endswith(".svg") else None
    fig.savefig(job.out, metadata=metadata)
    width, height = fig.canvas.get_width_height()
    plt.close(fig)
    assert os.path.getsize(job.out) > 0
    return RenderResult(str(job.out), tuple(labels), tuple(markers), (width, height))

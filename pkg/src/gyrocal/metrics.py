"""Calibration report: per-axis convergence/error statistics and the
plot-data CSV emission consumed by the rendering frontend."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

AXES = ("x", "y", "z")

CONVERGENCE_HEADER = "t,bx,by,bz,refx,refy,refz"
AVAILABILITY_HEADER = "t,qsmf,qs,accel_mode"
SUMMARY_HEADER = "axis,mean_error_dps,rms_error_dps,convergence_time_s,converged"


@dataclass
class AxisMetrics:
    converged: bool
    convergence_time_s: float | None
    mean_error_dps: float
    rms_error_dps: float


@dataclass
class HealthSummary:
    max_cov_asym: float = 0.0
    psd_failures: int = 0
    error_state_nonzero_predicts: int = 0
    gated_updates: int = 0


@dataclass
class CalibrationReport:
    """Everything a calibration run produces."""

    t: NDArray[np.float64]  # update epochs, s
    bias_dps: NDArray[np.float64]  # (epochs, 3) running gyro-bias estimate
    reference_dps: NDArray[np.float64] | None
    metrics: list[AxisMetrics] | None
    qsmf_active: NDArray[np.bool_]
    quasi_static: NDArray[np.bool_]
    accel_mode: NDArray[np.int_]
    bias_sigma_dps: NDArray[np.float64]  # (epochs, 3) filter 1-sigma
    update_counts: dict[str, int]
    health: HealthSummary
    backend: str
    runtime_s: float
    duration_s: float
    mag_available: bool
    notes: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        """Structured key-value rendering of the report."""
        lines = [
            f"backend = {self.backend}",
            f"runtime_s = {self.runtime_s:.3f}",
            f"duration_s = {self.duration_s:.3f}",
            f"epochs = {len(self.t)}",
            f"mag_available = {str(self.mag_available).lower()}",
            f"reference_available = {str(self.reference_dps is not None).lower()}",
        ]
        if self.reference_dps is not None:
            for i, ax in enumerate(AXES):
                lines.append(f"reference_dps.{ax} = {self.reference_dps[i]:.4f}")
        for i, ax in enumerate(AXES):
            lines.append(f"bias_final_dps.{ax} = {self.bias_dps[-1, i]:.4f}")
        if self.metrics is not None:
            for ax, m in zip(AXES, self.metrics):
                conv = f"{m.convergence_time_s:.2f}" if m.convergence_time_s is not None else "nan"
                lines += [
                    f"converged.{ax} = {str(m.converged).lower()}",
                    f"convergence_time_s.{ax} = {conv}",
                    f"mean_error_dps.{ax} = {m.mean_error_dps:.4f}",
                    f"rms_error_dps.{ax} = {m.rms_error_dps:.4f}",
                ]
        for kind, count in sorted(self.update_counts.items()):
            lines.append(f"updates.{kind} = {count}")
        lines += [
            f"qsmf_coverage = {float(np.mean(self.qsmf_active)):.3f}",
            f"quasi_static_coverage = {float(np.mean(self.quasi_static)):.3f}",
            f"health.max_cov_asym = {self.health.max_cov_asym:.3e}",
            f"health.psd_failures = {self.health.psd_failures}",
            f"health.error_state_nonzero_predicts = {self.health.error_state_nonzero_predicts}",
            f"health.gated_updates = {self.health.gated_updates}",
        ]
        for note in self.notes:
            lines.append(f"note = {note}")
        return "\n".join(lines) + "\n"


def compute_metrics(
    t: NDArray[np.float64],
    bias_dps: NDArray[np.float64],
    reference_dps: NDArray[np.float64],
    conv_threshold_dps: float = 0.2,
) -> list[AxisMetrics]:
    """
    Per-axis convergence time and post-convergence error statistics.

    Convergence time is the first epoch after which the absolute error
    stays below the threshold for the rest of the series; mean and RMS
    are computed over those post-convergence epochs. A non-converging
    axis gets statistics over the last quarter of the run and a cleared
    ``converged`` flag.
    """
    out = []
    err = bias_dps - np.asarray(reference_dps)[None, :]
    n = len(t)
    for ax in range(3):
        e = np.abs(err[:, ax])
        above = np.flatnonzero(e >= conv_threshold_dps)
        first_ok = 0 if above.size == 0 else int(above[-1]) + 1
        if first_ok < n:
            sel = slice(first_ok, n)
            out.append(
                AxisMetrics(
                    converged=True,
                    convergence_time_s=float(t[first_ok]),
                    mean_error_dps=float(err[sel, ax].mean()),
                    rms_error_dps=float(np.sqrt((err[sel, ax] ** 2).mean())),
                )
            )
        else:
            sel = slice(max(0, n - max(1, n // 4)), n)
            out.append(
                AxisMetrics(
                    converged=False,
                    convergence_time_s=None,
                    mean_error_dps=float(err[sel, ax].mean()),
                    rms_error_dps=float(np.sqrt((err[sel, ax] ** 2).mean())),
                )
            )
    return out


def emit_plot_data(report: CalibrationReport, out_dir: str | Path) -> dict[str, Path]:
    """
    Write the three plot CSVs (fixed 6-decimal format):

    - ``convergence.csv``: per-epoch bias estimates and reference lines;
    - ``availability.csv``: constraint availability timeline;
    - ``summary.csv``: per-axis statistics.

    Returns the written paths keyed by figure kind.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    ref = report.reference_dps if report.reference_dps is not None else np.full(3, np.nan)
    conv = out_dir / "convergence.csv"
    with conv.open("w") as fh:
        fh.write(CONVERGENCE_HEADER + "\n")
        for k in range(len(report.t)):
            row = [report.t[k], *report.bias_dps[k], *ref]
            fh.write(",".join(f"{v:.6f}" for v in row) + "\n")
    paths["convergence"] = conv

    avail = out_dir / "availability.csv"
    with avail.open("w") as fh:
        fh.write(AVAILABILITY_HEADER + "\n")
        for k in range(len(report.t)):
            fh.write(
                f"{report.t[k]:.6f},{int(report.qsmf_active[k])},"
                f"{int(report.quasi_static[k])},{int(report.accel_mode[k])}\n"
            )
    paths["availability"] = avail

    summary = out_dir / "summary.csv"
    with summary.open("w") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        if report.metrics is not None:
            for ax, m in zip(AXES, report.metrics):
                conv_t = f"{m.convergence_time_s:.6f}" if m.convergence_time_s is not None else "nan"
                fh.write(
                    f"{ax},{m.mean_error_dps:.6f},{m.rms_error_dps:.6f},"
                    f"{conv_t},{int(m.converged)}\n"
                )
    paths["summary"] = summary
    return paths

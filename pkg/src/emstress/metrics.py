"""RMSE / NRMSE over wire pixels and report aggregation.

All metrics are computed in physical units (Pa) over the footprint mask S;
NRMSE normalizes by the ground-truth stress range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    pass


def rmse(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    if pred.shape != truth.shape or pred.shape != mask.shape:
        raise MetricError("shape mismatch between prediction, truth and mask")
    m = np.asarray(mask, dtype=bool)
    n = int(m.sum())
    if n == 0:
        raise MetricError("empty footprint mask")
    diff = pred[m].astype(np.float64) - truth[m].astype(np.float64)
    return float(np.sqrt(np.sum(diff * diff) / n))


def nrmse(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise MetricError("empty footprint mask")
    t = truth[m].astype(np.float64)
    rng = float(t.max() - t.min())
    if rng <= 0:
        raise MetricError("degenerate ground-truth range (sigma_max == sigma_min)")
    return rmse(pred, truth, mask) / rng


def baseline_mean_predictor(truth: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Constant predictor: per-sample mean stress over S, zero elsewhere.

    The floor any learned model must beat."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise MetricError("empty footprint mask")
    out = np.zeros_like(truth, dtype=np.float32)
    out[m] = np.float32(truth[m].astype(np.float64).mean())
    return out


@dataclass
class SampleScore:
    design_id: int
    time_years: float
    rmse: float
    nrmse: float


@dataclass
class EvalReport:
    scores: list[SampleScore]
    mean_nrmse: float
    std_nrmse: float       # population std
    max_nrmse: float
    min_nrmse: float
    baseline_nrmse: float = float("nan")
    skipped: list[str] = field(default_factory=list)

    def summary_text(self) -> str:
        lines = [
            f"Samples evaluated    {len(self.scores)}",
            f"Mean                 {self.mean_nrmse:.4%}",
            f"Standard Deviation   {self.std_nrmse:.4%}",
            f"Max                  {self.max_nrmse:.4%}",
            f"Min                  {self.min_nrmse:.4%}",
        ]
        if np.isfinite(self.baseline_nrmse):
            lines.append(f"Baseline (mean predictor) {self.baseline_nrmse:.4%}")
        for s in self.skipped:
            lines.append(f"Skipped: {s}")
        return "\n".join(lines) + "\n"

    def csv_text(self) -> str:
        rows = ["design_id,time_years,rmse_pa,nrmse"]
        for s in self.scores:
            rows.append(f"{s.design_id},{s.time_years:g},{s.rmse:.8e},{s.nrmse:.8e}")
        return "\n".join(rows) + "\n"


def aggregate(scores: list[SampleScore],
              baseline_nrmse: float = float("nan"),
              skipped: list[str] | None = None) -> EvalReport:
    if not scores:
        raise MetricError("no samples to aggregate")
    vals = np.array([s.nrmse for s in scores], dtype=np.float64)
    return EvalReport(scores=list(scores),
                      mean_nrmse=float(vals.mean()),
                      std_nrmse=float(vals.std()),  # population
                      max_nrmse=float(vals.max()),
                      min_nrmse=float(vals.min()),
                      baseline_nrmse=baseline_nrmse,
                      skipped=list(skipped or []))

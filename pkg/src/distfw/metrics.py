"""Evaluation-time metrics and CSV emission for solver runs."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .constraint import ConstraintSet

CSV_HEADER = "k,gamma,loss,fw_gap,consensus_err,ifo_cum,lo_cum,comm_rounds_cum,eval_ifo_cum"

#: Small negative tolerance: the FW-gap is non-negative up to rounding.
FW_GAP_FLOOR = -1e-9


class InvariantError(RuntimeError):
    """A runtime invariant of the solver or metrics was violated."""


@dataclass(frozen=True)
class IterationRecord:
    """Metrics snapshot of the network state x^k."""

    k: int
    gamma: float
    loss: float
    fw_gap: float
    consensus_err: float
    ifo_cum: int
    lo_cum: int
    comm_rounds_cum: int
    eval_ifo_cum: int

    def __post_init__(self):
        if not np.isfinite(self.loss):
            raise InvariantError(f"non-finite loss at k={self.k}")
        if self.fw_gap < FW_GAP_FLOOR:
            raise InvariantError(f"negative FW-gap {self.fw_gap} at k={self.k}")


@dataclass
class RunLog:
    """Per-iteration records plus run metadata (config echo, seeds, derived keys)."""

    meta: dict[str, str] = field(default_factory=dict)
    records: list[IterationRecord] = field(default_factory=list)
    final_x: np.ndarray | None = None


def fw_gap(x_bar: np.ndarray, grad: np.ndarray, constraint: ConstraintSet) -> float:
    """max_{x in set} <grad, x_bar - x>, via one LMO call on grad."""
    u = constraint.lmo(grad)
    return float(np.dot(grad, x_bar) - np.dot(grad, u))


def consensus_error(xs) -> float:
    """max_i ||x_i - mean_j x_j||_2 over the stacked agent iterates."""
    x = np.asarray(xs, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    xbar = x.mean(axis=0)
    return float(np.max(np.linalg.norm(x - xbar, axis=1)))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def emit_csv(log: RunLog, sink, footers: dict[str, float] | None = None) -> None:
    """Write a run log as CSV: '# key=value' preamble, header, one row per record.

    Floats are printed with 17 significant digits so the file round-trips
    exactly; two runs with identical configs produce byte-identical files.
    """
    own = isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__")
    fh = open(sink, "w") if own else sink
    try:
        for key, value in log.meta.items():
            fh.write(f"# {key}={_fmt(value)}\n")
        fh.write(CSV_HEADER + "\n")
        for r in log.records:
            fh.write(",".join([
                str(r.k), _fmt(r.gamma), _fmt(r.loss), _fmt(r.fw_gap),
                _fmt(r.consensus_err), str(r.ifo_cum), str(r.lo_cum),
                str(r.comm_rounds_cum), str(r.eval_ifo_cum),
            ]) + "\n")
        for key, value in (footers or {}).items():
            fh.write(f"# {key}={_fmt(value)}\n")
    finally:
        if own:
            fh.close()


def render_csv(log: RunLog, footers: dict[str, float] | None = None) -> str:
    buf = io.StringIO()
    emit_csv(log, buf, footers)
    return buf.getvalue()


def min_fw_gap_second_half(log: RunLog, total_iters: int) -> float:
    """min FW-gap over logged records with k in [K/2 + 1, K].

    Falls back to the last record when no logged k lands in the window.
    """
    window = [r.fw_gap for r in log.records
              if total_iters // 2 + 1 <= r.k <= total_iters]
    if not window:
        window = [log.records[-1].fw_gap]
    return min(window)

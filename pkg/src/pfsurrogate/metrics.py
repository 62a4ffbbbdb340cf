"""Error metrics and NN-vs-DCPF comparison reports.

All functions take parallel ``target`` / ``reference`` arrays: the target is
the estimate under test (NN prediction or DCPF value), the reference the
ACPF solution.
"""
from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

FORMAT_VERSION = 1
PRD_GUARD = 1e-6


class EmptyInput(ValueError):
    pass


class AllPairsDegenerate(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


def _pairs(target, reference):
    x = np.asarray(target, dtype=float).ravel()
    y = np.asarray(reference, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch(f"{x.shape} vs {y.shape}")
    return x, y


def mae(target, reference) -> float:
    x, y = _pairs(target, reference)
    if x.size == 0:
        raise EmptyInput("MAE of no pairs")
    return float(np.sum(np.abs(x - y)) / x.size)


def prd_values(target, reference, guard: float = PRD_GUARD):
    """Per-pair percent relative differences, skipping pairs with |x + y| < guard.

    Returns ``(values, excluded_count)``.
    """
    x, y = _pairs(target, reference)
    denom = np.abs(x + y)
    ok = denom >= guard
    return 200.0 * np.abs(x[ok] - y[ok]) / denom[ok], int(np.count_nonzero(~ok))


def prd(target, reference, guard: float = PRD_GUARD) -> tuple[float, int]:
    """Mean percent relative difference and the number of excluded pairs."""
    values, excluded = prd_values(target, reference, guard)
    if values.size == 0:
        if excluded:
            raise AllPairsDegenerate(f"all {excluded} pairs have |x + y| < {guard}")
        raise EmptyInput("PRD of no pairs")
    return float(values.mean()), excluded


def threshold_filter(target, reference, level: float):
    """Keep pairs whose reference magnitude is at least ``level``."""
    if level < 0:
        raise ValueError("threshold level must be non-negative")
    x, y = _pairs(target, reference)
    keep = np.abs(y) >= level
    return x[keep], y[keep]


@dataclass(frozen=True)
class StatSummary:
    mean: float
    max: float
    min: float
    median: float
    std_dev: float


def summarize(values) -> StatSummary:
    """Population standard deviation; median averages the middle pair for even counts."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput("summary of no values")
    return StatSummary(float(v.mean()), float(v.max()), float(v.min()), float(np.median(v)),
                       float(v.std(ddof=0)))


@dataclass
class ThresholdRow:
    level: float
    count: int
    nn: StatSummary | None
    dcpf: StatSummary | None
    nn_excluded: int = 0
    dcpf_excluded: int = 0


@dataclass
class EvalReport:
    system_tag: str
    n_samples: int
    n_branch: int
    nn_abs: StatSummary
    dcpf_abs: StatSummary
    vm_prd: StatSummary
    vm_prd_excluded: int
    thresholds: list[ThresholdRow]
    nn_abs_err: np.ndarray = field(repr=False)  # (samples, branches) MW
    dcpf_abs_err: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "system_tag": self.system_tag,
            "n_samples": self.n_samples,
            "n_branch": self.n_branch,
            "flow_abs_error_mw": {"NN": asdict(self.nn_abs), "DCPF": asdict(self.dcpf_abs)},
            "vm_prd_percent": {"NN": asdict(self.vm_prd), "excluded": self.vm_prd_excluded},
            "threshold_prd_percent": [
                {"level_mw": r.level, "pairs": r.count,
                 "NN": asdict(r.nn) if r.nn else None, "DCPF": asdict(r.dcpf) if r.dcpf else None,
                 "NN_excluded": r.nn_excluded, "DCPF_excluded": r.dcpf_excluded}
                for r in self.thresholds
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        out = io.StringIO()
        hdr = f"{'System':<10}{'Model':<7}{'Mean':>9}{'Max':>9}{'Min':>9}{'Median':>9}{'Std. Dev.':>11}"

        def row(label, model, s):
            if s is None:
                return f"{label:<10}{model:<7}{'(no pairs)':>47}"
            return (f"{label:<10}{model:<7}{s.mean:>9.2f}{s.max:>9.2f}{s.min:>9.2f}"
                    f"{s.median:>9.2f}{s.std_dev:>11.2f}")

        tag = self.system_tag or "system"
        out.write(f"Voltage magnitude, mean PRD of NN (test split, {self.n_samples} samples)\n")
        out.write(f"{'System':<10}{'% Error':>9}\n{tag:<10}{self.vm_prd.mean:>9.2f}\n\n")
        out.write("Absolute difference (MW) of branch active flow, NN vs DCPF\n")
        out.write(hdr + "\n")
        out.write(row(tag, "NN", self.nn_abs) + "\n")
        out.write(row("", "DCPF", self.dcpf_abs) + "\n\n")
        if self.thresholds:
            out.write("PRD (%) of branch active flow for |ACPF flow| >= threshold\n")
            out.write(hdr + "\n")
            for r in self.thresholds:
                out.write(row(f"{r.level:g} MW", "NN", r.nn) + "\n")
                out.write(row("", "DCPF", r.dcpf) + "\n")
        return out.getvalue()

    def to_csv(self, branch_ids=None) -> str:
        """One row per (sample, branch): ``branch_id,nn_abs_err_mw,dcpf_abs_err_mw``."""
        ids = branch_ids if branch_ids is not None else range(1, self.n_branch + 1)
        ids = list(ids)
        lines = ["branch_id,nn_abs_err_mw,dcpf_abs_err_mw"]
        for nn_row, dc_row in zip(self.nn_abs_err, self.dcpf_abs_err):
            lines.extend(f"{b},{a!r},{d!r}" for b, a, d in zip(ids, nn_row.tolist(), dc_row.tolist()))
        return "\n".join(lines) + "\n"


def compare(nn_flows, dc_flows, ac_flows, vm_pred, vm_ref, thresholds=(), system_tag="") -> EvalReport:
    """Flatten every (sample, branch) pair and summarise NN and DCPF errors against ACPF."""
    nn = np.atleast_2d(np.asarray(nn_flows, dtype=float))
    dc = np.atleast_2d(np.asarray(dc_flows, dtype=float))
    ac = np.atleast_2d(np.asarray(ac_flows, dtype=float))
    vp = np.atleast_2d(np.asarray(vm_pred, dtype=float))
    vr = np.atleast_2d(np.asarray(vm_ref, dtype=float))
    if not nn.shape == dc.shape == ac.shape:
        raise DimensionMismatch(f"flow arrays {nn.shape}, {dc.shape}, {ac.shape}")
    if vp.shape != vr.shape or vp.shape[0] != nn.shape[0]:
        raise DimensionMismatch(f"voltage arrays {vp.shape}, {vr.shape}")
    levels = [float(t) for t in thresholds]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("threshold levels must be strictly increasing")

    nn_err = np.abs(nn - ac)
    dc_err = np.abs(dc - ac)
    vm_values, vm_excluded = prd_values(vp, vr)
    rows = []
    for level in levels:
        nx, ny = threshold_filter(nn, ac, level)
        dx, dy = threshold_filter(dc, ac, level)
        nv, ne = prd_values(nx, ny)
        dv, de = prd_values(dx, dy)
        rows.append(ThresholdRow(level, int(ny.size),
                                 summarize(nv) if nv.size else None,
                                 summarize(dv) if dv.size else None, ne, de))
    return EvalReport(system_tag, nn.shape[0], nn.shape[1], summarize(nn_err), summarize(dc_err),
                      summarize(vm_values), vm_excluded, rows, nn_err, dc_err)

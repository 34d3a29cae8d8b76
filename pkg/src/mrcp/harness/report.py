"""Aligned results table: one row per variant, metrics by noisy-camera count."""

from __future__ import annotations

import math
from typing import Sequence

from .train import EpisodeLog

METRICS = (("Abs Rel", "abs_rel"), ("Sq Rel", "sq_rel"), ("RMSE", "rmse"), ("mIoU", "miou"))


def _cell(v: float) -> str:
    return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.4f}"


def results_table(logs: Sequence[EpisodeLog]) -> str:
    """Final-epoch metrics of each log as a fixed-width text table."""
    finals = [(log.variant, log.final()) for log in logs]
    settings = sorted({s for _, f in finals for s in f})
    header = ["variant"] + [f"{name} n={s}" for name, _ in METRICS for s in settings]
    body = []
    for variant, final in finals:
        row = [variant]
        for _, attr in METRICS:
            for s in settings:
                row.append(_cell(getattr(final[s], attr)) if s in final else "-")
        body.append(row)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]

    def fmt(r):
        return "  ".join(c.ljust(wd) if i == 0 else c.rjust(wd) for i, (c, wd) in enumerate(zip(r, widths)))

    lines = [fmt(header), "  ".join("-" * wd for wd in widths)] + [fmt(r) for r in body]
    return "\n".join(lines) + "\n"

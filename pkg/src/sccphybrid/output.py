"""CSV writers.  Floats use 17 significant digits so files round-trip exactly."""
from __future__ import annotations

import csv
import io
from pathlib import Path


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write(path, header, rows):
    """Write to ``path``, or return the text when ``path`` is None."""
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path is None:
        return text
    Path(path).write_text(text, encoding="utf-8")
    return text


def write_trajectory(tr, path=None) -> str:
    rows = ([fmt(t)] + [fmt(v) for v in vals] + [mode]
            for t, vals, mode in zip(tr.times, tr.values, tr.modes))
    return _write(path, ["t", *tr.variables, "mode"], rows)


def write_events(tr, path=None) -> str:
    rows = ([fmt(e.t), e.kind, e.transition, e.detail] for e in tr.events)
    return _write(path, ["t", "kind", "transition", "detail"], rows)


def write_ensemble(res, path=None) -> str:
    header = ["t", *(f"mean_{v}" for v in res.variables), *(f"var_{v}" for v in res.variables)]
    rows = ([fmt(t)] + [fmt(v) for v in m] + [fmt(v) for v in s]
            for t, m, s in zip(res.times, res.mean, res.var))
    return _write(path, header, rows)

"""Per-iteration telemetry and its CSV persistence."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Optional

CSV_FIELDS = ("iter", "loss", "grad_norm", "step_param", "rho", "accepted", "fevals", "gevals", "wall_ms")


@dataclass
class IterationRecord:
    iter: int
    loss: float
    grad_norm: float
    step_param: float
    rho: Optional[float]
    accepted: bool
    fevals: int
    gevals: int
    wall_ms: float


assert tuple(f.name for f in fields(IterationRecord)) == CSV_FIELDS


class Clock:
    """Milliseconds since construction."""

    def __init__(self):
        self._t0 = time.perf_counter()

    def ms(self) -> float:
        return 1e3 * (time.perf_counter() - self._t0)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def write_csv(path: str | Path, records: Iterable[IterationRecord], wall_clock: bool = True) -> None:
    """Write records with the fixed header.

    With ``wall_clock=False`` the wall_ms column is written as 0.0 so that
    repeated runs produce byte-identical files.
    """
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_FIELDS)
        for rec in records:
            row = list(astuple(rec))
            if not wall_clock:
                row[-1] = 0.0
            out.writerow([_fmt(v) for v in row])


def read_csv(path: str | Path) -> list[IterationRecord]:
    recs = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            recs.append(IterationRecord(
                iter=int(row["iter"]),
                loss=float(row["loss"]),
                grad_norm=float(row["grad_norm"]),
                step_param=float(row["step_param"]),
                rho=float(row["rho"]) if row["rho"] else None,
                accepted=row["accepted"] == "1",
                fevals=int(row["fevals"]),
                gevals=int(row["gevals"]),
                wall_ms=float(row["wall_ms"]),
            ))
    return recs

"""Run traces shared by every solver: one row per outer iteration, CSV spill,
and a JSON summary carrying the final metrics plus the configuration echo."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Any

TRACE_COLUMNS = [
    "k",
    "lambda",
    "F_sum",
    "rel_subopt",
    "CV",
    "comm_per_node_max",
    "prox_count",
    "grad_count",
    "dual_norm",
    "inner_iters",
    "stop_reason",
]


@dataclass
class TraceRow:
    k: int
    lam: float
    F_sum: float
    rel_subopt: float
    CV: float
    comm_per_node_max: int
    prox_count: int
    grad_count: int
    dual_norm: float
    inner_iters: int
    stop_reason: str

    def as_list(self) -> list:
        return [
            self.k,
            repr(self.lam),
            repr(self.F_sum),
            repr(self.rel_subopt),
            repr(self.CV),
            self.comm_per_node_max,
            self.prox_count,
            self.grad_count,
            repr(self.dual_norm),
            self.inner_iters,
            self.stop_reason,
        ]


@dataclass
class RunTrace:
    """Per-outer-iteration metrics for one solver run."""

    algorithm: str
    config: dict[str, Any] = field(default_factory=dict)
    rows: list[TraceRow] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    @property
    def final(self) -> TraceRow:
        if not self.rows:
            raise ValueError("empty trace")
        return self.rows[-1]

    def write_csv(self, path: str) -> None:
        # repr() floats keep the CSV byte-reproducible across runs
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in self.rows:
                writer.writerow(row.as_list())

    def summary(self) -> dict[str, Any]:
        last = self.final
        return {
            "algorithm": self.algorithm,
            "config": self.config,
            "converged": self.converged,
            "outer_iterations": last.k,
            "F_sum": last.F_sum,
            "rel_subopt": last.rel_subopt,
            "CV": last.CV,
            "comm_per_node_max": last.comm_per_node_max,
            "dual_norm": last.dual_norm,
            "wall_time": self.wall_time,
        }

    def write_summary(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, default=str)

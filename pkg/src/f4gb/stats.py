"""Per-phase timers and per-round matrix logs."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

PHASES = ("select", "symbolic", "linalg", "update", "autoreduce", "other")


@dataclass
class Stats:
    phases: dict = field(default_factory=lambda: dict.fromkeys(PHASES, 0.0))
    matrices: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    total: float = 0.0

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - t0

    @contextmanager
    def timed(self):
        """Wrap a whole computation; its duration becomes ``total``."""
        t0 = time.perf_counter()
        try:
            yield self
        finally:
            self.total += time.perf_counter() - t0

    def count(self, name: str, k: int = 1):
        self.counters[name] = self.counters.get(name, 0) + k

    def log_matrix(self, **info):
        self.matrices.append(info)

    @property
    def covered(self) -> float:
        return sum(self.phases.values())

    def phases_tsv(self) -> str:
        lines = ["phase\tseconds"]
        lines += [f"{k}\t{v:.6f}" for k, v in self.phases.items()]
        lines.append(f"total\t{self.total:.6f}")
        return "\n".join(lines) + "\n"

    def matrices_tsv(self) -> str:
        cols = ("round", "kind", "upper", "lower", "columns", "left", "nnz", "density", "zero_rows")
        lines = ["\t".join(cols)]
        for m in self.matrices:
            lines.append("\t".join(str(m.get(c, "")) for c in cols))
        return "\n".join(lines) + "\n"


class NullStats(Stats):
    """Accepts the same calls and records nothing worth reading."""

    @contextmanager
    def phase(self, name):
        yield

    def log_matrix(self, **info):
        pass

"""Residual bookkeeping shared by the checkers and the CLI."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class ResidualEntry:
    name: str
    linf: float
    l2: float
    tol: float | None = None
    enforced: bool = True
    note: str = ""

    @property
    def passed(self) -> bool:
        if self.tol is None or not self.enforced:
            return True
        return bool(np.isfinite(self.linf)) and self.linf <= self.tol

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


@dataclass
class ResidualReport:
    title: str
    entries: list[ResidualEntry] = field(default_factory=list)

    def add(self, entry: ResidualEntry) -> ResidualEntry:
        self.entries.append(entry)
        return entry

    def __getitem__(self, name: str) -> ResidualEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_dict(self) -> dict:
        return {"title": self.title, "passed": self.passed,
                "entries": [e.to_dict() for e in self.entries]}


def observed_orders(errors, spacings) -> list[float | None]:
    """log(e_k / e_{k+1}) / log(h_k / h_{k+1}) for consecutive ladder rungs.

    ``None`` marks pairs where either error is at the rounding floor, so no
    order can be measured.
    """
    out = []
    for (e0, e1), (h0, h1) in zip(zip(errors, errors[1:]), zip(spacings, spacings[1:])):
        if e0 <= 1e-14 or e1 <= 1e-14:
            out.append(None)
        else:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
    return out

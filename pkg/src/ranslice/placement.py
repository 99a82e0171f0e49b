"""Decoded placement and solver result containers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum


@dataclass
class SlicePlacement:
    path_of_demand: dict[str, str] = field(default_factory=dict)  # demand id -> path id
    server_of_nf: dict[str, str] = field(default_factory=dict)  # "RU"/"DU"/"CU" -> server id


@dataclass
class Placement:
    slices: dict[str, SlicePlacement] = field(default_factory=dict)

    def server(self, slice_id: str, nf: str) -> str | None:
        sp = self.slices.get(slice_id)
        return None if sp is None else sp.server_of_nf.get(nf)

    def to_doc(self) -> dict:
        return {
            "slices": {
                sid: {"paths": dict(sp.path_of_demand), "servers": dict(sp.server_of_nf)}
                for sid, sp in sorted(self.slices.items())
            }
        }

    @classmethod
    def from_doc(cls, doc) -> "Placement":
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            return cls({
                sid: SlicePlacement(dict(d.get("paths", {})), dict(d.get("servers", {})))
                for sid, d in doc["slices"].items()
            })
        except (KeyError, AttributeError, TypeError) as e:
            raise ValueError(f"malformed placement document: {e}") from None


class Status(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"  # heuristic success, optimality not claimed
    INFEASIBLE = "Infeasible"
    TIME_LIMIT = "TimeLimit"
    INCOMPLETE = "Incomplete"


@dataclass
class SolveResult:
    status: Status
    placement: Placement | None
    objective: float
    bound: float
    runtime: float
    nodes_explored: int = 0
    solver: str = ""
    unplaced: tuple[str, ...] = ()

    @property
    def has_placement(self) -> bool:
        return self.placement is not None

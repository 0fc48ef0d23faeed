"""Platform rosters, failure models, and quorum arithmetic.

Shared by the ledger (commit-certificate validation), the consensus state
machines, and the simulator, so none of them import each other for it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Tuple


class FailureModel(str, Enum):
    CRASH = "crash"
    BYZANTINE = "byzantine"


@dataclass(frozen=True)
class PlatformSpec:
    pid: str
    nodes: Tuple[str, ...]
    failure_model: FailureModel
    f: int

    def __post_init__(self):
        need = 2 * self.f + 1 if self.failure_model == FailureModel.CRASH else 3 * self.f + 1
        if len(self.nodes) != need:
            raise ValueError(
                f"platform {self.pid}: {self.failure_model.value} with f={self.f} "
                f"needs {need} nodes, got {len(self.nodes)}"
            )

    @property
    def local_majority(self) -> int:
        return self.f + 1 if self.failure_model == FailureModel.CRASH else 2 * self.f + 1


class Topology:
    """Immutable map of platforms to node rosters."""

    def __init__(self, platforms: Iterable[PlatformSpec]):
        self.platforms: Dict[str, PlatformSpec] = {}
        self.node_platform: Dict[str, str] = {}
        for spec in platforms:
            if spec.pid in self.platforms:
                raise ValueError(f"duplicate platform id {spec.pid}")
            self.platforms[spec.pid] = spec
            for node in spec.nodes:
                if node in self.node_platform:
                    raise ValueError(f"node {node} listed twice")
                self.node_platform[node] = spec.pid

    @property
    def platform_ids(self) -> List[str]:
        return sorted(self.platforms)

    def spec(self, pid: str) -> PlatformSpec:
        return self.platforms[pid]

    def nodes_of(self, pid: str) -> Tuple[str, ...]:
        return self.platforms[pid].nodes

    def all_nodes(self) -> List[str]:
        return [n for pid in self.platform_ids for n in self.platforms[pid].nodes]

    def local_majority(self, pid: str) -> int:
        return self.platforms[pid].local_majority

    def global_platform_quorum(self) -> int:
        """Platform-level two-thirds quorum for verification commits."""
        return (2 * len(self.platforms)) // 3 + 1

    def primary_of(self, pid: str, view_index: int = 0) -> str:
        nodes = self.platforms[pid].nodes
        return nodes[view_index % len(nodes)]


def make_topology(
    count: int,
    failure_model: FailureModel = FailureModel.CRASH,
    f: int = 1,
    overrides: Dict[str, Tuple[FailureModel, int]] | None = None,
) -> Topology:
    """Uniform topology p1..pN with per-platform overrides."""
    specs = []
    for i in range(1, count + 1):
        pid = f"p{i}"
        model, ff = (overrides or {}).get(pid, (failure_model, f))
        n = 2 * ff + 1 if model == FailureModel.CRASH else 3 * ff + 1
        nodes = tuple(f"{pid}:n{j}" for j in range(n))
        specs.append(PlatformSpec(pid, nodes, model, ff))
    return Topology(specs)

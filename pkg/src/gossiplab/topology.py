"""Directed communication topologies for the gossip engine.

A topology fixes, per node, the ordered list of out-neighbors it may
initiate an exchange with. Any node may still be contacted by others;
only initiation is constrained. Cliques are kept implicit so a
2500-node complete graph does not materialize 2500 lists of 2499 ids.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

__all__ = [
    "TopologyKind",
    "Topology",
    "build_clique",
    "build_grid",
    "build_random_outdegree",
    "export_adjacency",
]


class TopologyKind(enum.Enum):
    CLIQUE = "clique"
    GRID = "grid"
    RANDOM_OUTDEGREE = "outdegree"


@dataclass(frozen=True)
class Topology:
    """Immutable directed graph over nodes 0 .. node_count - 1.

    For non-clique kinds, lists holds one ordered neighbor tuple per node,
    with no self loops and no duplicates. For cliques lists is None and
    neighbors are synthesized on demand.
    """

    node_count: int
    kind: TopologyKind
    lists: tuple[tuple[int, ...], ...] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise ValueError(f"node_count must be positive, got {self.node_count}")
        if self.kind is TopologyKind.CLIQUE:
            if self.lists is not None:
                raise ValueError("clique topologies keep neighbors implicit")
            return
        if self.lists is None or len(self.lists) != self.node_count:
            raise ValueError("need one neighbor list per node")
        for node, row in enumerate(self.lists):
            if len(set(row)) != len(row):
                raise ValueError(f"duplicate out-neighbor at node {node}")
            for other in row:
                if other == node:
                    raise ValueError(f"self loop at node {node}")
                if not 0 <= other < self.node_count:
                    raise ValueError(
                        f"out-neighbor {other} of node {node} is not a node id"
                    )

    @property
    def complete(self) -> bool:
        return self.kind is TopologyKind.CLIQUE

    def out_degree(self, node: int) -> int:
        self._check_node(node)
        if self.complete:
            return self.node_count - 1
        return len(self.lists[node])

    def neighbors(self, node: int) -> tuple[int, ...]:
        """Ordered out-neighbors of node. Synthesized for cliques."""
        self._check_node(node)
        if self.complete:
            return tuple(i for i in range(self.node_count) if i != node)
        return self.lists[node]

    def _check_node(self, node: int) -> None:
        if not 0 <= node < self.node_count:
            raise ValueError(f"node {node} outside 0..{self.node_count - 1}")

    def to_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Flatten neighbor lists to (offsets, flat) for the kernels.

        Cliques return empty arrays; the kernels special-case them and
        draw partners directly.
        """
        if self.complete:
            return np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int32)
        offsets = np.zeros(self.node_count + 1, dtype=np.int64)
        for node, row in enumerate(self.lists):
            offsets[node + 1] = offsets[node] + len(row)
        flat = np.empty(offsets[-1], dtype=np.int32)
        for node, row in enumerate(self.lists):
            flat[offsets[node] : offsets[node + 1]] = row
        return offsets, flat


def build_clique(node_count: int) -> Topology:
    """Complete directed graph: everyone may initiate toward everyone."""
    if node_count < 2:
        raise ValueError("a clique needs at least 2 nodes")
    return Topology(node_count=node_count, kind=TopologyKind.CLIQUE)


def build_grid(side: int) -> Topology:
    """Two dimensional side x side lattice, no wraparound.

    Node r*side + c links to its existing vertical and horizontal
    neighbors in the fixed order up, down, left, right. Corner nodes get
    2 neighbors, edge nodes 3, interior nodes 4.
    """
    if side < 2:
        raise ValueError("grid side must be at least 2")
    lists = []
    for r in range(side):
        for c in range(side):
            row: list[int] = []
            if r > 0:
                row.append((r - 1) * side + c)
            if r < side - 1:
                row.append((r + 1) * side + c)
            if c > 0:
                row.append(r * side + c - 1)
            if c < side - 1:
                row.append(r * side + c + 1)
            lists.append(tuple(row))
    return Topology(
        node_count=side * side, kind=TopologyKind.GRID, lists=tuple(lists)
    )


def build_random_outdegree(
    node_count: int, degree: int, rng: random.Random
) -> Topology:
    """Every node picks `degree` distinct out-neighbors uniformly at random.

    Links are directed and independent per node, so the graph is not
    necessarily symmetric and no connectivity check is applied.
    """
    if node_count < 2:
        raise ValueError("need at least 2 nodes")
    if not 1 <= degree < node_count:
        raise ValueError(
            f"degree must be in [1, node_count-1={node_count - 1}], got {degree}"
        )
    lists = []
    for node in range(node_count):
        others = rng.sample(range(node_count - 1), degree)
        # shift the sample past the node's own id to avoid self loops
        row = tuple(x + 1 if x >= node else x for x in others)
        lists.append(row)
    return Topology(
        node_count=node_count,
        kind=TopologyKind.RANDOM_OUTDEGREE,
        lists=tuple(lists),
    )


def export_adjacency(topology: Topology) -> Iterator[str]:
    """Yield one line per node in the form 'node_id: n1 n2 n3 ...'."""
    for node in range(topology.node_count):
        row = " ".join(str(x) for x in topology.neighbors(node))
        yield f"{node}: {row}"

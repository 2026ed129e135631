"""Analytical engine: the pairwise model run over a whole network.

Instead of caches, every node carries one bit per tracked item: holds or
does not hold. A round follows the same schedule as the simulators (fresh
uniform initiation order, uniform out-neighbor, sequential atomic
exchanges), but each exchange moves the pair's joint 2-bit state by one
draw from a protocol transition matrix rather than by shuffling real
buffers. Agreement between this engine and the cache-level one is what
validates the matrices.
"""

from __future__ import annotations

import numpy as np

from .pairwise import TransitionMatrix
from .topology import Topology

__all__ = ["ModelNetwork", "init_model", "run_model_round"]


class ModelNetwork:
    """Presence and seen bits for one tracked item over a topology."""

    def __init__(self, topology: Topology) -> None:
        self.topology = topology
        self.bits = np.zeros(topology.node_count, dtype=np.uint8)
        self.seen = np.zeros(topology.node_count, dtype=np.uint8)
        self.round_no = 0
        self.skipped_initiations = 0
        # initiation machinery, precomputed once per network
        if topology.complete:
            self._offsets = None
            self._flat = None
            self._degrees = None
        else:
            offsets, flat = topology.to_csr()
            self._offsets = offsets
            self._flat = flat
            self._degrees = np.diff(offsets)

    @property
    def node_count(self) -> int:
        return self.topology.node_count

    def replication(self) -> int:
        """Nodes currently holding the item."""
        return int(self.bits.sum())

    def coverage(self) -> int:
        """Nodes that ever held the item."""
        return int(self.seen.sum())


def init_model(
    topology: Topology,
    seed_node: int | None = None,
    rng: np.random.Generator | None = None,
) -> ModelNetwork:
    """Network with the item at one node: the given one, or a uniformly
    drawn one when seed_node is None (which then requires rng)."""
    network = ModelNetwork(topology)
    if seed_node is None:
        if rng is None:
            raise ValueError("drawing a uniform seed node requires rng")
        seed_node = int(rng.integers(topology.node_count))
    if not 0 <= seed_node < topology.node_count:
        raise ValueError(
            f"seed node {seed_node} outside 0..{topology.node_count - 1}"
        )
    network.bits[seed_node] = 1
    network.seen[seed_node] = 1
    return network


def run_model_round(
    network: ModelNetwork,
    matrix: TransitionMatrix,
    rng: np.random.Generator,
) -> ModelNetwork:
    """Advance the network by one full round of pair transitions.

    All per-exchange randomness is drawn up front in blocks (order,
    partners, transition uniforms), then the exchanges are applied
    sequentially so that later pairs see earlier outcomes, exactly like
    the cache-level engine."""
    n = network.node_count
    order = rng.permutation(n)
    if network.topology.complete:
        partners = rng.integers(0, n - 1, size=n)
        partners = np.where(partners >= order, partners + 1, partners)
        degrees = None
    else:
        degrees = network._degrees[order]
        idx = (rng.random(n) * degrees).astype(np.int64)
        # degree-0 nodes get a junk partner (slot 0) and are skipped below
        flat_idx = network._offsets[order] + np.minimum(idx, np.maximum(degrees - 1, 0))
        flat_idx[degrees == 0] = 0
        partners = network._flat[flat_idx]
    u = rng.random(n)
    # plain python containers keep the sequential loop cheap
    rows = tuple(tuple(map(float, matrix._cumulative[i])) for i in range(4))
    order_l = order.tolist()
    partners_l = partners.tolist()
    u_l = u.tolist()
    bits_l = network.bits.tolist()
    seen_l = network.seen.tolist()
    degrees_l = degrees.tolist() if degrees is not None else None
    skipped = 0
    for i in range(n):
        a = order_l[i]
        if degrees_l is not None and degrees_l[i] == 0:
            skipped += 1
            continue
        b = partners_l[i]
        pre = (bits_l[a] << 1) | bits_l[b]
        if pre == 0:
            continue
        row = rows[pre]
        x = u_l[i]
        if x < row[0]:
            post = 0
        elif x < row[1]:
            post = 1
        elif x < row[2]:
            post = 2
        else:
            post = 3
        ba = post >> 1
        bb = post & 1
        bits_l[a] = ba
        bits_l[b] = bb
        if ba:
            seen_l[a] = 1
        if bb:
            seen_l[b] = 1
    network.bits[:] = bits_l
    network.seen[:] = seen_l
    network.skipped_initiations += skipped
    network.round_no += 1
    return network

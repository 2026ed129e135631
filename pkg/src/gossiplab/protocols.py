"""Cache-level gossip protocol engine.

Value types (Cache, ExchangeBuffer) express single exchanges over plain
frozensets for inspection and testing; NetworkState holds a whole network
as flat arrays and hands the round loops to the compiled kernels.

Round semantics, shared by every protocol: per round each node initiates
exactly one exchange, in a fresh uniform random order, with a partner
drawn uniformly from its out-neighbors (for cyclon: from its own link
sample). Exchanges are atomic and sequential. A node with no
out-neighbors skips its initiation and is counted.

Message loss uses a three-way scenario per exchange: the request is lost
with probability p_loss, else the reply is lost with probability p_loss,
else both arrive. A lost request cancels the exchange entirely; a lost
reply means only the side that already received content updates.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import kernels
from .pairwise import GossipParams
from .topology import Topology

__all__ = [
    "MessageScenario",
    "Protocol",
    "Cache",
    "ExchangeBuffer",
    "ExchangeRecord",
    "NetworkState",
    "draw_scenario",
    "init_network",
    "init_cyclon_network",
    "run_startup",
    "run_round",
    "shuffle_exchange",
    "newscast_exchange",
    "cyclon_exchange",
    "insert_item",
]

_SEED_BITS = 31


class MessageScenario(enum.Enum):
    """Fate of the two messages of one exchange."""

    DELIVERED = 0
    REQUEST_LOST = 1
    REPLY_LOST = 2

    def probability(self, p_loss: float) -> float:
        if self is MessageScenario.REQUEST_LOST:
            return p_loss
        if self is MessageScenario.REPLY_LOST:
            return (1.0 - p_loss) * p_loss
        return (1.0 - p_loss) ** 2


def draw_scenario(p_loss: float, rng: random.Random) -> MessageScenario:
    """Draw the scenario of one exchange over a channel losing each
    message independently with probability p_loss."""
    if not 0.0 <= p_loss <= 1.0:
        raise ValueError(f"p_loss must be in [0, 1], got {p_loss}")
    if p_loss == 0.0:
        return MessageScenario.DELIVERED
    u = rng.random()
    if u < p_loss:
        return MessageScenario.REQUEST_LOST
    if u < p_loss + (1.0 - p_loss) * p_loss:
        return MessageScenario.REPLY_LOST
    return MessageScenario.DELIVERED


class Protocol(enum.Enum):
    SHUFFLE = "shuffle"
    NEWSCAST_PUSHPULL = "newscast-pushpull"
    NEWSCAST_PUSH = "newscast-push"
    NEWSCAST_PULL = "newscast-pull"
    CYCLON = "cyclon"

    @property
    def kernel_code(self) -> int:
        return _PROTO_CODES[self]


_PROTO_CODES = {
    Protocol.SHUFFLE: kernels.PROTO_SHUFFLE,
    Protocol.NEWSCAST_PUSHPULL: kernels.PROTO_NEWSCAST_PUSHPULL,
    Protocol.NEWSCAST_PUSH: kernels.PROTO_NEWSCAST_PUSH,
    Protocol.NEWSCAST_PULL: kernels.PROTO_NEWSCAST_PULL,
}

_NEWSCAST_DIRECTIONS = {
    "pushpull": Protocol.NEWSCAST_PUSHPULL,
    "push": Protocol.NEWSCAST_PUSH,
    "pull": Protocol.NEWSCAST_PULL,
}


@dataclass(frozen=True)
class Cache:
    """Immutable cache snapshot: a set of item ids and a capacity."""

    capacity: int
    items: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError(f"capacity must be positive, got {self.capacity}")
        items = frozenset(int(x) for x in self.items)
        if len(items) > self.capacity:
            raise ValueError(
                f"{len(items)} items exceed capacity {self.capacity}"
            )
        if any(x < 0 for x in items):
            raise ValueError("item ids must be non-negative")
        object.__setattr__(self, "items", items)

    @property
    def full(self) -> bool:
        return len(self.items) == self.capacity


@dataclass(frozen=True)
class ExchangeBuffer:
    """Items one side sends in one exchange, at most `limit` of them."""

    limit: int
    items: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.limit < 1:
            raise ValueError(f"limit must be positive, got {self.limit}")
        items = frozenset(int(x) for x in self.items)
        if len(items) > self.limit:
            raise ValueError(f"{len(items)} items exceed buffer limit {self.limit}")
        object.__setattr__(self, "items", items)


@dataclass(frozen=True)
class ExchangeRecord:
    """Log entry for one exchange: who talked and what each side held
    before anything changed."""

    initiator: int
    contacted: int
    scenario: MessageScenario
    pre_initiator: np.ndarray
    pre_contacted: np.ndarray


class NetworkState:
    """Whole-network state backed by flat arrays.

    caches[i, :sizes[i]] holds node i's item ids, masks[i, x] flags
    presence, seen[i, x] flags whether i ever held x after an update.
    For cyclon networks items are node ids (links) and a node never
    holds a link to itself.
    """

    def __init__(
        self,
        topology: Topology | None,
        params: GossipParams,
        node_count: int,
        item_width: int,
        cyclon: bool = False,
    ) -> None:
        self.topology = topology
        self.params = params
        self.node_count = node_count
        self.item_width = item_width
        self.cyclon = cyclon
        self.round_no = 0
        self.skipped_initiations = 0
        self.caches = np.zeros((node_count, params.c), dtype=np.int32)
        self.sizes = np.zeros(node_count, dtype=np.int64)
        self.masks = np.zeros((node_count, item_width), dtype=np.uint8)
        self.seen = np.zeros((node_count, item_width), dtype=np.uint8)

    def cache(self, node: int) -> Cache:
        self._check_node(node)
        items = frozenset(int(x) for x in self.caches[node, : self.sizes[node]])
        return Cache(capacity=self.params.c, items=items)

    def replication(self, item: int) -> int:
        """Number of caches currently holding item."""
        self._check_item(item)
        return int(self.masks[:, item].sum())

    def coverage(self, item: int) -> int:
        """Number of nodes that ever held item."""
        self._check_item(item)
        return int(self.seen[:, item].sum())

    def total_copies(self) -> int:
        return int(self.sizes.sum())

    def distinct_items(self) -> frozenset[int]:
        present = np.flatnonzero(self.masks.any(axis=0))
        return frozenset(int(x) for x in present)

    def _check_node(self, node: int) -> None:
        if not 0 <= node < self.node_count:
            raise ValueError(f"node {node} outside 0..{self.node_count - 1}")

    def _check_item(self, item: int) -> None:
        if not 0 <= item < self.item_width:
            raise ValueError(f"item {item} outside 0..{self.item_width - 1}")

    def _place(self, node: int, item: int) -> None:
        size = self.sizes[node]
        if size >= self.params.c:
            raise ValueError(f"cache of node {node} is full")
        self.caches[node, size] = item
        self.sizes[node] = size + 1
        self.masks[node, item] = 1
        self.seen[node, item] = 1


def init_network(
    topology: Topology,
    params: GossipParams,
    rng: random.Random,
    extra_item_slots: int = 1,
) -> NetworkState:
    """Fresh network for shuffle or newscast gossiping.

    Each of the n items is seeded in the cache of one uniformly chosen
    node with free space; everything else starts empty. extra_item_slots
    reserves id space above n for items inserted later.
    """
    if extra_item_slots < 0:
        raise ValueError("extra_item_slots must be >= 0")
    if params.n > topology.node_count * params.c:
        raise ValueError(
            f"{params.n} items cannot fit into "
            f"{topology.node_count} caches of capacity {params.c}"
        )
    state = NetworkState(
        topology=topology,
        params=params,
        node_count=topology.node_count,
        item_width=params.n + extra_item_slots,
    )
    for item in range(params.n):
        node = rng.randrange(topology.node_count)
        while state.sizes[node] >= params.c:
            node = rng.randrange(topology.node_count)
        state._place(node, item)
    return state


def init_cyclon_network(
    node_count: int, params: GossipParams, rng: random.Random
) -> NetworkState:
    """Fresh cyclon network: every cache starts with c links to distinct
    uniformly chosen other nodes. The overlay the caches define is the
    topology; none is attached."""
    if node_count < 2:
        raise ValueError("need at least 2 nodes")
    if params.c >= node_count:
        raise ValueError(
            f"cache capacity {params.c} needs at least {params.c + 1} nodes"
        )
    state = NetworkState(
        topology=None,
        params=params,
        node_count=node_count,
        item_width=node_count,
        cyclon=True,
    )
    for node in range(node_count):
        picks = rng.sample(range(node_count - 1), params.c)
        for x in picks:
            state._place(node, x + 1 if x >= node else x)
    return state


def _kernel_seed(rng: random.Random) -> int:
    return rng.getrandbits(_SEED_BITS)


_NO_OCC = np.zeros((0, 4), dtype=np.int64)
_NO_SERIES = np.zeros(0, dtype=np.int64)
_NO_REC_NODES = np.zeros((0, 3), dtype=np.int32)
_NO_REC_PRE = np.zeros((0, 2, 1), dtype=np.uint8)


def _csr(state: NetworkState) -> tuple[bool, np.ndarray, np.ndarray]:
    offsets, flat = state.topology.to_csr()
    return state.topology.complete, offsets, flat


def run_round(
    state: NetworkState,
    protocol: Protocol,
    p_loss: float,
    rng: random.Random,
    log: list[ExchangeRecord] | None = None,
) -> NetworkState:
    """Run one full round; optionally append one ExchangeRecord per
    exchange to log (pre-exchange mask snapshots included)."""
    if not 0.0 <= p_loss <= 1.0:
        raise ValueError(f"p_loss must be in [0, 1], got {p_loss}")
    if protocol is Protocol.CYCLON:
        if not state.cyclon:
            raise ValueError("cyclon requires a cyclon-initialized network")
        if log is not None:
            raise ValueError("exchange logging is not supported for cyclon")
        skipped, self_links, _, _ = kernels.cyclon_rounds(
            state.caches, state.sizes, state.masks, state.seen,
            state.params.c, state.params.s,
            p_loss, 1, _kernel_seed(rng), -1,
        )
        if self_links:
            raise AssertionError("cyclon produced a self link")
        state.skipped_initiations += int(skipped)
        state.round_no += 1
        return state
    if state.cyclon:
        raise ValueError(f"{protocol.value} cannot run on a cyclon network")
    want_log = log is not None
    if want_log:
        rec_nodes = np.zeros((state.node_count, 3), dtype=np.int32)
        rec_pre = np.zeros((state.node_count, 2, state.item_width), dtype=np.uint8)
    else:
        rec_nodes, rec_pre = _NO_REC_NODES, _NO_REC_PRE
    clique, offsets, flat = _csr(state)
    _, skipped, ex = kernels.gossip_rounds(
        state.caches, state.sizes, state.masks, state.seen,
        state.params.c, state.params.s, protocol.kernel_code,
        clique, offsets, flat,
        p_loss, 1, _kernel_seed(rng),
        0, 0, _NO_OCC,
        -1, False, _NO_SERIES, _NO_SERIES,
        rec_nodes, rec_pre,
    )
    state.skipped_initiations += int(skipped)
    state.round_no += 1
    if want_log:
        for i in range(ex):
            log.append(
                ExchangeRecord(
                    initiator=int(rec_nodes[i, 0]),
                    contacted=int(rec_nodes[i, 1]),
                    scenario=MessageScenario(int(rec_nodes[i, 2])),
                    pre_initiator=rec_pre[i, 0].copy(),
                    pre_contacted=rec_pre[i, 1].copy(),
                )
            )
    return state


def run_startup(
    state: NetworkState,
    rounds: int,
    protocol: Protocol,
    rng: random.Random,
) -> NetworkState:
    """Run the loss-free startup phase that replicates the seeded items
    toward equilibrium. Zero rounds is allowed and does nothing."""
    if rounds < 0:
        raise ValueError(f"rounds must be >= 0, got {rounds}")
    if rounds == 0:
        return state
    if protocol is Protocol.CYCLON:
        if not state.cyclon:
            raise ValueError("cyclon requires a cyclon-initialized network")
        skipped, self_links, _, _ = kernels.cyclon_rounds(
            state.caches, state.sizes, state.masks, state.seen,
            state.params.c, state.params.s,
            0.0, rounds, _kernel_seed(rng), -1,
        )
        if self_links:
            raise AssertionError("cyclon produced a self link")
        state.skipped_initiations += int(skipped)
        state.round_no += rounds
        return state
    if state.cyclon:
        raise ValueError(f"{protocol.value} cannot run on a cyclon network")
    clique, offsets, flat = _csr(state)
    _, skipped, _ = kernels.gossip_rounds(
        state.caches, state.sizes, state.masks, state.seen,
        state.params.c, state.params.s, protocol.kernel_code,
        clique, offsets, flat,
        0.0, rounds, _kernel_seed(rng),
        0, 0, _NO_OCC,
        -1, False, _NO_SERIES, _NO_SERIES,
        _NO_REC_NODES, _NO_REC_PRE,
    )
    state.skipped_initiations += int(skipped)
    state.round_no += rounds
    return state


def insert_item(
    state: NetworkState, item: int, node: int, rng: random.Random
) -> NetworkState:
    """Place a new item in node's cache, evicting a uniform random entry
    if the cache is full. The node must not already hold the item."""
    state._check_node(node)
    state._check_item(item)
    if state.masks[node, item]:
        raise ValueError(f"node {node} already holds item {item}")
    size = state.sizes[node]
    if size < state.params.c:
        state.caches[node, size] = item
        state.sizes[node] = size + 1
    else:
        slot = rng.randrange(state.params.c)
        old = state.caches[node, slot]
        state.masks[node, old] = 0
        state.caches[node, slot] = item
    state.masks[node, item] = 1
    state.seen[node, item] = 1
    return state


def _pair_state(
    cache_a: Cache, cache_b: Cache, s: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, int]:
    if cache_a.capacity != cache_b.capacity:
        raise ValueError("both caches must share one capacity")
    cap = cache_a.capacity
    if not 1 <= s <= cap:
        raise ValueError(f"s must be in [1, capacity={cap}], got {s}")
    width = max(cache_a.items | cache_b.items, default=0) + 1
    caches = np.zeros((2, cap), dtype=np.int32)
    sizes = np.zeros(2, dtype=np.int64)
    masks = np.zeros((2, width), dtype=np.uint8)
    seen = np.zeros((2, width), dtype=np.uint8)
    for row, cache in enumerate((cache_a, cache_b)):
        for k, item in enumerate(sorted(cache.items)):
            caches[row, k] = item
            masks[row, item] = 1
            seen[row, item] = 1
        sizes[row] = len(cache.items)
    return caches, sizes, masks, seen, cap


def _rows_to_caches(caches, sizes, cap) -> tuple[Cache, Cache]:
    out = []
    for row in range(2):
        items = frozenset(int(x) for x in caches[row, : sizes[row]])
        out.append(Cache(capacity=cap, items=items))
    return out[0], out[1]


def shuffle_exchange(
    cache_a: Cache,
    cache_b: Cache,
    s: int,
    scenario: MessageScenario,
    rng: random.Random,
    return_buffers: bool = False,
):
    """One shuffle exchange between two caches; returns the updated pair.

    With return_buffers=True also returns the two drawn exchange buffers,
    which is what the conservation and loss invariants are stated over.
    """
    caches, sizes, masks, seen, cap = _pair_state(cache_a, cache_b, s)
    out_sa = np.zeros(s, dtype=np.int32)
    out_sb = np.zeros(s, dtype=np.int32)
    k_a, k_b = kernels.pair_exchange(
        caches, sizes, masks, seen, cap, s, kernels.PROTO_SHUFFLE,
        0, 1, scenario.value, _kernel_seed(rng), out_sa, out_sb,
    )
    new_a, new_b = _rows_to_caches(caches, sizes, cap)
    if not return_buffers:
        return new_a, new_b
    buf_a = ExchangeBuffer(limit=s, items=frozenset(int(x) for x in out_sa[:k_a]))
    buf_b = ExchangeBuffer(limit=s, items=frozenset(int(x) for x in out_sb[:k_b]))
    return new_a, new_b, buf_a, buf_b


def newscast_exchange(
    cache_a: Cache,
    cache_b: Cache,
    s: int,
    direction: str,
    scenario: MessageScenario,
    rng: random.Random,
):
    """One newscast exchange; direction is 'pushpull', 'push' or 'pull'.

    Push sends initiator content to the contacted node, pull the reverse,
    pushpull both. Only content receivers run the keep-c update."""
    if direction not in _NEWSCAST_DIRECTIONS:
        raise ValueError(
            f"direction must be one of {sorted(_NEWSCAST_DIRECTIONS)}, got {direction!r}"
        )
    proto = _NEWSCAST_DIRECTIONS[direction].kernel_code
    caches, sizes, masks, seen, cap = _pair_state(cache_a, cache_b, s)
    out_sa = np.zeros(s, dtype=np.int32)
    out_sb = np.zeros(s, dtype=np.int32)
    kernels.pair_exchange(
        caches, sizes, masks, seen, cap, s, proto,
        0, 1, scenario.value, _kernel_seed(rng), out_sa, out_sb,
    )
    return _rows_to_caches(caches, sizes, cap)


def cyclon_exchange(
    state: NetworkState,
    initiator: int,
    rng: random.Random,
    scenario: MessageScenario = MessageScenario.DELIVERED,
) -> int | None:
    """One cyclon exchange initiated by the given node, in place on the
    network. Returns the chosen partner, or None when the initiator's
    cache is empty and the exchange is skipped."""
    if not state.cyclon:
        raise ValueError("cyclon_exchange needs a cyclon-initialized network")
    state._check_node(initiator)
    partner = kernels.cyclon_pair(
        state.caches, state.sizes, state.masks, state.seen,
        state.params.c, state.params.s,
        initiator, scenario.value, _kernel_seed(rng),
    )
    return None if partner < 0 else int(partner)

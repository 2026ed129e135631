"""Pairwise interaction model for gossip exchanges.

A single tracked item and a single exchange between two nodes reduce to a
four-state chain: the joint state of the pair is (initiator holds item,
contacted holds item), written 00, 01, 10, 11 with the initiator bit first.
One exchange maps a pre state to a post state according to a 4x4 row
stochastic transition matrix that depends on the protocol and on two
probabilities:

* p_select: chance that a node holding the item puts it into the exchange
  buffer it sends, s/c for a buffer of s entries out of a cache of c.
* p_drop: chance that a copy present in a cache is evicted during the
  update step of an exchange it takes part in.

Everything here is closed form; the simulators in :mod:`gossiplab.protocols`
provide the ground truth these formulas are checked against.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PairState",
    "ProtocolVariant",
    "GossipParams",
    "TransitionMatrix",
    "p_select",
    "p_drop_newscast_given_k",
    "p_drop_newscast",
    "p_drop_shuffle_uniform",
    "p_drop_general",
    "build_matrix",
    "sample_transition",
]


class PairState(enum.IntEnum):
    """Joint holding state of (initiator, contacted) for one tracked item."""

    S00 = 0
    S01 = 1
    S10 = 2
    S11 = 3

    @property
    def initiator_holds(self) -> bool:
        return bool(self.value & 2)

    @property
    def contacted_holds(self) -> bool:
        return bool(self.value & 1)

    @classmethod
    def from_bits(cls, initiator: bool, contacted: bool) -> "PairState":
        return cls((2 if initiator else 0) | (1 if contacted else 0))


class ProtocolVariant(enum.Enum):
    """Protocols the model has a transition matrix for."""

    SHUFFLE = "shuffle"
    SHUFFLE_LOSSY = "shuffle-lossy"
    NEWSCAST_PUSHPULL = "newscast-pushpull"
    NEWSCAST_PUSH = "newscast-push"
    NEWSCAST_PULL = "newscast-pull"


@dataclass(frozen=True)
class GossipParams:
    """Cache geometry shared by all protocols.

    n is the number of distinct items seeded at startup, c the cache
    capacity of every node, s the exchange buffer size.
    """

    n: int
    c: int
    s: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if self.c < 1:
            raise ValueError(f"c must be at least 1, got {self.c}")
        if not 1 <= self.s <= self.c:
            raise ValueError(f"s must be in [1, c={self.c}], got {self.s}")


def p_select(params: GossipParams) -> float:
    """Probability that a held item enters the exchange buffer.

    The buffer is a uniform s-subset of the cache, so any particular
    cached item is included with probability s/c.
    """
    return params.s / params.c


def p_drop_newscast_given_k(params: GossipParams, k: int) -> float:
    """Newscast drop probability given k shared items between the caches.

    The updating node keeps c uniform entries out of the c + s - k
    distinct items in the merged view (k of the s received entries are
    duplicates of its own), so a particular old entry survives with
    probability c / (c + s - k).
    """
    if not 0 <= k <= params.s:
        raise ValueError(f"k must be in [0, s={params.s}], got {k}")
    return 1.0 - params.c / (params.c + params.s - k)


def p_drop_newscast(params: GossipParams) -> float:
    """Newscast drop probability with the overlap k at its expected value.

    With caches holding c uniform entries out of the n items in
    circulation, each received entry is already cached with probability
    c/n, so a buffer of s entries overlaps in k = s*c/n items on average.
    Plugging that mean overlap into the conditional form collapses to
    1 / (1 + c*n / (s*(n - c))).
    """
    if params.n <= params.c:
        raise ValueError(
            f"uniform contents need n > c, got n={params.n}, c={params.c}"
        )
    n, c, s = params.n, params.c, params.s
    return 1.0 / (1.0 + c * n / (s * (n - c)))


def p_drop_shuffle_uniform(params: GossipParams) -> float:
    """Shuffle drop probability under uniform random cache contents.

    The general displacement form at P_inx = c/n (the chance the partner
    holds any particular cached item) simplifies to (n - c) / (n - s).
    """
    if params.n <= params.c:
        raise ValueError(
            f"uniform contents need n > c, got n={params.n}, c={params.c}"
        )
    n, c, s = params.n, params.c, params.s
    return (n - c) / (n - s)


def p_drop_general(p_inx: float, p_sel: float) -> float:
    """Shuffle drop probability from an arbitrary co-occurrence level.

    p_inx is the probability that the contacted node also holds an item
    the initiator sends. Writing A1 for the sent entries the partner does
    not hold and A2 for the partner's sent entries that are new to the
    initiator, a sent copy is dropped exactly when it falls in A1 and is
    displaced by an arrival from A2, which collapses to
    (1 - p_inx) / (1 - p_sel * p_inx).
    """
    if not 0.0 <= p_inx <= 1.0:
        raise ValueError(f"p_inx must be in [0, 1], got {p_inx}")
    if not 0.0 <= p_sel <= 1.0:
        raise ValueError(f"p_sel must be in [0, 1], got {p_sel}")
    denom = 1.0 - p_sel * p_inx
    if denom == 0.0:
        raise ValueError("p_sel * p_inx = 1 leaves no feasible exchange")
    return (1.0 - p_inx) / denom


@dataclass(frozen=True)
class TransitionMatrix:
    """Row stochastic 4x4 matrix over PairState, rows are pre states.

    probs[pre, post] is the chance that one exchange moves the pair from
    pre to post. Rows follow the PairState integer order 00, 01, 10, 11.
    Structural zeros are stored explicitly; every entry comes from its own
    closed form, never as one minus the rest of a row, so that row sums
    remain an independent check.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)
        cum = np.cumsum(arr, axis=1)
        cum.setflags(write=False)
        object.__setattr__(self, "_cumulative", cum)

    def entry(self, pre: PairState, post: PairState) -> float:
        return float(self.probs[int(pre), int(post)])

    def row(self, pre: PairState) -> np.ndarray:
        return self.probs[int(pre)]

    def row_sums(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def validate(self, tol: float = 1e-12) -> None:
        """Raise ValueError if any entry leaves [0, 1] or a row sum drifts."""
        if np.any(self.probs < -tol) or np.any(self.probs > 1.0 + tol):
            raise ValueError("matrix entry outside [0, 1]")
        sums = self.row_sums()
        if np.any(np.abs(sums - 1.0) > tol):
            raise ValueError(f"row sums deviate from 1: {sums}")


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if math.isnan(value) or not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")
    return value


def _shuffle_rows(q: float, d: float) -> np.ndarray:
    """Lossless shuffle. The pair never loses its last copy: a sent entry
    can be displaced only by the arriving buffer, and whatever displaced it
    is itself held by the other side."""
    m = np.zeros((4, 4))
    m[0, 0] = 1.0
    m[1, 1] = 1.0 - q
    m[1, 2] = q * d
    m[1, 3] = q * (1.0 - d)
    m[2, 2] = 1.0 - q
    m[2, 1] = q * d
    m[2, 3] = q * (1.0 - d)
    m[3, 1] = q * (1.0 - q) * d
    m[3, 2] = q * (1.0 - q) * d
    m[3, 3] = 1.0 - 2.0 * q * (1.0 - q) * d
    return m


def _shuffle_lossy_rows(q: float, d: float, l: float) -> np.ndarray:
    """Shuffle over a channel that loses each message with probability l.

    A lost request cancels the exchange; a lost reply leaves the contacted
    node updated and the initiator untouched. The initiator keeps its copy
    whenever it does not select it, with or without a reply, so the 11 row
    is asymmetric: the 10 outcome needs only the request through while the
    01 outcome needs both messages through. The lone path to extinction is
    the 01 state sending its only copy and losing the reply.
    """
    m = np.zeros((4, 4))
    nl = 1.0 - l
    m[0, 0] = 1.0

    m[1, 0] = nl * l * q * d
    m[1, 1] = nl * ((1.0 - q) + l * q * (1.0 - d)) + l
    m[1, 2] = nl * nl * q * d
    m[1, 3] = nl * nl * q * (1.0 - d)

    m[2, 1] = nl * nl * q * d
    m[2, 2] = (1.0 - q) + l * q
    m[2, 3] = nl * nl * q * (1.0 - d) + nl * l * q

    m[3, 1] = nl * nl * q * d * (1.0 - q)
    m[3, 2] = nl * (1.0 - q) * q * d
    m[3, 3] = 1.0 - (2.0 - l * (3.0 - l)) * q * (1.0 - q) * d
    return m


def _newscast_pushpull_rows(q: float, d: float) -> np.ndarray:
    """Newscast with both sides updating. Every participating cache runs
    the same keep-c-of-the-union step, so each copy independently survives
    with probability 1 - d on both sides once it was exchanged."""
    m = np.zeros((4, 4))
    m[0, 0] = 1.0

    m[1, 0] = (q * d + (1.0 - q)) * d
    m[1, 1] = ((1.0 - q) + q * d) * (1.0 - d)
    m[1, 2] = q * d * (1.0 - d)
    m[1, 3] = q * (1.0 - d) ** 2

    m[2, 0] = (q * d + (1.0 - q)) * d
    m[2, 2] = ((1.0 - q) + q * d) * (1.0 - d)
    m[2, 1] = q * d * (1.0 - d)
    m[2, 3] = q * (1.0 - d) ** 2

    m[3, 0] = d * d
    m[3, 1] = (1.0 - d) * d
    m[3, 2] = (1.0 - d) * d
    m[3, 3] = (1.0 - d) ** 2
    return m


def _newscast_push_rows(q: float, d: float) -> np.ndarray:
    """One-way newscast, initiator to contacted. Only the contacted cache
    updates, so the initiator bit is frozen and rows stay in their half."""
    m = np.zeros((4, 4))
    m[0, 0] = 1.0

    m[1, 0] = d
    m[1, 1] = 1.0 - d

    m[2, 2] = (1.0 - q) + q * d
    m[2, 3] = q * (1.0 - d)

    m[3, 2] = d
    m[3, 3] = 1.0 - d
    return m


def _newscast_pull_rows(q: float, d: float) -> np.ndarray:
    """One-way newscast, contacted to initiator. Mirror of push: only the
    initiator updates and the contacted bit is frozen."""
    m = np.zeros((4, 4))
    m[0, 0] = 1.0

    m[1, 1] = (1.0 - q) + q * d
    m[1, 3] = q * (1.0 - d)

    m[2, 0] = d
    m[2, 2] = 1.0 - d

    m[3, 1] = d
    m[3, 3] = 1.0 - d
    return m


def build_matrix(
    variant: ProtocolVariant,
    p_sel: float,
    p_drop: float,
    p_loss: float = 0.0,
) -> TransitionMatrix:
    """Build the transition matrix for one protocol variant.

    p_loss is only meaningful for SHUFFLE_LOSSY; passing a nonzero value
    for any other variant is rejected since those matrices assume a
    lossless channel. SHUFFLE_LOSSY with p_loss = 0 degenerates to the
    plain shuffle matrix.
    """
    q = _check_prob("p_sel", p_sel)
    d = _check_prob("p_drop", p_drop)
    l = _check_prob("p_loss", p_loss)
    if variant is not ProtocolVariant.SHUFFLE_LOSSY and l != 0.0:
        raise ValueError(f"{variant.value} has no lossy matrix, p_loss must be 0")

    if variant is ProtocolVariant.SHUFFLE:
        rows = _shuffle_rows(q, d)
    elif variant is ProtocolVariant.SHUFFLE_LOSSY:
        rows = _shuffle_lossy_rows(q, d, l)
    elif variant is ProtocolVariant.NEWSCAST_PUSHPULL:
        rows = _newscast_pushpull_rows(q, d)
    elif variant is ProtocolVariant.NEWSCAST_PUSH:
        rows = _newscast_push_rows(q, d)
    elif variant is ProtocolVariant.NEWSCAST_PULL:
        rows = _newscast_pull_rows(q, d)
    else:
        raise ValueError(f"unknown protocol variant: {variant!r}")
    return TransitionMatrix(rows)


def sample_transition(matrix: TransitionMatrix, pre: PairState, rng) -> PairState:
    """Draw the post state for one exchange from the row of pre.

    rng is anything with a random() method returning floats in [0, 1),
    e.g. random.Random or numpy's Generator.
    """
    cum = matrix._cumulative[int(pre)]
    u = rng.random()
    # cum[3] can fall a hair under 1.0; the final state absorbs the slack
    for post in range(3):
        if u < cum[post]:
            return PairState(post)
    return PairState(3)

"""Compiled inner loops for the cache-level simulators.

State lives in flat numpy arrays so the per-exchange work stays allocation
free: caches[i] holds the item ids of node i in its first sizes[i] slots,
masks[i, x] flags presence of item x at node i, seen[i, x] flags whether
node i ever held x after an update. The mask and seen arrays are the
source of truth for measurements; the cache rows are the mechanical
representation the exchanges operate on (slot order carries no meaning).

All randomness comes from numba's own np.random state, seeded once per
kernel entry, which keeps runs reproducible per (seed, parameters).
"""

from __future__ import annotations

import numpy as np
from numba import njit

PROTO_SHUFFLE = 0
PROTO_NEWSCAST_PUSHPULL = 1
PROTO_NEWSCAST_PUSH = 2
PROTO_NEWSCAST_PULL = 3

SCEN_DELIVERED = 0
SCEN_REQUEST_LOST = 1
SCEN_REPLY_LOST = 2


@njit(cache=True)
def _draw_scenario(p_loss):
    if p_loss <= 0.0:
        return SCEN_DELIVERED
    u = np.random.random()
    if u < p_loss:
        return SCEN_REQUEST_LOST
    if u < p_loss + (1.0 - p_loss) * p_loss:
        return SCEN_REPLY_LOST
    return SCEN_DELIVERED


@njit(cache=True)
def _sample_prefix(row, size, k):
    """Partial Fisher-Yates: row[:k] becomes a uniform k-subset of row[:size]."""
    for i in range(k):
        j = i + int(np.random.random() * (size - i))
        t = row[i]
        row[i] = row[j]
        row[j] = t


@njit(cache=True)
def _shuffle_update(cache, size, mask, seen, cap, sent_k, recv, recv_k, flag, slots):
    """One side of a shuffle: add unseen received items, evicting only from
    the entries this side sent that the partner did not send back.

    Empty slots are filled before anything is evicted. Capacity always
    suffices: at most recv_k <= s items arrive and the sent prefix offers
    s slots whenever the cache is within s of full.
    """
    for i in range(recv_k):
        flag[recv[i]] = 1
    nd = 0
    for i in range(sent_k):
        if flag[cache[i]] == 0:
            slots[nd] = i
            nd += 1
    new_size = size
    for i in range(recv_k):
        x = recv[i]
        if mask[x] == 0:
            if new_size < cap:
                cache[new_size] = x
                new_size += 1
            else:
                j = int(np.random.random() * nd)
                slot = slots[j]
                nd -= 1
                slots[j] = slots[nd]
                mask[cache[slot]] = 0
                cache[slot] = x
            mask[x] = 1
            seen[x] = 1
    for i in range(recv_k):
        flag[recv[i]] = 0
    return new_size


@njit(cache=True)
def _newscast_update(cache, size, mask, seen, cap, recv, recv_k, union_buf):
    """Newscast update: keep cap uniform entries of the deduplicated union
    of the own cache and the received buffer. While the union fits, keep
    everything (startup fill mode falls out of this for free)."""
    k = size
    for i in range(size):
        union_buf[i] = cache[i]
    for i in range(recv_k):
        x = recv[i]
        if mask[x] == 0:
            union_buf[k] = x
            k += 1
            mask[x] = 1
    if k > cap:
        # drop a uniform (k - cap)-subset, chosen into the prefix
        over = k - cap
        for i in range(over):
            j = i + int(np.random.random() * (k - i))
            t = union_buf[i]
            union_buf[i] = union_buf[j]
            union_buf[j] = t
        for i in range(over):
            mask[union_buf[i]] = 0
        for i in range(over, k):
            cache[i - over] = union_buf[i]
        k = cap
    else:
        for i in range(k):
            cache[i] = union_buf[i]
    # a received item counts as seen only if it survived the keep step
    for i in range(recv_k):
        x = recv[i]
        if mask[x] == 1:
            seen[x] = 1
    return k


@njit(cache=True)
def _cyclon_update(cache, size, mask, seen, cap, own_id, sent_k, recv, recv_k, flag, slots):
    """Cyclon update: discard received links to self and links already in
    the cache, fill empty slots, then overwrite slots holding the entries
    this side put in its outgoing sample. A cached entry that also arrived
    in the received batch is refreshed in place and never overwritten."""
    for i in range(recv_k):
        flag[recv[i]] = 1
    nd = 0
    for i in range(sent_k):
        if flag[cache[i]] == 0:
            slots[nd] = i
            nd += 1
    new_size = size
    for i in range(recv_k):
        x = recv[i]
        if x == own_id or mask[x] == 1:
            continue
        if new_size < cap:
            cache[new_size] = x
            new_size += 1
        else:
            j = int(np.random.random() * nd)
            slot = slots[j]
            nd -= 1
            slots[j] = slots[nd]
            mask[cache[slot]] = 0
            cache[slot] = x
        mask[x] = 1
        seen[x] = 1
    for i in range(recv_k):
        flag[recv[i]] = 0
    return new_size


@njit(cache=True)
def _shuffle_exchange(caches, sizes, masks, seen, cap, s, a, b, scen, sa_buf, sb_buf, flag, slots):
    """Full shuffle exchange between initiator a and contacted b.

    Both buffers are drawn from the pre-exchange caches. A lost request
    changes nothing; a lost reply leaves the contacted side updated and
    the initiator untouched."""
    k_a = min(s, sizes[a])
    _sample_prefix(caches[a], sizes[a], k_a)
    for i in range(k_a):
        sa_buf[i] = caches[a, i]
    if scen == SCEN_REQUEST_LOST:
        return k_a, 0
    k_b = min(s, sizes[b])
    _sample_prefix(caches[b], sizes[b], k_b)
    for i in range(k_b):
        sb_buf[i] = caches[b, i]
    sizes[b] = _shuffle_update(
        caches[b], sizes[b], masks[b], seen[b], cap, k_b, sa_buf, k_a, flag, slots
    )
    if scen == SCEN_DELIVERED:
        sizes[a] = _shuffle_update(
            caches[a], sizes[a], masks[a], seen[a], cap, k_a, sb_buf, k_b, flag, slots
        )
    return k_a, k_b


@njit(cache=True)
def _newscast_exchange(caches, sizes, masks, seen, cap, s, direction, a, b, scen, sa_buf, sb_buf, union_buf):
    """Newscast exchange. direction: 0 push-pull, 1 push, 2 pull.

    Push sends initiator content one way, pull requests contacted content
    one way, push-pull does both. Only receivers of content update. With a
    lost reply the push half still lands (the request carried it), the
    pull half does not."""
    k_a = 0
    k_b = 0
    if direction != 2:
        k_a = min(s, sizes[a])
        _sample_prefix(caches[a], sizes[a], k_a)
        for i in range(k_a):
            sa_buf[i] = caches[a, i]
    if scen == SCEN_REQUEST_LOST:
        return k_a, 0
    if direction != 1 and scen == SCEN_DELIVERED:
        k_b = min(s, sizes[b])
        _sample_prefix(caches[b], sizes[b], k_b)
        for i in range(k_b):
            sb_buf[i] = caches[b, i]
    if direction != 2:
        sizes[b] = _newscast_update(
            caches[b], sizes[b], masks[b], seen[b], cap, sa_buf, k_a, union_buf
        )
    if direction != 1 and scen == SCEN_DELIVERED:
        sizes[a] = _newscast_update(
            caches[a], sizes[a], masks[a], seen[a], cap, sb_buf, k_b, union_buf
        )
    return k_a, k_b


@njit(cache=True)
def _cyclon_exchange(caches, sizes, masks, seen, cap, s, a, scen, sa_buf, sb_buf, flag, slots):
    """Cyclon exchange initiated by a: draw a sample of links, pick the
    partner from the sample, send the sample with the partner link swapped
    for a link to a itself, receive the partner's sample back.

    Returns the partner id, or -1 if a's cache is empty and the round
    skips it."""
    size_a = sizes[a]
    if size_a == 0:
        return -1
    k_a = min(s, size_a)
    _sample_prefix(caches[a], size_a, k_a)
    pidx = int(np.random.random() * k_a)
    partner = caches[a, pidx]
    for i in range(k_a):
        sa_buf[i] = caches[a, i]
    sa_buf[pidx] = a
    if scen == SCEN_REQUEST_LOST:
        return partner
    size_b = sizes[partner]
    k_b = min(s, size_b)
    _sample_prefix(caches[partner], size_b, k_b)
    for i in range(k_b):
        sb_buf[i] = caches[partner, i]
    sizes[partner] = _cyclon_update(
        caches[partner], size_b, masks[partner], seen[partner],
        cap, partner, k_b, sa_buf, k_a, flag, slots,
    )
    if scen == SCEN_DELIVERED:
        sizes[a] = _cyclon_update(
            caches[a], sizes[a], masks[a], seen[a],
            cap, a, k_a, sb_buf, k_b, flag, slots,
        )
    return partner


@njit(cache=True)
def gossip_rounds(
    caches, sizes, masks, seen, cap, s, proto,
    clique, offsets, flat,
    p_loss, rounds, seed,
    track_lo, track_hi, occ,
    track_item, early_stop, repl_out, cov_out,
    rec_nodes, rec_pre,
):
    """Run full rounds of shuffle or newscast gossiping.

    Per round every node initiates exactly once, in a fresh uniform random
    order, toward a uniform out-neighbor; exchanges are atomic and
    sequential. Nodes with no out-neighbors are counted as skipped.

    Optional outputs, each enabled by passing a correctly sized array and
    disabled by a zero-length one:
      occ[r]      pre-exchange pair-state counts (n11, n10, n01, exchanges)
                  summed over items track_lo..track_hi-1
      repl_out[r] copies of track_item after round r (with early_stop,
                  the loop ends once this hits zero)
      cov_out[r]  nodes that ever held track_item after round r
      rec_nodes/rec_pre   per-exchange log: (initiator, contacted,
                  scenario) and both pre-exchange mask rows; only sensible
                  with rounds == 1

    Returns (rounds completed, skipped initiations, exchanges logged).
    """
    np.random.seed(seed)
    n_nodes = caches.shape[0]
    width = masks.shape[1]
    order = np.arange(n_nodes, dtype=np.int64)
    sa_buf = np.empty(s, dtype=np.int32)
    sb_buf = np.empty(s, dtype=np.int32)
    flag = np.zeros(width, dtype=np.uint8)
    slots = np.empty(s, dtype=np.int64)
    union_buf = np.empty(cap + s, dtype=np.int32)
    do_occ = occ.shape[0] >= rounds and rounds > 0
    do_track = track_item >= 0
    do_rec = rec_nodes.shape[0] > 0
    skipped = 0
    done = 0
    ex = 0
    for r in range(rounds):
        for i in range(n_nodes - 1, 0, -1):
            j = int(np.random.random() * (i + 1))
            t = order[i]
            order[i] = order[j]
            order[j] = t
        for oi in range(n_nodes):
            a = order[oi]
            if clique:
                b = int(np.random.random() * (n_nodes - 1))
                if b >= a:
                    b += 1
            else:
                deg = offsets[a + 1] - offsets[a]
                if deg == 0:
                    skipped += 1
                    continue
                b = int(flat[offsets[a] + int(np.random.random() * deg)])
            scen = _draw_scenario(p_loss)
            if do_occ:
                c11 = 0
                c10 = 0
                c01 = 0
                for t_ in range(track_lo, track_hi):
                    av = masks[a, t_]
                    bv = masks[b, t_]
                    c11 += av & bv
                    c10 += av & (1 - bv)
                    c01 += (1 - av) & bv
                occ[r, 0] += c11
                occ[r, 1] += c10
                occ[r, 2] += c01
                occ[r, 3] += 1
            if do_rec:
                rec_nodes[ex, 0] = a
                rec_nodes[ex, 1] = b
                rec_nodes[ex, 2] = scen
                for t_ in range(width):
                    rec_pre[ex, 0, t_] = masks[a, t_]
                    rec_pre[ex, 1, t_] = masks[b, t_]
            if proto == PROTO_SHUFFLE:
                _shuffle_exchange(
                    caches, sizes, masks, seen, cap, s, a, b, scen,
                    sa_buf, sb_buf, flag, slots,
                )
            else:
                _newscast_exchange(
                    caches, sizes, masks, seen, cap, s, proto - 1, a, b, scen,
                    sa_buf, sb_buf, union_buf,
                )
            ex += 1
        done = r + 1
        if do_track:
            nr = 0
            nc = 0
            for i in range(n_nodes):
                nr += masks[i, track_item]
                nc += seen[i, track_item]
            repl_out[r] = nr
            cov_out[r] = nc
            if early_stop and nr == 0:
                break
    return done, skipped, ex


@njit(cache=True)
def cyclon_rounds(
    caches, sizes, masks, seen, cap, s,
    p_loss, rounds, seed, watch_node,
):
    """Run full rounds of cyclon over the overlay the caches themselves
    define: each initiator draws its sample, picks the exchange partner
    from the sample, and swaps link batches with it.

    When watch_node >= 0, every initiation by that node is checked after
    the exchange: did the partner end up holding a link back to it.
    Self links are scanned for after every round.

    Returns (skipped initiations, self-link count, watched initiations,
    watched initiations whose partner lacked the back link).
    """
    np.random.seed(seed)
    n_nodes = caches.shape[0]
    width = masks.shape[1]
    order = np.arange(n_nodes, dtype=np.int64)
    sa_buf = np.empty(s, dtype=np.int32)
    sb_buf = np.empty(s, dtype=np.int32)
    flag = np.zeros(width, dtype=np.uint8)
    slots = np.empty(s, dtype=np.int64)
    skipped = 0
    self_links = 0
    watch_inits = 0
    watch_missing = 0
    for r in range(rounds):
        for i in range(n_nodes - 1, 0, -1):
            j = int(np.random.random() * (i + 1))
            t = order[i]
            order[i] = order[j]
            order[j] = t
        for oi in range(n_nodes):
            a = order[oi]
            scen = _draw_scenario(p_loss)
            partner = _cyclon_exchange(
                caches, sizes, masks, seen, cap, s, a, scen,
                sa_buf, sb_buf, flag, slots,
            )
            if partner < 0:
                skipped += 1
            elif a == watch_node and scen != SCEN_REQUEST_LOST:
                watch_inits += 1
                if masks[partner, a] == 0:
                    watch_missing += 1
        for i in range(n_nodes):
            for j in range(sizes[i]):
                if caches[i, j] == i:
                    self_links += 1
    return skipped, self_links, watch_inits, watch_missing


@njit(cache=True)
def pair_exchange(
    caches, sizes, masks, seen, cap, s, proto, a, b, scen, seed,
    out_sa, out_sb,
):
    """Single exchange entry point for the value-level operations.

    Writes the drawn buffers into out_sa/out_sb and returns their sizes,
    which lets callers inspect exactly what was sent."""
    np.random.seed(seed)
    width = masks.shape[1]
    sa_buf = np.empty(s, dtype=np.int32)
    sb_buf = np.empty(s, dtype=np.int32)
    flag = np.zeros(width, dtype=np.uint8)
    slots = np.empty(s, dtype=np.int64)
    union_buf = np.empty(cap + s, dtype=np.int32)
    if proto == PROTO_SHUFFLE:
        k_a, k_b = _shuffle_exchange(
            caches, sizes, masks, seen, cap, s, a, b, scen,
            sa_buf, sb_buf, flag, slots,
        )
    else:
        k_a, k_b = _newscast_exchange(
            caches, sizes, masks, seen, cap, s, proto - 1, a, b, scen,
            sa_buf, sb_buf, union_buf,
        )
    for i in range(k_a):
        out_sa[i] = sa_buf[i]
    for i in range(k_b):
        out_sb[i] = sb_buf[i]
    return k_a, k_b


@njit(cache=True)
def cyclon_pair(caches, sizes, masks, seen, cap, s, a, scen, seed):
    """Single cyclon exchange; returns the chosen partner or -1."""
    np.random.seed(seed)
    width = masks.shape[1]
    sa_buf = np.empty(s, dtype=np.int32)
    sb_buf = np.empty(s, dtype=np.int32)
    flag = np.zeros(width, dtype=np.uint8)
    slots = np.empty(s, dtype=np.int64)
    return _cyclon_exchange(
        caches, sizes, masks, seen, cap, s, a, scen,
        sa_buf, sb_buf, flag, slots,
    )

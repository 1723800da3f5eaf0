"""Ranked enumeration over the preprocessed join structures.

Both enumerators work on partial answers: persistent chains of
(prev, member, in-group-position, depth) nodes sharing their prefixes, so a
successor is one O(1) node. Popping a partial answer pushes its replace-last
successor, then extends forward through the remaining relations taking each
group's first member and pushing the position-2 sibling, and emits the merged
answer. The lexicographic route drives this with a stack (deepest sibling on
top); the weighted route with a binary heap keyed by
(priority, per-position value key, sequence number).

The value key makes equal-weight emission deterministic: equal-priority
successors always swap adjacent equal-opt group members, which sort by their
value tuples, so emission order among ties is exactly the full-assignment
order in rel-order — the same key the oracle sorts by.
"""
from __future__ import annotations

from heapq import heappop, heappush
from itertools import count
from typing import Iterator, Optional

from .preprocess import M_GROUPS, M_OPT, M_VALUES, M_WEIGHT, Prepared

__all__ = [
    "LexEnumerator",
    "SumEnumerator",
    "recompute_prio",
    "start_lex",
    "start_sum",
]


def recompute_prio(prepared: Prepared, members: list, depth: int):
    """Reference priority: weight of the best completion of a partial answer.

    members[0:depth] are the instantiated positions. Sum mode folds with +,
    max mode merges weight multisets; both add each pending subtree root's
    memoized group minimum. The enumerators use O(1) incremental updates (sum)
    or this exact fold (max); tests compare the two.
    """
    parent_pos, slot, ell = prepared.parent_pos, prepared.slot, prepared.ell
    if prepared.mode == "max":
        acc = []
        for q in range(depth):
            acc.extend(members[q][M_WEIGHT])
        for q in range(depth, ell):
            if parent_pos[q] < depth:
                g = members[parent_pos[q]][M_GROUPS][slot[q]]
                acc.extend(g[0][M_OPT])
        return tuple(sorted(acc, reverse=not prepared.descending))
    acc = 0.0 if not members else members[0][M_WEIGHT] * 0
    for q in range(depth):
        acc += members[q][M_WEIGHT]
    for q in range(depth, ell):
        if parent_pos[q] < depth:
            g = members[parent_pos[q]][M_GROUPS][slot[q]]
            acc += g[0][M_OPT]
    return acc


class LexEnumerator:
    """Stack-driven enumeration in lexicographic order of the prepared sort."""

    def __init__(self, prepared: Prepared):
        self.prepared = prepared
        root = prepared.root_group
        # node = (prev, member, j, depth); j is the 1-based in-group position
        self._stack = [(None, root[0], 1, 1)]
        self._entries = [None] * prepared.ell
        self.pops = 0

    def next_raw(self) -> Optional[list]:
        """Next answer as the list of members per position, or None."""
        stack = self._stack
        if not stack:
            return None
        prepared = self.prepared
        parent_pos, slot, ell = prepared.parent_pos, prepared.slot, prepared.ell
        entries = self._entries
        node = stack.pop()
        self.pops += 1

        cur = node
        for q in range(node[3] - 1, -1, -1):
            entries[q] = cur[1]
            cur = cur[0]
        depth = node[3]

        j = node[2]
        group = prepared.root_group if depth == 1 else \
            entries[parent_pos[depth - 1]][M_GROUPS][slot[depth - 1]]
        if j < len(group):
            stack.append((node[0], group[j], j + 1, depth))

        cur = node
        for q in range(depth, ell):
            g = entries[parent_pos[q]][M_GROUPS][slot[q]]
            m = g[0]
            if len(g) > 1:
                stack.append((cur, g[1], 2, q + 1))
            cur = (cur, m, 1, q + 1)
            entries[q] = m
        return entries


class SumEnumerator:
    """Heap-driven enumeration in ascending priority order.

    Each pushed candidate stores its own full-extension weight, so a priority
    update is one subtraction and one addition (sum mode) or one exact
    refold over at most ell entries (max mode, where the fold does not invert).
    """

    def __init__(self, prepared: Prepared):
        self.prepared = prepared
        self._seq = count()
        root = prepared.root_group
        m = root[0]
        # heap element = (prio, value key, seq, node)
        self._heap = [(m[M_OPT], (m[M_VALUES],), next(self._seq), (None, m, 1, 1))]
        self._entries = [None] * prepared.ell
        self.pops = 0
        self.max_frontier = 1

    def frontier_size(self) -> int:
        return len(self._heap)

    def frontier(self) -> list[tuple]:
        """(priority, per-position values) snapshot, heap order not sorted."""
        out = []
        for prio, key, _, _node in self._heap:
            out.append((prio, key))
        return out

    def _max_prio(self, entries, depth: int, swap_pos: int, new_member):
        saved = entries[swap_pos]
        entries[swap_pos] = new_member
        prio = recompute_prio(self.prepared, entries, depth)
        entries[swap_pos] = saved
        return prio

    def next_raw(self):
        """(priority, members per position) for the next answer, or None."""
        heap = self._heap
        if not heap:
            return None
        prepared = self.prepared
        parent_pos, slot, ell = prepared.parent_pos, prepared.slot, prepared.ell
        entries = self._entries
        seq = self._seq
        is_max = prepared.mode == "max"

        prio, key, _, node = heappop(heap)
        self.pops += 1

        cur = node
        for q in range(node[3] - 1, -1, -1):
            entries[q] = cur[1]
            cur = cur[0]
        depth = node[3]
        member = node[1]

        j = node[2]
        group = prepared.root_group if depth == 1 else \
            entries[parent_pos[depth - 1]][M_GROUPS][slot[depth - 1]]
        if j < len(group):
            m2 = group[j]
            p2 = self._max_prio(entries, depth, depth - 1, m2) if is_max \
                else prio - member[M_OPT] + m2[M_OPT]
            heappush(heap, (p2, key[:-1] + (m2[M_VALUES],), next(seq),
                            (node[0], m2, j + 1, depth)))

        cur = node
        for q in range(depth, ell):
            g = entries[parent_pos[q]][M_GROUPS][slot[q]]
            m = g[0]
            entries[q] = m
            if len(g) > 1:
                m2 = g[1]
                p2 = self._max_prio(entries, q + 1, q, m2) if is_max \
                    else prio - m[M_OPT] + m2[M_OPT]
                heappush(heap, (p2, key + (m2[M_VALUES],), next(seq),
                                (cur, m2, 2, q + 1)))
            cur = (cur, m, 1, q + 1)
            key = key + (m[M_VALUES],)

        size = len(heap)
        if size > self.max_frontier:
            self.max_frontier = size
        return prio, entries


def start_lex(prepared: Prepared) -> LexEnumerator:
    """Stack route entry point (prepared must come from semijoin_reduce_lex)."""
    return LexEnumerator(prepared)


def start_sum(prepared: Prepared) -> SumEnumerator:
    """Heap route entry point (prepared must come from dp_preprocess)."""
    return SumEnumerator(prepared)

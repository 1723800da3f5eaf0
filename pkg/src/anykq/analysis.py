"""Structural query analysis: acyclicity, join trees, relation orders,
disruptive trios, lexicographic achievability, free-connex checks.

Everything here is O(1) in data size; costs depend only on the query, so the
join-tree search may be exhaustive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterator, Optional, Sequence

from .errors import CyclicQueryError, NotAchievable
from .model import ConjunctiveQuery, LexOrder


@dataclass
class JoinTree:
    """Rooted join tree over atom indices, children in deterministic order.

    Satisfies the running-intersection property: for each variable, the atoms
    containing it form a connected subtree.
    """

    root: int
    parent: dict[int, int]                  # child atom index -> parent atom index
    children: dict[int, tuple[int, ...]]    # parent -> ordered children
    join_vars: dict[int, tuple[str, ...]]   # child -> shared vars with its parent

    def edges(self) -> list[tuple[int, int]]:
        return [(p, c) for c, p in sorted(self.parent.items())]


@dataclass(frozen=True)
class TrioReport:
    found: bool
    witness: Optional[tuple[str, str, str]] = None  # (a, b, c); c neighbors both


def _hyperedges(query: ConjunctiveQuery) -> list[frozenset[str]]:
    return [frozenset(a.variables) for a in query.atoms]


def _gyo(edges: Sequence[frozenset[str]]) -> tuple[Optional[list[tuple[int, int]]], list[int]]:
    """GYO ear reduction over hyperedges (by index).

    Returns (eliminations, remaining): eliminations is a list of
    (ear_index, witness_index) in removal order, or None when stuck;
    remaining holds the indices still standing (1 when acyclic).
    """
    alive = list(range(len(edges)))
    elim: list[tuple[int, int]] = []
    progress = True
    # scan ears last-declared-first so earlier atoms rise toward the root
    while len(alive) > 1 and progress:
        progress = False
        for e in reversed(alive):
            others = [o for o in alive if o != e]
            shared = edges[e] & frozenset().union(*(edges[o] for o in others))
            witness = None
            for o in others:
                if shared <= edges[o]:
                    witness = o
                    break
            if witness is not None:
                elim.append((e, witness))
                alive.remove(e)
                progress = True
                break
    if len(alive) > 1:
        return None, alive
    return elim, alive


def is_acyclic(query: ConjunctiveQuery) -> bool:
    elim, _ = _gyo(_hyperedges(query))
    return elim is not None


def build_join_tree(query: ConjunctiveQuery) -> JoinTree:
    """Deterministic GYO-built join tree; raises CyclicQueryError when stuck.

    Ears are scanned in atom-declaration order each pass, so the example
    4-atom query yields root R with children S and T and U under T.
    """
    edges = _hyperedges(query)
    elim, alive = _gyo(edges)
    if elim is None:
        raise CyclicQueryError([set(edges[i]) for i in alive])
    root = alive[0]
    parent = {e: w for e, w in elim}
    return _finish_tree(query, root, parent)


def _finish_tree(query: ConjunctiveQuery, root: int, parent: dict[int, int]) -> JoinTree:
    edges = _hyperedges(query)
    children: dict[int, list[int]] = {i: [] for i in range(len(edges))}
    for c in sorted(parent):
        children[parent[c]].append(c)
    join_vars = {
        c: tuple(v for v in query.atoms[c].variables if v in edges[parent[c]])
        for c in parent
    }
    return JoinTree(
        root=root,
        parent=dict(parent),
        children={k: tuple(v) for k, v in children.items()},
        join_vars=join_vars,
    )


def tree_is_valid(query: ConjunctiveQuery, root: int, parent: dict[int, int]) -> bool:
    """Running-intersection check for an arbitrary rooted tree over the atoms."""
    n = len(query.atoms)
    # must be a tree reaching the root
    for c in parent:
        seen = {c}
        cur = c
        while cur != root:
            cur = parent.get(cur)
            if cur is None or cur in seen:
                return False
            seen.add(cur)
    if set(parent) | {root} != set(range(n)) or root in parent:
        return False
    edges = _hyperedges(query)
    adj: dict[int, set[int]] = {i: set() for i in range(n)}
    for c, p in parent.items():
        adj[c].add(p)
        adj[p].add(c)
    all_vars = set().union(*edges) if edges else set()
    for v in all_vars:
        keep = {i for i in range(n) if v in edges[i]}
        if not keep:
            continue
        start = next(iter(keep))
        stack, seen = [start], {start}
        while stack:
            cur = stack.pop()
            for nb in adj[cur]:
                if nb in keep and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if seen != keep:
            return False
    return True


def all_join_trees(query: ConjunctiveQuery) -> Iterator[JoinTree]:
    """Every valid rooted join tree, deterministic order (root asc, parents asc)."""
    n = len(query.atoms)
    if n == 1:
        yield _finish_tree(query, 0, {})
        return
    for root in range(n):
        non_roots = [i for i in range(n) if i != root]
        for pvec in product(range(n), repeat=n - 1):
            parent = {c: p for c, p in zip(non_roots, pvec)}
            if any(c == p for c, p in parent.items()):
                continue
            if tree_is_valid(query, root, parent):
                yield _finish_tree(query, root, parent)


def topological_rel_order(tree: JoinTree) -> list[int]:
    """Default relation order: preorder DFS following the stored child order."""
    order: list[int] = []
    stack = [tree.root]
    while stack:
        cur = stack.pop()
        order.append(cur)
        stack.extend(reversed(tree.children.get(cur, ())))
    return order


def _linear_extensions(tree: JoinTree) -> Iterator[list[int]]:
    """All topological sorts of the tree (parents before children)."""
    n = len(tree.parent) + 1

    def rec(placed: list[int], avail: list[int]) -> Iterator[list[int]]:
        if len(placed) == n:
            yield list(placed)
            return
        for i, node in enumerate(avail):
            nxt = avail[:i] + avail[i + 1 :] + list(tree.children.get(node, ()))
            placed.append(node)
            yield from rec(placed, nxt)
            placed.pop()

    yield from rec([], [tree.root])


def has_disruptive_trio(query: ConjunctiveQuery, order: Sequence[str]) -> TrioReport:
    """First (a, b, c) with a before b before c in the order, a/b non-neighbors
    in the hypergraph, c a neighbor of both. Scan order: position of a, then b,
    then c."""
    neighbors: dict[str, set[str]] = {}
    for atom in query.atoms:
        vs = atom.variables
        for v in vs:
            neighbors.setdefault(v, set()).update(vs)
    for v, ns in neighbors.items():
        ns.discard(v)
    L = list(order)
    for i, a in enumerate(L):
        for j in range(i + 1, len(L)):
            b = L[j]
            if b in neighbors.get(a, ()):
                continue
            for k in range(j + 1, len(L)):
                c = L[k]
                if c in neighbors.get(a, ()) and c in neighbors.get(b, ()):
                    return TrioReport(True, (a, b, c))
    return TrioReport(False, None)


def check_l_prefix(
    query: ConjunctiveQuery, tree: JoinTree, rel: Sequence[int], L: Sequence[str]
) -> bool:
    """Post-check: scanning atoms in rel order, do the L variables come first?

    Specifically (a) the concatenation of each atom's new L variables, taken in
    L-relative order, must equal L; and (b) once an atom introduces a non-L
    variable, later atoms may not introduce L variables. Under (a)+(b),
    group-sorted enumeration emits answers sorted by L and, among L-ties, by
    the full assignment in rel-order — matching the oracle exactly.
    """
    lpos = {v: i for i, v in enumerate(L)}
    seen: set[str] = set()
    next_l = 0
    non_l_seen = False
    for idx in rel:
        new = [v for v in query.atoms[idx].variables if v not in seen]
        seen.update(new)
        new_l = sorted((v for v in new if v in lpos), key=lpos.get)
        if new_l:
            if non_l_seen:
                return False
            for v in new_l:
                if next_l >= len(L) or L[next_l] != v:
                    return False
                next_l += 1
        if any(v not in lpos for v in new) and next_l < len(L):
            non_l_seen = True
    return next_l == len(L)


def l_consistent_join_tree(
    query: ConjunctiveQuery, L: Sequence[str]
) -> tuple[JoinTree, list[int]]:
    """Search every join tree and relation order for one realizing L.

    Raises NotAchievable when no pair passes check_l_prefix; for a trio-free
    total L over an acyclic query that should not happen, so callers treat it
    as a signal to use the SUM-encoding route.
    """
    lpos = {v: i for i, v in enumerate(L)}
    n = len(query.atoms)

    for tree in all_join_trees(query):
        # pruned DFS over linear extensions: track the L-prefix state
        def rec(placed: list[int], avail: list[int], seen: set[str],
                next_l: int, non_l: bool) -> Optional[list[int]]:
            if len(placed) == n:
                return list(placed) if next_l == len(L) else None
            for i, node in enumerate(avail):
                new = [v for v in query.atoms[node].variables if v not in seen]
                new_l = sorted((v for v in new if v in lpos), key=lpos.get)
                nl2, bad = next_l, False
                if new_l:
                    if non_l:
                        continue
                    for v in new_l:
                        if nl2 >= len(L) or L[nl2] != v:
                            bad = True
                            break
                        nl2 += 1
                    if bad:
                        continue
                non_l2 = non_l or (any(v not in lpos for v in new) and nl2 < len(L))
                out = rec(
                    placed + [node],
                    avail[:i] + avail[i + 1 :] + list(tree.children.get(node, ())),
                    seen | set(new),
                    nl2,
                    non_l2,
                )
                if out is not None:
                    return out
            return None

        rel = rec([], [tree.root], set(), 0, False)
        if rel is not None:
            assert check_l_prefix(query, tree, rel, L)
            return tree, rel
    raise NotAchievable(f"no join tree/relation order realizes LEX {'->'.join(L)}")


def is_free_connex(query: ConjunctiveQuery) -> bool:
    """Acyclic and still acyclic after adding an atom over the head variables."""
    if not is_acyclic(query):
        return False
    if not query.head:
        return True
    from .model import Atom

    extended = ConjunctiveQuery(
        query.name,
        query.head,
        query.atoms + (Atom("__head__", tuple(dict.fromkeys(query.head))),),
    )
    return is_acyclic(extended)


# --------------------------------------------------------------------------
# Analysis report (the `analyze` surface)


@dataclass
class AnalysisReport:
    acyclic: bool
    free_connex: bool
    algorithm: str  # LEX | SUM | LEX-via-SUM | NONE (cyclic)
    tree: Optional[JoinTree] = None
    rel_order: Optional[list[int]] = None
    trio: Optional[TrioReport] = None
    notes: list[str] = field(default_factory=list)

    def lines(self, query: ConjunctiveQuery) -> list[str]:
        """Key-value lines, machine-readable and human-readable at once."""
        out = [
            f"query: {query}",
            f"acyclic: {'yes' if self.acyclic else 'no'}",
            f"free_connex: {'yes' if self.free_connex else 'no'}",
            f"algorithm: {self.algorithm}",
        ]
        if self.tree is not None:
            names = [a.relation for a in query.atoms]
            out.append(f"tree_root: {names[self.tree.root]}")
            for c in sorted(self.tree.parent):
                jv = ",".join(self.tree.join_vars[c]) or "-"
                out.append(f"tree_edge: {names[self.tree.parent[c]]} -> {names[c]} [{jv}]")
        if self.rel_order is not None:
            names = [a.relation for a in query.atoms]
            out.append(f"rel_order: {' '.join(names[i] for i in self.rel_order)}")
        if self.trio is not None:
            if self.trio.found:
                a, b, c = self.trio.witness
                out.append(f"disruptive_trio: {a} -> {b} -> {c}")
            else:
                out.append("disruptive_trio: none")
        for n in self.notes:
            out.append(f"note: {n}")
        return out


def analyze(query: ConjunctiveQuery, spec) -> AnalysisReport:
    """Structure + algorithm-selection report for a parsed query."""
    if not is_acyclic(query):
        return AnalysisReport(acyclic=False, free_connex=False, algorithm="NONE",
                              notes=["cyclic query: ranked enumeration unsupported"])
    fc = is_free_connex(query)
    if isinstance(spec, LexOrder):
        trio = has_disruptive_trio(query, spec.variables)
        if trio.found:
            tree = build_join_tree(query)
            return AnalysisReport(True, fc, "LEX-via-SUM", tree,
                                  topological_rel_order(tree), trio,
                                  ["disruptive trio blocks the stack route"])
        try:
            tree, rel = l_consistent_join_tree(query, spec.variables)
            return AnalysisReport(True, fc, "LEX", tree, rel, trio)
        except NotAchievable:
            tree = build_join_tree(query)
            return AnalysisReport(True, fc, "LEX-via-SUM", tree,
                                  topological_rel_order(tree), trio,
                                  ["no tree/order realizes the requested order; "
                                   "using the SUM encoding"])
    tree = build_join_tree(query)
    return AnalysisReport(True, fc, "SUM", tree, topological_rel_order(tree), None)

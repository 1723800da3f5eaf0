"""Bottom-up preprocessing: semijoin reduction, optimal-completion weights,
attribute-to-tuple weight conversion, and the lexicographic SUM encoding.

The boolean pass (semijoin_reduce_lex) and the weighted pass (dp_preprocess)
share one edge-processing skeleton: process tree edges in reverse relation
order, group the already-reduced child by the join key, fold each group once
(memoized in the group head), and update every parent tuple via a single
lookup. A parent whose key has no group dies; with weights that is exactly
opt = +inf.

Members are plain tuples (values, opt, child_groups, own_weight) and every
member stores direct references to its child groups, so enumeration never
touches a hash table.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .analysis import JoinTree
from .errors import EmptyResult, SchemaError
from .model import (
    ConjunctiveQuery,
    Database,
    Relation,
    SumTerm,
    Value,
    WeightTables,
    resolve_weight,
)

# member tuple layout
M_VALUES, M_OPT, M_GROUPS, M_WEIGHT = 0, 1, 2, 3


@dataclass
class PreprocessStats:
    survivors: dict[str, int] = field(default_factory=dict)
    input_sizes: dict[str, int] = field(default_factory=dict)
    group_counts: dict[tuple[str, str], int] = field(default_factory=dict)
    fold_computations: int = 0  # group aggregates computed; once per group


@dataclass
class Prepared:
    """Everything the enumerators need, plus inspection hooks for tests."""

    query: ConjunctiveQuery
    tree: JoinTree
    rel: list[int]                      # position -> atom index
    mode: str                           # 'lex' | 'sum' | 'max'
    descending: bool
    parent_pos: list[int]               # position -> parent position (0 unused at root)
    slot: list[int]                     # position -> child slot within the parent
    n_slots: list[int]                  # position -> number of child slots
    root_group: list                    # sorted members of the root relation
    atom_vars: list[tuple[str, ...]]    # position -> variable names (column order)
    stats: PreprocessStats = field(default_factory=PreprocessStats)
    opt_by_relation: dict[str, dict[tuple, object]] = field(default_factory=dict)
    alive_by_relation: dict[str, dict[tuple, bool]] = field(default_factory=dict)

    @property
    def ell(self) -> int:
        return len(self.rel)


def build_join_index(parent: Relation, child: Relation,
                     join_vars: Sequence[str]) -> dict[tuple, list[tuple]]:
    """Hash index: child rows grouped by their projection onto join_vars.

    Column names are treated as variable names here (the contract-level view);
    parent tuples probe with the same projection, and a missing key means the
    parent tuple is dangling for this edge.
    """
    for v in join_vars:
        if v not in child.columns:
            raise SchemaError(f"join variable {v} not in relation {child.name}")
        if v not in parent.columns:
            raise SchemaError(f"join variable {v} not in relation {parent.name}")
    cols = [child.columns.index(v) for v in join_vars]
    index: dict[tuple, list[tuple]] = {}
    for row in child.rows:
        index.setdefault(tuple(row[c] for c in cols), []).append(row)
    return index


def _positions(query: ConjunctiveQuery, tree: JoinTree,
               rel: Sequence[int]) -> tuple[list[int], list[int], list[int]]:
    """parent position, slot-within-parent, and slot count per position."""
    pos_of = {atom: p for p, atom in enumerate(rel)}
    ell = len(rel)
    parent_pos = [0] * ell
    children_of: dict[int, list[int]] = {p: [] for p in range(ell)}
    for p in range(1, ell):
        pp = pos_of[tree.parent[rel[p]]]
        if pp >= p:
            raise SchemaError("rel order is not topological for the join tree")
        parent_pos[p] = pp
        children_of[pp].append(p)
    slot = [0] * ell
    for pp, kids in children_of.items():
        for s, q in enumerate(sorted(kids)):
            slot[q] = s
    n_slots = [len(children_of[p]) for p in range(ell)]
    return parent_pos, slot, n_slots


def prepare(
    query: ConjunctiveQuery,
    db: Database,
    tree: JoinTree,
    rel: Sequence[int],
    mode: str,
    weights: Optional[list[list]] = None,   # per position, per row (sum/max)
    lex_order: Optional[Sequence[str]] = None,
    descending: bool = False,
) -> Prepared:
    """One bottom-up pass over the tree edges in reverse rel order.

    mode 'lex': boolean semijoin reduction; groups sorted by the child's
    projection onto lex_order (L-relative) then full-tuple order.
    mode 'sum'/'max': weighted reduction; opt(t) = w(t) combined with each
    child group's memoized best; groups sorted by (opt, full tuple).
    Raises EmptyResult when the root relation loses all tuples.
    """
    rel = list(rel)
    ell = len(rel)
    parent_pos, slot, n_slots = _positions(query, tree, rel)
    atoms = [query.atoms[i] for i in rel]
    atom_vars = [a.variables for a in atoms]
    relations = [db[a.relation] for a in atoms]
    for p, a in enumerate(atoms):
        if len(a.terms) != relations[p].arity or a.terms != atom_vars[p]:
            raise SchemaError(
                f"atom {a} is not normalized (run remove_self_joins/apply_selections)"
            )

    stats = PreprocessStats()
    rows = [r.rows for r in relations]
    alive = [[True] * len(r) for r in rows]
    if mode == "sum":
        opt = [list(weights[p]) for p in range(ell)]
    elif mode == "max":
        reverse = not descending  # leximax for ASC, leximin on negated for DESC
        opt = [[tuple(sorted(w, reverse=reverse)) for w in weights[p]] for p in range(ell)]
    else:
        opt = [[0.0] * len(rows[p]) for p in range(ell)]
    # own weight must survive the in-place opt accumulation below
    own_w = [list(weights[p]) for p in range(ell)] if mode == "sum" else [list(o) for o in opt]
    slot_refs = [[[None] * len(rows[p]) for _ in range(n_slots[p])] for p in range(ell)]

    if mode == "lex":
        lpos = {v: i for i, v in enumerate(lex_order or ())}

        def sort_cols(p: int) -> list[int]:
            vs = atom_vars[p]
            return [vs.index(v) for v in sorted(set(vs) & set(lpos), key=lpos.get)]
    else:
        def sort_cols(p: int) -> list[int]:
            return []

    def build_members(p: int) -> list:
        mem = []
        rp, ap, op_, wp = rows[p], alive[p], opt[p], own_w[p]
        srefs = slot_refs[p]
        nsl = n_slots[p]
        for i in range(len(rp)):
            if ap[i]:
                groups = tuple(srefs[s][i] for s in range(nsl)) if nsl else ()
                mem.append((rp[i], op_[i], groups, wp[i]))
        return mem

    for p in range(ell - 1, 0, -1):
        pp = parent_pos[p]
        jvars = tree.join_vars[rel[p]]
        ccols = [atom_vars[p].index(v) for v in jvars]
        pcols = [atom_vars[pp].index(v) for v in jvars]
        members = build_members(p)
        index: dict[tuple, list] = {}
        for m in members:
            vals = m[M_VALUES]
            index.setdefault(tuple(vals[c] for c in ccols), []).append(m)
        lc = sort_cols(p)
        if mode == "lex":
            for g in index.values():
                g.sort(key=lambda m: (tuple(m[M_VALUES][c] for c in lc), m[M_VALUES]))
        else:
            for g in index.values():
                g.sort(key=lambda m: (m[M_OPT], m[M_VALUES]))
        stats.fold_computations += len(index)  # one fold per group, at sort time
        stats.group_counts[(relations[pp].name, relations[p].name)] = len(index)

        prow, palive, popt = rows[pp], alive[pp], opt[pp]
        prefs = slot_refs[pp][slot[p]]
        s_mode = mode
        for i in range(len(prow)):
            if not palive[i]:
                continue
            g = index.get(tuple(prow[i][c] for c in pcols))
            if g is None:
                palive[i] = False
                continue
            prefs[i] = g
            if s_mode == "sum":
                popt[i] += g[0][M_OPT]
            elif s_mode == "max":
                merged = popt[i] + g[0][M_OPT]
                popt[i] = tuple(sorted(merged, reverse=not descending))

    root_members = build_members(0)
    lc = sort_cols(0)
    if mode == "lex":
        root_members.sort(key=lambda m: (tuple(m[M_VALUES][c] for c in lc), m[M_VALUES]))
    else:
        root_members.sort(key=lambda m: (m[M_OPT], m[M_VALUES]))

    opt_maps: dict[str, dict[tuple, object]] = {}
    alive_maps: dict[str, dict[tuple, bool]] = {}
    dead = float("inf")
    for p in range(ell):
        name = relations[p].name
        stats.input_sizes[name] = len(rows[p])
        stats.survivors[name] = sum(alive[p])
        om, am = {}, {}
        for i, row in enumerate(rows[p]):
            am[row] = alive[p][i]
            if mode == "sum":
                om[row] = opt[p][i] if alive[p][i] else dead
            else:
                om[row] = opt[p][i] if alive[p][i] else None
        opt_maps[name] = om
        alive_maps[name] = am

    prepared = Prepared(
        query=query, tree=tree, rel=rel, mode=mode, descending=descending,
        parent_pos=parent_pos, slot=slot, n_slots=n_slots,
        root_group=root_members, atom_vars=atom_vars, stats=stats,
        opt_by_relation=opt_maps, alive_by_relation=alive_maps,
    )
    if not root_members:
        raise EmptyResult(f"root relation {relations[0].name} has no surviving tuples")
    return prepared


def semijoin_reduce_lex(
    query: ConjunctiveQuery, db: Database, tree: JoinTree,
    rel: Sequence[int], lex_order: Sequence[str],
) -> Prepared:
    """Boolean bottom-up reduction with groups sorted for the stack route.

    Removes exactly the tuples whose subtree cannot complete; dangling tuples
    in non-parent roles (never probed) stay, matching the no-full-reduction
    behaviour.
    """
    return prepare(query, db, tree, rel, mode="lex", lex_order=lex_order)


def dp_preprocess(
    query: ConjunctiveQuery, db: Database, tree: JoinTree, rel: Sequence[int],
    weights: list[list], mode: str = "sum", descending: bool = False,
) -> Prepared:
    """Weighted bottom-up pass: opt(t) per tuple, groups sorted by opt."""
    return prepare(query, db, tree, rel, mode=mode, weights=weights,
                   descending=descending)


# --------------------------------------------------------------------------
# Attribute weights -> tuple weights


def mu_assignment(query: ConjunctiveQuery, rel: Sequence[int]) -> dict[str, int]:
    """Each variable is charged to the first relation (by rel position)
    containing it."""
    mu: dict[str, int] = {}
    for p, atom_idx in enumerate(rel):
        for v in query.atoms[atom_idx].variables:
            mu.setdefault(v, p)
    return mu


def attr_weights_to_tuple_weights(
    query: ConjunctiveQuery,
    db: Database,
    rel: Sequence[int],
    terms: Sequence[SumTerm],
    tables: Optional[WeightTables] = None,
    zero=0.0,
) -> list[list]:
    """Per-position per-row tuple weights w(t) = sum of the charged terms.

    Answer SUM over the terms equals the SUM of these tuple weights because
    every term is charged to exactly one atom occurrence.
    """
    mu = mu_assignment(query, rel)
    by_pos: dict[int, list[SumTerm]] = {}
    for t in terms:
        if t.variable not in mu:
            raise SchemaError(f"ranking variable {t.variable} not in the body")
        by_pos.setdefault(mu[t.variable], []).append(t)
    out: list[list] = []
    for p, atom_idx in enumerate(rel):
        atom = query.atoms[atom_idx]
        rows = db[atom.relation].rows
        mine = by_pos.get(p)
        if not mine:
            out.append([zero] * len(rows))
            continue
        cols = [(atom.variables.index(t.variable), t) for t in mine]
        ws = []
        for row in rows:
            acc = zero
            for c, t in cols:
                acc = acc + resolve_weight(t.variable, row[c], t.table, tables)
            ws.append(acc)
        out.append(ws)
    return out


def attr_weight_vectors(
    query: ConjunctiveQuery,
    db: Database,
    rel: Sequence[int],
    terms: Sequence[SumTerm],
    tables: Optional[WeightTables] = None,
    descending: bool = False,
) -> list[list]:
    """MAX-mode variant: per-row tuple of the charged term weights (negated
    for DESC), kept as a multiset so ties refine deterministically."""
    sign = -1.0 if descending else 1.0
    mu = mu_assignment(query, rel)
    by_pos: dict[int, list[SumTerm]] = {}
    for t in terms:
        if t.variable not in mu:
            raise SchemaError(f"ranking variable {t.variable} not in the body")
        by_pos.setdefault(mu[t.variable], []).append(t)
    out: list[list] = []
    for p, atom_idx in enumerate(rel):
        atom = query.atoms[atom_idx]
        rows = db[atom.relation].rows
        mine = by_pos.get(p, [])
        cols = [(atom.variables.index(t.variable), t) for t in mine]
        out.append([
            tuple(sign * resolve_weight(t.variable, row[c], t.table, tables)
                  for c, t in cols)
            for row in rows
        ])
    return out


def tuple_weight_arrays(
    query: ConjunctiveQuery, db: Database, rel: Sequence[int],
    descending: bool = False,
) -> list[list[float]]:
    """Per-position arrays of the relations' own tuple weights (0 when absent)."""
    sign = -1.0 if descending else 1.0
    out = []
    for atom_idx in rel:
        r = db[query.atoms[atom_idx].relation]
        if r.weights is None:
            out.append([0.0] * len(r.rows))
        else:
            out.append([sign * w for w in r.weights])
    return out


# --------------------------------------------------------------------------
# Lexicographic-to-SUM encoding


def lex_to_sum_weights(
    query: ConjunctiveQuery, L: Sequence[str], n: int, db: Database,
) -> dict[str, dict[Value, Fraction]]:
    """Exact weights that make SUM order coincide with LEX order.

    The i-th smallest value (1-based rank) of the j-th L-variable (1-based)
    weighs i * n**(|L|-1-j), with n an upper bound on relation cardinality.
    A rank step at position j then dominates everything later by at least 1/n,
    so the encoding is kept exact with Fractions rather than floats.
    """
    if n < 1:
        raise SchemaError("cardinality bound n must be positive")
    columns: dict[str, set[Value]] = {v: set() for v in L}
    for atom in query.atoms:
        rows = db[atom.relation].rows
        for c, v in enumerate(atom.variables):
            if v in columns:
                columns[v].update(row[c] for row in rows)
    out: dict[str, dict[Value, Fraction]] = {}
    size = len(L)
    for j, v in enumerate(L, start=1):
        scale = Fraction(n) ** (size - 1 - j)
        ranked = sorted(columns[v])
        out[v] = {val: Fraction(i) * scale for i, val in enumerate(ranked, start=1)}
    return out

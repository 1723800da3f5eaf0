"""Independent join-then-rank oracle, random instances, differential checking.

The oracle materializes the full join with left-deep hash joins in rel order,
weights every answer from the spec directly, and sorts by
(weight key, full assignment in rel-order). It shares the query model and the
structural analysis (which define the tie-key) with the engine but none of the
preprocessing, group, or enumeration machinery, so bugs cannot cancel out.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import analysis
from .errors import AnyKQError, CyclicQueryError, TooLargeError
from .model import (
    Answer,
    Atom,
    ConjunctiveQuery,
    Database,
    LexOrder,
    MaxOrder,
    RankingSpec,
    Relation,
    SumOrder,
    TupleWeightOrder,
    WeightTables,
    normalize,
    resolve_weight,
)

DEFAULT_GUARD = 10_000_000


def join_then_rank(
    query: ConjunctiveQuery,
    db: Database,
    spec: RankingSpec,
    tables: Optional[WeightTables] = None,
    guard: int = DEFAULT_GUARD,
) -> list[Answer]:
    """All answers, fully materialized and sorted. Guarded against blow-up."""
    q, d = normalize(query, db)
    report = analysis.analyze(q, spec)
    if not report.acyclic:
        raise CyclicQueryError([set(a.variables) for a in q.atoms])
    rel = report.rel_order

    # left-deep hash joins in rel order; carry (assignment, tuple-weight sum)
    atoms = [q.atoms[i] for i in rel]
    first = atoms[0]
    rel0 = d[first.relation]
    w0 = rel0.weights or [0.0] * len(rel0.rows)
    partial: list[tuple[dict, float]] = [
        (dict(zip(first.variables, row)), w)
        for row, w in zip(rel0.rows, w0)
    ]
    seen = set(first.variables)
    for atom in atoms[1:]:
        r = d[atom.relation]
        ws = r.weights or [0.0] * len(r.rows)
        shared = [v for v in atom.variables if v in seen]
        scols = [atom.variables.index(v) for v in shared]
        index: dict[tuple, list[tuple[tuple, float]]] = {}
        for row, w in zip(r.rows, ws):
            index.setdefault(tuple(row[c] for c in scols), []).append((row, w))
        new_vars = [(i, v) for i, v in enumerate(atom.variables) if v not in seen]
        out: list[tuple[dict, float]] = []
        for assignment, acc in partial:
            key = tuple(assignment[v] for v in shared)
            for row, w in index.get(key, ()):
                a2 = dict(assignment)
                for i, v in new_vars:
                    a2[v] = row[i]
                out.append((a2, acc + w))
                if len(out) > guard:
                    raise TooLargeError(
                        f"join exceeds the {guard}-row oracle budget"
                    )
        partial = out
        seen.update(atom.variables)

    var_order = _appearance_order(q, rel)
    keyed = [
        (_weight_key(assignment, spec, tables, acc),
         tuple(assignment[v] for v in var_order),
         assignment, acc)
        for assignment, acc in partial
    ]
    keyed.sort(key=lambda t: (t[0], t[1]))
    return [
        Answer(assignment, _user_weight(key, spec, acc))
        for key, _, assignment, acc in keyed
    ]


def _appearance_order(q: ConjunctiveQuery, rel: Sequence[int]) -> list[str]:
    out: list[str] = []
    for i in rel:
        for v in q.atoms[i].variables:
            if v not in out:
                out.append(v)
    return out


def _weight_key(assignment, spec, tables, tuple_weight_acc):
    if isinstance(spec, LexOrder):
        return tuple(assignment[v] for v in spec.variables)
    if isinstance(spec, SumOrder):
        total = sum(resolve_weight(t.variable, assignment[t.variable], t.table, tables)
                    for t in spec.terms)
        return -total if spec.descending else total
    if isinstance(spec, MaxOrder):
        sign = -1.0 if spec.descending else 1.0
        vals = [sign * resolve_weight(t.variable, assignment[t.variable], t.table, tables)
                for t in spec.terms]
        # leximax (leximin on negated values for DESC): the engine's refinement
        return tuple(sorted(vals, reverse=not spec.descending))
    if isinstance(spec, TupleWeightOrder):
        return -tuple_weight_acc if spec.descending else tuple_weight_acc
    raise TypeError(f"unsupported spec {type(spec).__name__}")


def _user_weight(key, spec, tuple_weight_acc):
    if isinstance(spec, LexOrder):
        return key
    if isinstance(spec, TupleWeightOrder):
        return tuple_weight_acc
    if isinstance(spec, MaxOrder):
        return -key[0] if spec.descending else key[0]
    return -key if spec.descending else key


# --------------------------------------------------------------------------
# Random instances


@dataclass
class InstanceMeta:
    shape: str
    atoms: int
    seed: int
    variables: tuple[str, ...]


def random_instance(
    shape: str = "path",
    atoms: int = 3,
    n: int = 50,
    domain: int = 8,
    weight_range: tuple[int, int] = (0, 20),
    seed: int = 0,
    dangling: float = 0.1,
) -> tuple[ConjunctiveQuery, Database, InstanceMeta]:
    """Seeded binary-atom instance of a path, star, or random-tree query.

    Every relation gets 1..n integer tuples over [0, domain), integer tuple
    weights from weight_range, and with probability `dangling` a join-side
    value is bumped outside the domain so the tuple cannot join.
    """
    rng = random.Random(seed)
    if atoms < 1:
        raise AnyKQError("need at least one atom")
    if shape == "path":
        var_pairs = [(f"x{i}", f"x{i+1}") for i in range(1, atoms + 1)]
    elif shape == "star":
        var_pairs = [("x1", f"x{i+1}") for i in range(1, atoms + 1)]
    elif shape == "tree":
        var_pairs = []
        for i in range(1, atoms + 1):
            parent = 1 if i == 1 else rng.randint(1, i)
            var_pairs.append((f"x{parent}", f"x{i+1}"))
    else:
        raise AnyKQError(f"unknown shape {shape!r}")

    db = Database()
    atoms_out = []
    lo, hi = weight_range
    for i, (a, b) in enumerate(var_pairs, start=1):
        name = f"R{i}"
        rows = set()
        size = rng.randint(1, max(1, n))
        for _ in range(size):
            va, vb = rng.randrange(domain), rng.randrange(domain)
            if rng.random() < dangling:
                if rng.random() < 0.5:
                    va = -(rng.randrange(domain) + 1)
                else:
                    vb = -(rng.randrange(domain) + 1)
            rows.add((va, vb))
        rows = sorted(rows)
        weights = [float(rng.randint(lo, hi)) for _ in rows]
        db.add(Relation(name, (a, b), list(rows), weights))
        atoms_out.append(Atom(name, (a, b)))
    variables = []
    for a in atoms_out:
        for v in a.variables:
            if v not in variables:
                variables.append(v)
    q = ConjunctiveQuery("Q", tuple(variables), tuple(atoms_out))
    return q, db, InstanceMeta(shape, atoms, seed, tuple(variables))


def trio_free_order(query: ConjunctiveQuery) -> list[str]:
    """First-appearance order; trio-free for path/star/tree-shaped queries."""
    return list(query.body_variables)


def trio_order(query: ConjunctiveQuery) -> Optional[list[str]]:
    """An order containing a disruptive trio, or None if none exists."""
    variables = list(query.body_variables)
    neighbors: dict[str, set[str]] = {v: set() for v in variables}
    for atom in query.atoms:
        for v in atom.variables:
            neighbors[v].update(atom.variables)
    for v in variables:
        neighbors[v].discard(v)
    for a in variables:
        for b in variables:
            if a == b or b in neighbors[a]:
                continue
            for c in variables:
                if c in (a, b):
                    continue
                if c in neighbors[a] and c in neighbors[b]:
                    rest = [v for v in variables if v not in (a, b, c)]
                    return [a, b, c] + rest
    return None


# --------------------------------------------------------------------------
# Differential harness


@dataclass
class Mismatch:
    seed: int
    spec_name: str
    index: int            # first diverging position (-1: length mismatch)
    engine_row: Optional[tuple] = None
    oracle_row: Optional[tuple] = None
    instance_dump: str = ""


@dataclass
class CheckReport:
    instances: int = 0
    runs: int = 0
    answers: int = 0
    mismatches: list[Mismatch] = field(default_factory=list)
    frontier_violations: int = 0

    @property
    def ok(self) -> bool:
        return not self.mismatches and self.frontier_violations == 0


def _spec_variants(query: ConjunctiveQuery, seed: int) -> list[tuple[str, RankingSpec]]:
    from .model import SumTerm

    desc = bool(seed % 2)
    variables = query.body_variables
    terms = tuple(SumTerm(v) for v in variables)
    out: list[tuple[str, RankingSpec]] = [
        ("lex-trio-free", LexOrder(tuple(trio_free_order(query)))),
        ("sum", SumOrder(terms, desc)),
        ("max", MaxOrder(terms, desc)),
        ("tupleweight", TupleWeightOrder(desc)),
    ]
    trio = trio_order(query)
    if trio is not None:
        out.insert(1, ("lex-trio", LexOrder(tuple(trio))))
    return out


def _engine_sequence(query, db, spec, frontier_check=True):
    """Run the engine, returning (rows, frontier_ok). Row = (assignment items, weight)."""
    from . import pipeline
    from .engine import SumEnumerator

    plan = pipeline.plan_query(query, db, spec)
    rows = []
    ok = True
    if plan.empty:
        return rows, ok
    enum = pipeline.make_enumerator(plan)
    get = plan.var_source
    ell = plan.prepared.ell
    is_sum = isinstance(enum, SumEnumerator)
    while True:
        nxt = enum.next_raw()
        if nxt is None:
            break
        prio, entries = (None, nxt) if not is_sum else nxt
        if is_sum and frontier_check and enum.frontier_size() > enum.pops * ell:
            ok = False
        assignment = {v: entries[p][0][c] for v, (p, c) in get.items()}
        rows.append((assignment, pipeline._present_weight(plan, prio, entries)))
    return rows, ok


def _compare(engine_rows, oracle_answers, variables) -> Optional[tuple]:
    if len(engine_rows) != len(oracle_answers):
        return (-1, ("len", len(engine_rows)), ("len", len(oracle_answers)))
    for i, ((a_e, w_e), ans) in enumerate(zip(engine_rows, oracle_answers)):
        t_e = tuple(a_e[v] for v in variables)
        t_o = tuple(ans.assignment[v] for v in variables)
        if t_e != t_o or w_e != ans.weight:
            return (i, (t_e, w_e), (t_o, ans.weight))
    return None


def _dump_instance(query: ConjunctiveQuery, db: Database) -> str:
    lines = [str(query)]
    for name in sorted(db.relations):
        r = db.relations[name]
        ws = r.weights or [0.0] * len(r.rows)
        rows = " ".join(f"{row}:{w:g}" for row, w in zip(r.rows, ws))
        lines.append(f"{name}({','.join(r.columns)}): {rows}")
    return "\n".join(lines)


def _minimize(query, db, spec, variables) -> Database:
    """Greedy row removal keeping the mismatch alive; best-effort, bounded."""
    def mismatches(d: Database) -> bool:
        try:
            rows, _ = _engine_sequence(query, d, spec, frontier_check=False)
            oracle = join_then_rank(query, d, spec)
        except AnyKQError:
            return False
        return _compare(rows, oracle, variables) is not None

    current = db
    changed = True
    passes = 0
    while changed and passes < 5:
        changed = False
        passes += 1
        for name in sorted(current.relations):
            r = current.relations[name]
            i = 0
            while i < len(current.relations[name].rows):
                r = current.relations[name]
                trial = Database()
                for nm, rr in current.relations.items():
                    if nm != name:
                        trial.add(Relation(nm, rr.columns, list(rr.rows),
                                           list(rr.weights) if rr.weights else None))
                rows = [row for j, row in enumerate(r.rows) if j != i]
                ws = [w for j, w in enumerate(r.weights or []) if j != i] or None
                trial.add(Relation(name, r.columns, rows, ws))
                if mismatches(trial):
                    current = trial
                    changed = True
                else:
                    i += 1
    return current


def differential_check(
    seeds: Sequence[int],
    shapes: Sequence[str] = ("path", "star", "tree"),
    max_atoms: int = 5,
    max_rows: int = 200,
    domain: int = 8,
    dangling: float = 0.15,
    minimize: bool = True,
    stop_on_first: bool = True,
) -> CheckReport:
    """Engine vs oracle over seeded instances under every ranking class."""
    report = CheckReport()
    for seed in seeds:
        rng = random.Random(seed)
        shape = shapes[seed % len(shapes)]
        atoms = rng.randint(2, max_atoms)
        n = rng.randint(2, max_rows)
        dom = rng.randint(2, domain)
        q, db, _meta = random_instance(shape, atoms, n, dom,
                                       weight_range=(-5, 20), seed=seed,
                                       dangling=dangling)
        report.instances += 1
        variables = q.body_variables
        for spec_name, spec in _spec_variants(q, seed):
            try:
                oracle = join_then_rank(q, db, spec)
            except TooLargeError:
                continue
            rows, frontier_ok = _engine_sequence(q, db, spec)
            report.runs += 1
            report.answers += len(rows)
            if not frontier_ok:
                report.frontier_violations += 1
            diff = _compare(rows, oracle, variables)
            if diff is not None:
                idx, e_row, o_row = diff
                dump_db = _minimize(q, db, spec, variables) if minimize else db
                report.mismatches.append(Mismatch(
                    seed, spec_name, idx, e_row, o_row, _dump_instance(q, dump_db)
                ))
                if stop_on_first:
                    return report
    return report

"""End-to-end planning and answer streaming.

plan_query decides the route:
  * Lex spec, no disruptive trio, an L-consistent tree/order exists -> stack route.
  * Lex spec otherwise -> exact SUM encoding of the lex key (heap route).
  * Sum / MaxAgg / TupleWeight specs -> heap route on converted tuple weights.

The emitted stream is deterministic: ranked by the spec's weight, ties by the
full assignment in rel-order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice
from typing import Iterator, Optional

from . import analysis
from .analysis import AnalysisReport, JoinTree
from .engine import LexEnumerator, SumEnumerator, start_lex, start_sum
from .errors import EmptyResult, NotAchievable, SchemaError
from .model import (
    Answer,
    ConjunctiveQuery,
    Database,
    LexOrder,
    MaxOrder,
    RankingSpec,
    SumOrder,
    SumTerm,
    TupleWeightOrder,
    WeightTables,
    normalize,
    validate_query,
    validate_ranking,
)
from .preprocess import (
    Prepared,
    attr_weight_vectors,
    attr_weights_to_tuple_weights,
    dp_preprocess,
    lex_to_sum_weights,
    semijoin_reduce_lex,
    tuple_weight_arrays,
)


@dataclass
class Plan:
    query: ConjunctiveQuery          # normalized
    db: Database                     # normalized
    spec: RankingSpec
    report: AnalysisReport
    prepared: Optional[Prepared]     # None when the result is provably empty
    route: str                       # 'lex' | 'sum'
    head: tuple[str, ...]
    var_source: dict[str, tuple[int, int]] = field(default_factory=dict)
    lex_key_source: list[tuple[int, int]] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return self.prepared is None

    @property
    def rel_names(self) -> list[str]:
        if self.prepared is None:
            return []
        return [self.query.atoms[i].relation for i in self.prepared.rel]


def _var_source(query: ConjunctiveQuery, rel: list[int]) -> dict[str, tuple[int, int]]:
    """variable -> (rel position, column) of its first appearance."""
    out: dict[str, tuple[int, int]] = {}
    for p, atom_idx in enumerate(rel):
        for c, v in enumerate(query.atoms[atom_idx].variables):
            out.setdefault(v, (p, c))
    return out


def plan_query(
    query: ConjunctiveQuery,
    db: Database,
    spec: RankingSpec,
    tables: Optional[WeightTables] = None,
) -> Plan:
    validate_query(query, db)
    validate_ranking(query, spec)
    q, d = normalize(query, db)
    if not q.is_join_query:
        raise SchemaError(
            "ranked enumeration needs a full join query (head keeps every "
            "body variable); projection queries are analysis-only"
        )
    report = analysis.analyze(q, spec)
    if not report.acyclic:
        from .errors import CyclicQueryError

        raise CyclicQueryError([set(a.variables) for a in q.atoms])

    route = "lex" if report.algorithm == "LEX" else "sum"
    tree, rel = report.tree, list(report.rel_order)
    prepared: Optional[Prepared] = None
    try:
        if route == "lex":
            prepared = semijoin_reduce_lex(q, d, tree, rel, spec.variables)
        else:
            prepared = _prepare_weighted(q, d, tree, rel, spec, tables)
    except EmptyResult:
        prepared = None

    plan = Plan(query=q, db=d, spec=spec, report=report, prepared=prepared,
                route=route, head=q.body_variables)
    if prepared is not None:
        plan.var_source = _var_source(q, rel)
        if isinstance(spec, LexOrder):
            plan.lex_key_source = [plan.var_source[v] for v in spec.variables]
    return plan


def _prepare_weighted(q, d, tree: JoinTree, rel: list[int], spec: RankingSpec,
                      tables: Optional[WeightTables]) -> Prepared:
    if isinstance(spec, LexOrder):
        n = max((len(d[a.relation].rows) for a in q.atoms), default=1)
        fns = lex_to_sum_weights(q, spec.variables, max(n, 1), d)
        enc_tables = {f"__lex_{v}": fn for v, fn in fns.items()}
        terms = tuple(SumTerm(v, f"__lex_{v}") for v in spec.variables)
        weights = attr_weights_to_tuple_weights(q, d, rel, terms, enc_tables,
                                                zero=Fraction(0))
        return dp_preprocess(q, d, tree, rel, weights, mode="sum")
    if isinstance(spec, SumOrder):
        weights = attr_weights_to_tuple_weights(q, d, rel, spec.terms, tables)
        if spec.descending:
            weights = [[-w for w in col] for col in weights]
        return dp_preprocess(q, d, tree, rel, weights, mode="sum",
                             descending=spec.descending)
    if isinstance(spec, MaxOrder):
        weights = attr_weight_vectors(q, d, rel, spec.terms, tables,
                                      descending=spec.descending)
        return dp_preprocess(q, d, tree, rel, weights, mode="max",
                             descending=spec.descending)
    if isinstance(spec, TupleWeightOrder):
        weights = tuple_weight_arrays(q, d, rel, descending=spec.descending)
        return dp_preprocess(q, d, tree, rel, weights, mode="sum",
                             descending=spec.descending)
    raise TypeError(f"unsupported ranking spec {type(spec).__name__}")


def _present_weight(plan: Plan, internal, entries) -> object:
    spec = plan.spec
    if isinstance(spec, LexOrder):
        return tuple(entries[p][0][c] for p, c in plan.lex_key_source)
    if isinstance(spec, MaxOrder):
        top = internal[0]
        return -top if spec.descending else top
    value = float(internal)
    return -value if getattr(spec, "descending", False) else value


def stream_answers(plan: Plan, k: Optional[int] = None) -> Iterator[Answer]:
    """Ranked answers, lazily; at most k when k is given."""
    it = _raw_stream(plan)
    if k is not None:
        it = islice(it, k)
    return it


def _raw_stream(plan: Plan) -> Iterator[Answer]:
    if plan.empty:
        return
    enum = make_enumerator(plan)
    get = plan.var_source
    head = plan.head
    if isinstance(enum, LexEnumerator):
        while True:
            entries = enum.next_raw()
            if entries is None:
                return
            assignment = {v: entries[p][0][c] for v, (p, c) in get.items()}
            yield Answer(assignment, _present_weight(plan, None, entries))
    while True:
        nxt = enum.next_raw()
        if nxt is None:
            return
        prio, entries = nxt
        assignment = {v: entries[p][0][c] for v, (p, c) in get.items()}
        yield Answer(assignment, _present_weight(plan, prio, entries))


def make_enumerator(plan: Plan):
    if plan.empty:
        raise EmptyResult("query has no answers")
    if plan.route == "lex":
        return start_lex(plan.prepared)
    return start_sum(plan.prepared)


def run(
    query: ConjunctiveQuery,
    db: Database,
    spec: RankingSpec,
    tables: Optional[WeightTables] = None,
    k: Optional[int] = None,
) -> tuple[Plan, Iterator[Answer]]:
    """Plan and stream in one call."""
    plan = plan_query(query, db, spec, tables)
    return plan, stream_answers(plan, k)

"""Query and data model: relations, conjunctive queries, ranking specs, normalization.

Values are plain Python scalars (int, float, str). Every relation column holds a
single tag; a variable that binds columns of different tags is a schema error,
so the engine never compares values across tags.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import SchemaError

Value = Union[int, float, str]

#: tag names, in promotion order for CSV inference
TAG_INT, TAG_FLOAT, TAG_TEXT = "int", "float", "text"


def value_tag(v: Value) -> str:
    if isinstance(v, bool):  # bool is an int subclass; reject explicitly
        raise SchemaError(f"boolean value {v!r} is not a supported Value")
    if isinstance(v, int):
        return TAG_INT
    if isinstance(v, float):
        return TAG_FLOAT
    if isinstance(v, str):
        return TAG_TEXT
    raise SchemaError(f"unsupported value type {type(v).__name__}")


@dataclass(frozen=True)
class Const:
    """A constant term inside an atom, e.g. the 1 in R(x, 1)."""

    value: Value


Term = Union[str, Const]  # variable name or constant


@dataclass
class Relation:
    """A named set of tuples with optional per-tuple weights.

    Set semantics: duplicate rows are dropped at construction (first occurrence
    wins, including its weight).
    """

    name: str
    columns: tuple[str, ...]
    rows: list[tuple]
    weights: Optional[list[float]] = None

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise SchemaError(
                    f"relation {self.name}: row {r!r} does not match "
                    f"{len(self.columns)} columns"
                )
        if self.weights is not None and len(self.weights) != len(self.rows):
            raise SchemaError(f"relation {self.name}: weights/rows length mismatch")
        self._dedupe()

    def _dedupe(self):
        seen = set()
        rows: list[tuple] = []
        weights: Optional[list[float]] = [] if self.weights is not None else None
        for i, r in enumerate(self.rows):
            if r in seen:
                continue
            seen.add(r)
            rows.append(r)
            if weights is not None:
                weights.append(self.weights[i])
        self.rows = rows
        self.weights = weights

    @property
    def arity(self) -> int:
        return len(self.columns)

    def column_tags(self) -> tuple[Optional[str], ...]:
        """Per-column tag, or None for a column with no rows."""
        tags: list[Optional[str]] = []
        for c in range(self.arity):
            tag = None
            for r in self.rows:
                t = value_tag(r[c])
                if tag is None:
                    tag = t
                elif tag != t:
                    raise SchemaError(
                        f"relation {self.name}, column {self.columns[c]}: "
                        f"mixed tags {tag} and {t}"
                    )
            tags.append(tag)
        return tuple(tags)


@dataclass
class Database:
    relations: dict[str, Relation] = field(default_factory=dict)

    @property
    def n(self) -> int:
        """Total tuple count across relations (the input-size parameter)."""
        return sum(len(r.rows) for r in self.relations.values())

    def add(self, rel: Relation) -> None:
        self.relations[rel.name] = rel

    def __getitem__(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise SchemaError(f"unknown relation {name!r}") from None


@dataclass(frozen=True)
class Atom:
    relation: str
    terms: tuple[Term, ...]

    @property
    def variables(self) -> tuple[str, ...]:
        """Distinct variables in term order."""
        out: list[str] = []
        for t in self.terms:
            if isinstance(t, str) and t not in out:
                out.append(t)
        return tuple(out)

    def __str__(self) -> str:
        parts = []
        for t in self.terms:
            if isinstance(t, Const):
                parts.append(repr(t.value) if isinstance(t.value, str) else str(t.value))
            else:
                parts.append(t)
        return f"{self.relation}({', '.join(parts)})"


@dataclass(frozen=True)
class ConjunctiveQuery:
    name: str
    head: tuple[str, ...]
    atoms: tuple[Atom, ...]

    @property
    def body_variables(self) -> tuple[str, ...]:
        """All body variables in first-appearance order (atom order, term order)."""
        out: list[str] = []
        for a in self.atoms:
            for v in a.variables:
                if v not in out:
                    out.append(v)
        return tuple(out)

    @property
    def is_join_query(self) -> bool:
        """True when the head keeps every body variable (no projection)."""
        return set(self.head) == set(self.body_variables)

    def __str__(self) -> str:
        body = ", ".join(str(a) for a in self.atoms)
        return f"{self.name}({', '.join(self.head)}) :- {body}"


# --------------------------------------------------------------------------
# Ranking specifications


@dataclass(frozen=True)
class SumTerm:
    variable: str
    table: Optional[str] = None  # weight-table name; None = identity


@dataclass(frozen=True)
class LexOrder:
    variables: tuple[str, ...]


@dataclass(frozen=True)
class SumOrder:
    terms: tuple[SumTerm, ...]
    descending: bool = False


@dataclass(frozen=True)
class MaxOrder:
    terms: tuple[SumTerm, ...]
    descending: bool = False


@dataclass(frozen=True)
class TupleWeightOrder:
    descending: bool = False


RankingSpec = Union[LexOrder, SumOrder, MaxOrder, TupleWeightOrder]


@dataclass(frozen=True)
class Answer:
    assignment: Mapping[str, Value]
    weight: object  # float for SUM/MAX/tuple-weight; value tuple (the L key) for LEX


WeightTables = Mapping[str, Mapping[Value, float]]


def resolve_weight(
    variable: str,
    value: Value,
    table: Optional[str],
    tables: Optional[WeightTables],
) -> float:
    """Weight of one variable binding: table lookup, or identity on numerics."""
    if table is not None:
        if not tables or table not in tables:
            raise SchemaError(f"weight table {table!r} not loaded")
        try:
            return tables[table][value]
        except KeyError:
            raise SchemaError(
                f"weight table {table!r} has no entry for value {value!r} "
                f"(variable {variable})"
            ) from None
    if isinstance(value, str):
        raise SchemaError(
            f"variable {variable} ranges over text; an explicit weight table is required"
        )
    return float(value)


def answer_weight(
    assignment: Mapping[str, Value],
    spec: RankingSpec,
    tables: Optional[WeightTables] = None,
) -> object:
    """User-facing weight of one answer.

    Lex -> the comparison key (tuple of L values); Sum -> weighted sum;
    MaxAgg -> max of the per-term weights. TupleWeightOrder depends on the
    joined tuples, not the assignment alone; see tuple_weight_sum.
    """
    if isinstance(spec, LexOrder):
        return tuple(assignment[v] for v in spec.variables)
    if isinstance(spec, SumOrder):
        return sum(resolve_weight(t.variable, assignment[t.variable], t.table, tables)
                   for t in spec.terms)
    if isinstance(spec, MaxOrder):
        return max(resolve_weight(t.variable, assignment[t.variable], t.table, tables)
                   for t in spec.terms)
    raise TypeError(f"answer_weight does not apply to {type(spec).__name__}")


def tuple_weight_sum(db: Database, query: ConjunctiveQuery,
                     assignment: Mapping[str, Value]) -> float:
    """Sum of the joined tuples' own weights (TupleWeightOrder semantics)."""
    total = 0.0
    for atom in query.atoms:
        rel = db[atom.relation]
        row = tuple(
            t.value if isinstance(t, Const) else assignment[t] for t in atom.terms
        )
        if rel.weights is None:
            continue  # relations without a __weight column contribute 0
        try:
            idx = rel.rows.index(row)
        except ValueError:
            raise SchemaError(f"assignment does not match any row of {rel.name}") from None
        total += rel.weights[idx]
    return total


# --------------------------------------------------------------------------
# Normalization


def remove_self_joins(
    query: ConjunctiveQuery, db: Database
) -> tuple[ConjunctiveQuery, Database]:
    """Give every atom its own relation by logically copying repeated names.

    A name used by k > 1 atoms becomes k renamed copies (Name1..Namek); the
    copies count toward database size. Relations not referenced by the query
    are dropped. A query without self-joins comes back with identical atoms.
    """
    counts: dict[str, int] = {}
    for a in query.atoms:
        counts[a.relation] = counts.get(a.relation, 0) + 1

    taken = set(counts)
    new_atoms: list[Atom] = []
    out = Database()
    seen_ordinal: dict[str, int] = {}
    for a in query.atoms:
        src = db[a.relation]
        if counts[a.relation] == 1:
            name = a.relation
        else:
            seen_ordinal[a.relation] = seen_ordinal.get(a.relation, 0) + 1
            name = f"{a.relation}{seen_ordinal[a.relation]}"
            while name in taken:
                name += "_"
            taken.add(name)
        out.add(Relation(name, src.columns,
                         list(src.rows),
                         list(src.weights) if src.weights is not None else None))
        new_atoms.append(Atom(name, a.terms))
    return ConjunctiveQuery(query.name, query.head, tuple(new_atoms)), out


def apply_selections(
    query: ConjunctiveQuery, db: Database
) -> tuple[ConjunctiveQuery, Database]:
    """Fold constants and repeated in-atom variables into the relations.

    pre: self-joins already removed (each atom owns its relation name).
    Constants filter and drop their column; a variable repeated inside one atom
    filters for equality and keeps its first column.
    """
    new_atoms: list[Atom] = []
    out = Database()
    for atom in query.atoms:
        rel = db[atom.relation]
        if len(atom.terms) != rel.arity:
            raise SchemaError(
                f"atom {atom} has arity {len(atom.terms)} but relation "
                f"{rel.name} has arity {rel.arity}"
            )
        keep: list[int] = []
        kept_terms: list[Term] = []
        first_col: dict[str, int] = {}
        checks: list[tuple[int, Value]] = []  # column == constant
        dup_checks: list[tuple[int, int]] = []  # column == column
        for i, t in enumerate(atom.terms):
            if isinstance(t, Const):
                checks.append((i, t.value))
            elif t in first_col:
                dup_checks.append((first_col[t], i))
            else:
                first_col[t] = i
                keep.append(i)
                kept_terms.append(t)
        if not checks and not dup_checks:
            out.add(rel)
            new_atoms.append(atom)
            continue
        rows: list[tuple] = []
        weights: Optional[list[float]] = [] if rel.weights is not None else None
        for ridx, row in enumerate(rel.rows):
            if any(row[c] != v or value_tag(row[c]) != value_tag(v) for c, v in checks):
                continue
            if any(row[a] != row[b] for a, b in dup_checks):
                continue
            rows.append(tuple(row[c] for c in keep))
            if weights is not None:
                weights.append(rel.weights[ridx])
        out.add(Relation(rel.name, tuple(rel.columns[c] for c in keep), rows, weights))
        new_atoms.append(Atom(atom.relation, tuple(kept_terms)))
    return ConjunctiveQuery(query.name, query.head, tuple(new_atoms)), out


def normalize(query: ConjunctiveQuery, db: Database) -> tuple[ConjunctiveQuery, Database]:
    """remove_self_joins then apply_selections."""
    q, d = remove_self_joins(query, db)
    return apply_selections(q, d)


def validate_query(query: ConjunctiveQuery, db: Database) -> None:
    """Arity and tag checks of a query against a loaded schema."""
    var_tags: dict[str, tuple[str, str]] = {}  # var -> (tag, where-first-seen)
    for atom in query.atoms:
        rel = db[atom.relation]
        if len(atom.terms) != rel.arity:
            raise SchemaError(
                f"atom {atom} has arity {len(atom.terms)} but relation "
                f"{rel.name} has arity {rel.arity}"
            )
        tags = rel.column_tags()
        for i, t in enumerate(atom.terms):
            tag = tags[i]
            if tag is None:
                continue
            if isinstance(t, Const):
                if value_tag(t.value) != tag:
                    raise SchemaError(
                        f"constant {t.value!r} does not match {tag} column "
                        f"{rel.columns[i]} of {rel.name}"
                    )
                continue
            where = f"{rel.name}.{rel.columns[i]}"
            if t in var_tags and var_tags[t][0] != tag:
                raise SchemaError(
                    f"variable {t} binds {var_tags[t][0]} column {var_tags[t][1]} "
                    f"and {tag} column {where}"
                )
            var_tags.setdefault(t, (tag, where))
    body = set(query.body_variables)
    for v in query.head:
        if v not in body:
            raise SchemaError(f"head variable {v} does not occur in the body")


def ranking_variables(spec: RankingSpec) -> tuple[str, ...]:
    if isinstance(spec, LexOrder):
        return spec.variables
    if isinstance(spec, (SumOrder, MaxOrder)):
        return tuple(t.variable for t in spec.terms)
    return ()


def validate_ranking(query: ConjunctiveQuery, spec: RankingSpec) -> None:
    body = set(query.body_variables)
    for v in ranking_variables(spec):
        if v not in body:
            raise SchemaError(f"ORDER BY variable {v} does not occur in the body")
    if isinstance(spec, LexOrder) and len(set(spec.variables)) != len(spec.variables):
        raise SchemaError("ORDER BY LEX lists a variable twice")

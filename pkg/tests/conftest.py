import itertools

import pytest

from anykq.model import Atom, ConjunctiveQuery, Database, Relation

# Worked 4-relation instance used across the suite: two root tuples survive,
# R(0,0)/T(0,0) dangle, S(0,1) dangles but is never probed.
FIG_ROWS = {
    "R": (("A1", "A2"), [(1, 1), (2, 2), (0, 0)]),
    "S": (("A1", "A3"), [(0, 1), (1, 1), (1, 2), (2, 3), (2, 5)]),
    "T": (("A2", "A4"), [(0, 0), (1, 3), (2, 2)]),
    "U": (("A4", "A5"), [(2, 1), (2, 2), (3, 8), (3, 9)]),
}
FIG_BODY = "R(x1,x2), S(x1,x3), T(x2,x4), U(x4,x5)"


def make_db(spec: dict) -> Database:
    """spec: name -> (columns, rows[, weights])"""
    db = Database()
    for name, parts in spec.items():
        cols, rows = parts[0], parts[1]
        weights = parts[2] if len(parts) > 2 else None
        db.add(Relation(name, tuple(cols), list(rows), weights))
    return db


@pytest.fixture
def fig_db() -> Database:
    return make_db(FIG_ROWS)


@pytest.fixture
def fig_query() -> ConjunctiveQuery:
    return ConjunctiveQuery(
        "Q",
        ("x1", "x2", "x3", "x4", "x5"),
        (
            Atom("R", ("x1", "x2")),
            Atom("S", ("x1", "x3")),
            Atom("T", ("x2", "x4")),
            Atom("U", ("x4", "x5")),
        ),
    )


def naive_answers(query: ConjunctiveQuery, db: Database) -> set[tuple]:
    """Backtracking-free reference: try every combination of rows, keep the
    consistent ones. Exponential; only for tiny property-test instances."""
    out = set()
    pools = [db[a.relation].rows for a in query.atoms]
    for combo in itertools.product(*pools):
        binding: dict[str, object] = {}
        ok = True
        for atom, row in zip(query.atoms, combo):
            for term, val in zip(atom.terms, row):
                if isinstance(term, str):
                    if binding.setdefault(term, val) != val:
                        ok = False
                        break
                elif term.value != val:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.add(tuple(binding[v] for v in query.head))
    return out

"""Query-text grammar and CSV data loading.

Grammar (clauses may sit on one line or several; trailing ';' optional):

    QUERY <Name>(<vars>) :- <Rel>(<term>, ...), ... ;
    ORDER BY LEX v1, v2, ... ;
    ORDER BY SUM t1 + t2 + ... [ASC|DESC] ;
    ORDER BY MAX t1 + t2 + ... [ASC|DESC] ;
    ORDER BY TUPLEWEIGHT [ASC|DESC] ;

A SUM/MAX term is a variable `v` or `w:<tableName>(v)`. The QUERY keyword is
optional. The head accepts `..` (all body variables) and the range shorthand
`x1..x5`. Constants are numbers or quoted strings. A missing ORDER BY clause
defaults to LEX over all body variables in first-appearance order.
"""
from __future__ import annotations

import csv
import os
import re
from typing import Optional

from .errors import QuerySyntaxError, SchemaError
from .model import (
    Atom,
    ConjunctiveQuery,
    Const,
    Database,
    LexOrder,
    MaxOrder,
    RankingSpec,
    Relation,
    SumOrder,
    SumTerm,
    TupleWeightOrder,
    Value,
    WeightTables,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<entail>:-)
  | (?P<range>\.\.)
  | (?P<num>-?\d+\.\d+(?:[eE][-+]?\d+)?|-?\d+[eE][-+]?\d+|-?\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>'[^']*'|"[^"]*")
  | (?P<punct>[(),;+:])
    """,
    re.VERBOSE,
)

_RESERVED_WEIGHT = "__weight"


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"{self.kind}:{self.text!r}@{self.line}:{self.col}"


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        raw = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, raw, line, col))
        nl = raw.count("\n")
        if nl:
            line += nl
            col = len(raw) - raw.rfind("\n")
        else:
            col += len(raw)
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> _Tok:
        t = self.peek()
        if t is None:
            last = self.toks[-1] if self.toks else None
            raise QuerySyntaxError(
                "unexpected end of query",
                last.line if last else 1,
                last.col if last else 1,
            )
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise QuerySyntaxError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def accept(self, text: str) -> bool:
        t = self.peek()
        if t is not None and t.text == text:
            self.i += 1
            return True
        return False

    def keyword(self, word: str) -> bool:
        t = self.peek()
        if t is not None and t.kind == "name" and t.text.upper() == word:
            self.i += 1
            return True
        return False


def _parse_value(tok: _Tok) -> Value:
    if tok.kind == "num":
        if re.fullmatch(r"-?\d+", tok.text):
            return int(tok.text)
        return float(tok.text)
    if tok.kind == "str":
        return tok.text[1:-1]
    raise QuerySyntaxError(f"expected a constant, found {tok.text!r}", tok.line, tok.col)


def _expand_range(a: str, b: str, tok: _Tok) -> list[str]:
    # x1..x5 -> x1,x2,x3,x4,x5; shared alphabetic prefix, integer suffixes
    ma = re.fullmatch(r"([A-Za-z_]+)(\d+)", a)
    mb = re.fullmatch(r"([A-Za-z_]+)(\d+)", b)
    if not ma or not mb or ma.group(1) != mb.group(1) or int(ma.group(2)) > int(mb.group(2)):
        raise QuerySyntaxError(f"bad variable range {a}..{b}", tok.line, tok.col)
    return [f"{ma.group(1)}{i}" for i in range(int(ma.group(2)), int(mb.group(2)) + 1)]


def parse_query(text: str) -> tuple[ConjunctiveQuery, RankingSpec]:
    """Parse query text into (ConjunctiveQuery, RankingSpec)."""
    p = _Parser(_tokenize(text))
    p.keyword("QUERY")
    name_tok = p.next()
    if name_tok.kind != "name":
        raise QuerySyntaxError(
            f"expected query name, found {name_tok.text!r}", name_tok.line, name_tok.col
        )

    # Head: Q(..), Q(x1..x5) or Q(v1, v2, ...)
    p.expect("(")
    head_tokens: list = []  # "ALL" marker, range tuples, or names
    if p.accept(".."):
        head_tokens.append("..")
    else:
        while True:
            t = p.next()
            if t.kind != "name":
                raise QuerySyntaxError(
                    f"expected head variable, found {t.text!r}", t.line, t.col
                )
            nxt = p.peek()
            if nxt is not None and nxt.text == "..":
                p.next()
                t2 = p.next()
                head_tokens.append(("range", t.text, t2.text, t))
            else:
                head_tokens.append(t.text)
            if not p.accept(","):
                break
    p.expect(")")
    p.expect(":-")

    atoms: list[Atom] = []
    while True:
        rel_tok = p.next()
        if rel_tok.kind != "name":
            raise QuerySyntaxError(
                f"expected relation name, found {rel_tok.text!r}", rel_tok.line, rel_tok.col
            )
        p.expect("(")
        terms: list = []
        if not p.accept(")"):
            while True:
                t = p.next()
                if t.kind == "name":
                    terms.append(t.text)
                else:
                    terms.append(Const(_parse_value(t)))
                if not p.accept(","):
                    break
            p.expect(")")
        atoms.append(Atom(rel_tok.text, tuple(terms)))
        if not p.accept(","):
            break
    p.accept(";")

    body_vars: list[str] = []
    for a in atoms:
        for v in a.variables:
            if v not in body_vars:
                body_vars.append(v)

    head: list[str] = []
    for h in head_tokens:
        if h == "..":
            head.extend(body_vars)
        elif isinstance(h, tuple):
            head.extend(_expand_range(h[1], h[2], h[3]))
        else:
            head.append(h)

    spec = _parse_order_by(p, body_vars)
    trailing = p.peek()
    if trailing is not None:
        raise QuerySyntaxError(
            f"unexpected trailing input {trailing.text!r}", trailing.line, trailing.col
        )
    query = ConjunctiveQuery(name_tok.text, tuple(head), tuple(atoms))
    for v in query.head:
        if v not in body_vars:
            raise QuerySyntaxError(f"head variable {v} does not occur in the body")
    return query, spec


def _parse_order_by(p: _Parser, body_vars: list[str]) -> RankingSpec:
    if p.peek() is None:
        return LexOrder(tuple(body_vars))
    t = p.next()
    if t.kind != "name" or t.text.upper() != "ORDER":
        raise QuerySyntaxError(f"expected ORDER BY, found {t.text!r}", t.line, t.col)
    if not p.keyword("BY"):
        t = p.peek()
        raise QuerySyntaxError("expected BY after ORDER", t.line if t else 0, t.col if t else 0)
    kind_tok = p.next()
    kind = kind_tok.text.upper() if kind_tok.kind == "name" else ""
    if kind == "LEX":
        vars_: list[str] = []
        while True:
            v = p.next()
            if v.kind != "name":
                raise QuerySyntaxError(f"expected variable, found {v.text!r}", v.line, v.col)
            if v.text not in body_vars:
                raise QuerySyntaxError(
                    f"ORDER BY variable {v.text} does not occur in the body", v.line, v.col
                )
            vars_.append(v.text)
            if not p.accept(","):
                break
        p.accept(";")
        return LexOrder(tuple(vars_))
    if kind in ("SUM", "MAX"):
        terms: list[SumTerm] = []
        while True:
            t = p.next()
            if t.kind != "name":
                raise QuerySyntaxError(f"expected term, found {t.text!r}", t.line, t.col)
            if t.text == "w" and p.accept(":"):
                tbl = p.next()
                if tbl.kind != "name":
                    raise QuerySyntaxError(
                        f"expected weight-table name, found {tbl.text!r}", tbl.line, tbl.col
                    )
                p.expect("(")
                v = p.next()
                p.expect(")")
                term = SumTerm(v.text, tbl.text)
            else:
                term = SumTerm(t.text, None)
            if term.variable not in body_vars:
                raise QuerySyntaxError(
                    f"ORDER BY variable {term.variable} does not occur in the body",
                    t.line, t.col,
                )
            terms.append(term)
            if not p.accept("+"):
                break
        desc = _parse_direction(p)
        p.accept(";")
        cls = SumOrder if kind == "SUM" else MaxOrder
        return cls(tuple(terms), desc)
    if kind == "TUPLEWEIGHT":
        desc = _parse_direction(p)
        p.accept(";")
        return TupleWeightOrder(desc)
    raise QuerySyntaxError(
        f"expected LEX, SUM, MAX or TUPLEWEIGHT, found {kind_tok.text!r}",
        kind_tok.line, kind_tok.col,
    )


def _parse_direction(p: _Parser) -> bool:
    if p.keyword("DESC"):
        return True
    p.keyword("ASC")
    return False


# --------------------------------------------------------------------------
# CSV loading


def _infer_column(raw: list[str]) -> list[Value]:
    """int if every entry parses as int, else float if all numeric, else text."""
    try:
        return [int(s) for s in raw]
    except ValueError:
        pass
    try:
        return [float(s) for s in raw]
    except ValueError:
        pass
    return list(raw)


def load_relation_csv(path: str, name: Optional[str] = None) -> Relation:
    """Load one relation. Header row names the columns; __weight is reserved."""
    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        raw_rows = [row for row in reader if row]
    widx = header.index(_RESERVED_WEIGHT) if _RESERVED_WEIGHT in header else None
    cols = [h for i, h in enumerate(header) if i != widx]
    for row in raw_rows:
        if len(row) != len(header):
            raise SchemaError(f"{path}: row {row!r} does not match the header")
    data_cols: list[list[Value]] = []
    for i in range(len(header)):
        if i == widx:
            continue
        data_cols.append(_infer_column([row[i].strip() for row in raw_rows]))
    rows = [tuple(col[r] for col in data_cols) for r in range(len(raw_rows))]
    weights = None
    if widx is not None:
        try:
            weights = [float(row[widx]) for row in raw_rows]
        except ValueError as e:
            raise SchemaError(f"{path}: bad __weight value ({e})") from None
    return Relation(name, tuple(cols), rows, weights)


def load_weight_table_csv(path: str) -> dict[Value, float]:
    """Two-column CSV (value, weight) -> mapping. Header row optional."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise SchemaError(f"{path}: empty weight table")
    if len(rows[0]) != 2:
        raise SchemaError(f"{path}: weight table needs exactly two columns")
    start = 0
    try:
        float(rows[0][1])
    except ValueError:
        start = 1  # header row
    body = rows[start:]
    values = _infer_column([r[0].strip() for r in body])
    table: dict[Value, float] = {}
    for (raw, parsed) in zip(body, values):
        try:
            table[parsed] = float(raw[1])
        except ValueError as e:
            raise SchemaError(f"{path}: bad weight ({e})") from None
    return table


def load_database(
    data_dir: str, query: ConjunctiveQuery, spec: Optional[RankingSpec] = None
) -> tuple[Database, WeightTables]:
    """Load every relation the query references (one <name>.csv per relation)
    plus any weight tables the ranking spec names."""
    db = Database()
    for atom in query.atoms:
        if atom.relation in db.relations:
            continue
        path = os.path.join(data_dir, atom.relation + ".csv")
        if not os.path.exists(path):
            raise SchemaError(f"no data file for relation {atom.relation} ({path})")
        db.add(load_relation_csv(path, atom.relation))
    tables: dict[str, dict[Value, float]] = {}
    if spec is not None and isinstance(spec, (SumOrder, MaxOrder)):
        for term in spec.terms:
            if term.table and term.table not in tables:
                path = os.path.join(data_dir, term.table + ".csv")
                if not os.path.exists(path):
                    raise SchemaError(f"no file for weight table {term.table} ({path})")
                tables[term.table] = load_weight_table_csv(path)
    return db, tables

"""Time-to-k benchmark harness.

Compares two competitors on the same query/instance:

- ``anyk``: plan (preprocessing) + ranked enumeration; the clock starts before
  planning, so TT(k) includes preprocessing.
- ``joinfirst``: the batch baseline that materializes the full join, sorts it,
  and only then can emit the first answer.

Instances come from ``worst_case_path``: path queries whose output is a
``h x h`` cross product hidden behind single-tuple middles, padded with
dangling tuples so preprocessing still has to look at every input row.
"""
from __future__ import annotations

import random
import statistics
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .model import (
    Atom,
    ConjunctiveQuery,
    Database,
    LexOrder,
    RankingSpec,
    Relation,
    SumOrder,
    SumTerm,
)
from .pipeline import make_enumerator, plan_query
from .oracle import join_then_rank


def worst_case_path(
    atoms: int,
    n_total: int,
    join_fraction: float = 1.0,
    seed: int = 0,
    ranking: str = "sum",
) -> tuple[ConjunctiveQuery, Database, RankingSpec]:
    """Path query R1(x0,x1), ..., Rl(x_{l-1},x_l) with an output-heavy core.

    Each relation gets ``n_total // atoms`` rows. The two end relations hold
    ``h = round(per_rel * join_fraction)`` joining rows ``(i, 0)`` / ``(0, k)``;
    middle relations hold the single row ``(0, 0)``. Everything else is
    dangling filler with relation-disjoint values, so the output has exactly
    ``h * h`` answers while every relation still has ``per_rel`` rows to scan.
    """
    if atoms < 2:
        raise ValueError("need at least 2 atoms")
    per_rel = max(2, n_total // atoms)
    h = max(1, min(per_rel, round(per_rel * join_fraction)))
    rng = random.Random(seed)
    rels: dict[str, Relation] = {}
    body = []
    for p in range(atoms):
        name = f"R{p + 1}"
        body.append(Atom(name, (f"x{p}", f"x{p + 1}")))
        base = 10_000_000 * (p + 1)  # filler values never collide across atoms
        if p == 0:
            rows = [(i, 0) for i in range(h)]
        elif p == atoms - 1:
            rows = [(0, k) for k in range(h)]
        else:
            rows = [(0, 0)]
        rows += [(base + j, base + j) for j in range(per_rel - len(rows))]
        rng.shuffle(rows)
        rels[name] = Relation(name, (f"c{p}a", f"c{p}b"), rows)
    query = ConjunctiveQuery("Q", tuple(f"x{i}" for i in range(atoms + 1)), tuple(body))
    if ranking == "lex":
        spec: RankingSpec = LexOrder(query.head)
    elif ranking == "sum":
        spec = SumOrder(tuple(SumTerm(f"x{i}") for i in range(atoms + 1)))
    else:
        raise ValueError(f"unsupported ranking {ranking!r} (use 'sum' or 'lex')")
    return query, Database(relations=rels), spec


@dataclass
class BenchRun:
    """One timed run: elapsed ns at each requested k, plus the total."""

    competitor: str
    times: dict[int, int]
    produced: int
    total_ns: int


@dataclass
class BenchPoint:
    competitor: str
    n: int
    k: int
    elapsed_ns: int

    def csv_row(self) -> str:
        return f"{self.competitor},{self.n},{self.k},{self.elapsed_ns}"


def measure_ttk(
    query: ConjunctiveQuery,
    db: Database,
    spec: RankingSpec,
    ks: Sequence[int],
    competitor: str = "anyk",
    exhaust: bool = False,
) -> BenchRun:
    """Time-to-k for one run. Checkpoints past exhaustion are dropped.

    k=0 means "ready to enumerate": after preprocessing for ``anyk``, after
    the full join + sort for ``joinfirst``.
    """
    checkpoints = sorted({int(k) for k in ks if k >= 1})
    times: dict[int, int] = {}
    produced = 0
    clock = time.perf_counter_ns
    t0 = clock()
    if competitor == "anyk":
        plan = plan_query(query, db, spec)
        if 0 in ks:
            times[0] = clock() - t0
        if plan.prepared is None:
            return BenchRun(competitor, times, 0, clock() - t0)
        nxt = make_enumerator(plan).next_raw
    elif competitor == "joinfirst":
        it = iter(join_then_rank(query, db, spec))
        if 0 in ks:
            times[0] = clock() - t0
        sentinel = object()

        def nxt(_it=it, _s=sentinel):
            return None if next(_it, _s) is _s else _s
    else:
        raise ValueError(f"unknown competitor {competitor!r}")

    done = False
    for k in checkpoints:
        while produced < k:
            if nxt() is None:
                done = True
                break
            produced += 1
        if done:
            break
        times[k] = clock() - t0
    if exhaust and not done:
        while nxt() is not None:
            produced += 1
    return BenchRun(competitor, times, produced, clock() - t0)


@dataclass
class ScalingReport:
    atoms: int
    sizes: tuple[int, ...]
    ks: tuple[int, ...]
    reps: int
    join_fraction: float
    exhaust: bool
    points: list[BenchPoint] = field(default_factory=list)

    def median_ns(self, competitor: str, n: int, k: int) -> Optional[int]:
        vals = [p.elapsed_ns for p in self.points
                if p.competitor == competitor and p.n == n and p.k == k]
        return int(statistics.median(vals)) if vals else None

    def full_k(self, n: int) -> Optional[int]:
        """The exhaustive answer count recorded for size n (k of the total row)."""
        ks = [p.k for p in self.points if p.n == n and p.k not in self.ks]
        return max(ks) if ks else None

    def doubling_ratios(self, competitor: str, kind: str = "first") -> list[float]:
        """elapsed(2n)/elapsed(n) along the size ladder.

        kind="first" uses k=1 checkpoints; kind="full" uses the exhaustive
        totals (requires exhaust=True runs).
        """
        meds = []
        for n in self.sizes:
            k = 1 if kind == "first" else self.full_k(n)
            m = None if k is None else self.median_ns(competitor, n, k)
            meds.append(m)
        out = []
        for a, b in zip(meds, meds[1:]):
            if a and b:
                out.append(b / a)
        return out

    def csv_lines(self) -> list[str]:
        return ["competitor,n,k,elapsed_ns"] + [p.csv_row() for p in self.points]


def scaling_report(
    atoms: int,
    sizes: Iterable[int],
    ks: Sequence[int] = (1,),
    competitors: Sequence[str] = ("anyk", "joinfirst"),
    reps: int = 3,
    join_fraction: float = 1.0,
    seed: int = 0,
    exhaust: bool = False,
    warmup: bool = True,
    ranking: str = "sum",
) -> ScalingReport:
    """Run the TT(k) ladder; one BenchPoint per (competitor, n, k, rep).

    With exhaust=True an extra point per run records the total: its k is the
    number of answers produced.
    """
    sizes = tuple(sorted(set(int(s) for s in sizes)))
    rep_out = ScalingReport(atoms, sizes, tuple(ks), reps, join_fraction, exhaust)
    if warmup:
        q, db, spec = worst_case_path(atoms, min(256, sizes[0]), join_fraction,
                                      seed=999, ranking=ranking)
        for comp in competitors:
            measure_ttk(q, db, spec, (1,), comp, exhaust=False)
    for n in sizes:
        for r in range(reps):
            q, db, spec = worst_case_path(atoms, n, join_fraction, seed=seed + r,
                                          ranking=ranking)
            for comp in competitors:
                run = measure_ttk(q, db, spec, ks, comp, exhaust=exhaust)
                for k, ns in sorted(run.times.items()):
                    rep_out.points.append(BenchPoint(comp, n, k, ns))
                if exhaust:
                    rep_out.points.append(
                        BenchPoint(comp, n, run.produced, run.total_ns))
    return rep_out

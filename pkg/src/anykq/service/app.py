"""HTTP service exposing analysis, ranked enumeration, checking, and benchmarks.

The /run endpoint streams answers as CSV so clients see the first results
while enumeration continues; planning happens before the response starts, so
bad inputs still fail with a 400.
"""
from __future__ import annotations

import csv
import io
from typing import Iterator

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from ..bench import scaling_report
from ..errors import AnyKQError, QuerySyntaxError
from ..model import Database, LexOrder, Relation
from ..oracle import differential_check, join_then_rank
from ..parser import load_database, parse_query
from ..pipeline import Plan, plan_query, stream_answers
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    BenchRequest,
    BenchResponse,
    CheckRequest,
    CheckResponse,
    DataPayload,
    MedianRow,
    MismatchPayload,
    RunRequest,
)


def _build_inputs(query_text: str, data: DataPayload):
    query, spec = parse_query(query_text)
    if data.data_dir is not None:
        db, tables = load_database(data.data_dir, query, spec)
    else:
        db = Database()
        for r in data.relations:
            db.add(Relation(r.name, tuple(r.columns),
                            [tuple(row) for row in r.rows],
                            list(r.weights) if r.weights is not None else None))
        tables = {}
    for t in data.weight_tables:
        tables = dict(tables)
        tables[t.name] = dict(t.entries)
    return query, spec, db, tables


def _csv_line(values) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(values)
    return buf.getvalue()


def _weight_cell(weight) -> str:
    if isinstance(weight, tuple):  # lex key
        return "|".join(str(v) for v in weight)
    return repr(weight)


def _explain_lines(plan: Plan) -> list[str]:
    out = [f"# {line}" for line in plan.report.lines(plan.query)]
    out.append(f"# route: {plan.route}")
    if plan.prepared is not None:
        s = plan.prepared.stats
        for name in sorted(s.survivors):
            out.append(f"# survivors: {name} {s.survivors[name]}/{s.input_sizes[name]}")
        for (parent, child), cnt in sorted(s.group_counts.items()):
            out.append(f"# groups: {parent}->{child} {cnt}")
    else:
        out.append("# survivors: none (empty result)")
    return out


def create_app() -> FastAPI:
    app = FastAPI(title="anykq", version="0.1.0",
                  description="Ranked enumeration for acyclic join queries")

    @app.exception_handler(AnyKQError)
    async def _domain_error(request: Request, exc: AnyKQError):
        detail = {"error": type(exc).__name__, "detail": str(exc)}
        if isinstance(exc, QuerySyntaxError):
            detail["line"], detail["column"] = exc.line, exc.column
        return JSONResponse(status_code=400, content=detail)

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400,
                            content={"error": "ValueError", "detail": str(exc)})

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.post("/analyze", response_model=AnalyzeResponse)
    async def analyze_endpoint(req: AnalyzeRequest):
        from .. import analysis

        query, spec = parse_query(req.query)
        report = analysis.analyze(query, spec)
        return AnalyzeResponse(acyclic=report.acyclic,
                               free_connex=report.free_connex,
                               algorithm=report.algorithm,
                               lines=report.lines(query))

    @app.post("/run")
    async def run_endpoint(req: RunRequest):
        query, spec, db, tables = _build_inputs(req.query, req.data)
        header = list(query.head) + ["weight"]

        if req.oracle:
            answers = join_then_rank(query, db, spec, tables)
            if req.k is not None:
                answers = answers[: req.k]

            def gen_oracle() -> Iterator[str]:
                yield _csv_line(header)
                for a in answers:
                    row = [a.assignment[v] for v in query.head]
                    yield _csv_line(row + [_weight_cell(a.weight)])

            return StreamingResponse(gen_oracle(), media_type="text/csv")

        plan = plan_query(query, db, spec, tables)
        pre = _explain_lines(plan) if req.explain else []

        def gen() -> Iterator[str]:
            for line in pre:
                yield line + "\n"
            yield _csv_line(header)
            for a in stream_answers(plan, req.k):
                row = [a.assignment[v] for v in plan.query.head]
                yield _csv_line(row + [_weight_cell(a.weight)])

        return StreamingResponse(gen(), media_type="text/csv")

    @app.post("/check", response_model=CheckResponse)
    async def check_endpoint(req: CheckRequest):
        rep = differential_check(
            seeds=range(req.start, req.start + req.seeds),
            shapes=tuple(req.shapes),
            max_atoms=req.max_atoms,
            max_rows=req.max_rows,
            dangling=req.dangling,
            minimize=req.minimize,
        )
        return CheckResponse(
            ok=rep.ok,
            instances=rep.instances,
            runs=rep.runs,
            answers=rep.answers,
            frontier_violations=rep.frontier_violations,
            mismatches=[
                MismatchPayload(
                    seed=m.seed, spec_name=m.spec_name, index=m.index,
                    engine_row=repr(m.engine_row) if m.engine_row is not None else None,
                    oracle_row=repr(m.oracle_row) if m.oracle_row is not None else None,
                    instance_dump=m.instance_dump,
                )
                for m in rep.mismatches
            ],
        )

    @app.post("/bench", response_model=BenchResponse)
    async def bench_endpoint(req: BenchRequest):
        if req.shape != "path":
            raise ValueError("only path-shaped worst-case instances are built")
        rep = scaling_report(
            atoms=req.atoms, sizes=req.sizes, ks=req.ks, reps=req.reps,
            join_fraction=req.join_fraction, exhaust=req.exhaust,
            competitors=req.competitors, ranking=req.ranking,
        )
        seen = sorted({(p.competitor, p.n, p.k) for p in rep.points})
        medians = [
            MedianRow(competitor=c, n=n, k=k, median_ns=rep.median_ns(c, n, k))
            for c, n, k in seen
        ]
        return BenchResponse(csv=rep.csv_lines(), medians=medians)

    return app


app = create_app()

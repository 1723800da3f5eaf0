"""Command-line client for the ranked-enumeration service.

Every subcommand talks HTTP to the service; by default an in-process instance
(no socket), or a remote server via --server. The transport is async-only, so
each command drives one asyncio.run call.
"""
from __future__ import annotations

import asyncio
import json
import os
import sys
from typing import Optional

import click
import httpx


def _client(server: Optional[str]) -> httpx.AsyncClient:
    if server:
        return httpx.AsyncClient(base_url=server, timeout=None)
    from .service.app import app

    return httpx.AsyncClient(transport=httpx.ASGITransport(app=app),
                             base_url="http://anykq.local", timeout=None)


def _resolve_query(query: str) -> str:
    """Literal query text, @path, or a bare path to an existing file."""
    if query.startswith("@"):
        with open(query[1:]) as fh:
            return fh.read()
    if os.path.isfile(query):
        with open(query) as fh:
            return fh.read()
    return query


def _fail(payload) -> None:
    if isinstance(payload, bytes):
        payload = payload.decode("utf-8", "replace")
    try:
        data = json.loads(payload) if isinstance(payload, str) else payload
        msg = f"{data.get('error', 'error')}: {data.get('detail', payload)}"
    except (ValueError, AttributeError):
        msg = str(payload)
    click.echo(f"error: {msg}", err=True)
    sys.exit(1)


async def _post_json(server: Optional[str], path: str, payload: dict) -> dict:
    async with _client(server) as client:
        resp = await client.post(path, json=payload)
        if resp.status_code != 200:
            _fail(resp.text)
        return resp.json()


def parse_sizes(text: str) -> list[int]:
    """Size list: '4096,8192', '2^12..2^15' (doubling), or '1000..8000'."""
    def one(tok: str) -> int:
        tok = tok.strip()
        if tok.startswith("2^"):
            return 2 ** int(tok[2:])
        return int(tok)

    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = one(lo_s), one(hi_s)
        out = []
        while lo <= hi:
            out.append(lo)
            lo *= 2
        return out
    return [one(t) for t in text.split(",") if t.strip()]


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL (default: run in-process).")
@click.pass_context
def main(ctx, server):
    """Ranked enumeration over acyclic join queries."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.argument("query")
@click.pass_context
def analyze(ctx, query):
    """Report structure and algorithm selection for QUERY (or @file)."""
    body = {"query": _resolve_query(query)}
    data = asyncio.run(_post_json(ctx.obj["server"], "/analyze", body))
    for line in data["lines"]:
        click.echo(line)


@main.command()
@click.argument("query", required=False)
@click.option("--query", "query_opt", default=None, metavar="FILE_OR_TEXT",
              help="Query file (or literal text) instead of the argument.")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True),
              help="Directory with <relation>.csv files.")
@click.option("-k", "--k", "k", type=int, default=None, help="Stop after k answers.")
@click.option("--explain", is_flag=True, help="Prefix '#' plan/statistics lines.")
@click.option("--oracle", is_flag=True,
              help="Serve from the join-then-rank baseline instead.")
@click.pass_context
def run(ctx, query, query_opt, data_dir, k, explain, oracle):
    """Stream ranked answers of QUERY (or @file) as CSV."""
    if (query is None) == (query_opt is None):
        raise click.UsageError("pass the query as the argument or via --query")
    payload = {
        "query": _resolve_query(query if query is not None else query_opt),
        "data": {"data_dir": data_dir},
        "k": k,
        "explain": explain,
        "oracle": oracle,
    }

    async def go():
        async with _client(ctx.obj["server"]) as client:
            async with client.stream("POST", "/run", json=payload) as resp:
                if resp.status_code != 200:
                    _fail(await resp.aread())
                async for line in resp.aiter_lines():
                    print(line, flush=True)

    asyncio.run(go())


@main.command()
@click.option("--seeds", default=100, show_default=True, help="Number of instances.")
@click.option("--start", default=0, show_default=True, help="First seed.")
@click.option("--seed-range", default=None, metavar="A..B",
              help="Inclusive seed range; overrides --seeds/--start.")
@click.option("--shapes", default="path,star,tree", show_default=True)
@click.option("--max-atoms", default=5, show_default=True)
@click.option("--max-rows", default=100, show_default=True)
@click.option("--dangling", default=0.15, show_default=True)
@click.option("--minimize/--no-minimize", default=True,
              help="Shrink the first failing instance before reporting.")
@click.pass_context
def check(ctx, seeds, start, seed_range, shapes, max_atoms, max_rows, dangling,
          minimize):
    """Differential check: engine vs join-then-rank on random instances."""
    if seed_range is not None:
        lo, hi = (int(t) for t in seed_range.split("..", 1))
        start, seeds = lo, hi - lo + 1
    payload = {
        "seeds": seeds, "start": start,
        "shapes": [s.strip() for s in shapes.split(",") if s.strip()],
        "max_atoms": max_atoms, "max_rows": max_rows,
        "dangling": dangling, "minimize": minimize,
    }
    data = asyncio.run(_post_json(ctx.obj["server"], "/check", payload))
    click.echo(f"instances: {data['instances']}  runs: {data['runs']}  "
               f"answers: {data['answers']}  "
               f"frontier_violations: {data['frontier_violations']}  "
               f"mismatches: {len(data['mismatches'])}")
    if data["ok"]:
        click.echo("OK")
        return
    m = data["mismatches"][0]
    click.echo(f"FIRST MISMATCH seed={m['seed']} spec={m['spec_name']} "
               f"index={m['index']}", err=True)
    click.echo(f"  engine: {m['engine_row']}", err=True)
    click.echo(f"  oracle: {m['oracle_row']}", err=True)
    if m["instance_dump"]:
        click.echo("  minimized instance:", err=True)
        for line in m["instance_dump"].splitlines():
            click.echo(f"    {line}", err=True)
    sys.exit(1)


@main.command()
@click.option("--shape", default="path", show_default=True,
              type=click.Choice(["path"]), help="Worst-case instance family.")
@click.option("--atoms", default=3, show_default=True)
@click.option("--n", "--sizes", "sizes", default="2^12..2^15", show_default=True,
              help="Total input sizes, e.g. '2^12..2^15' or '4096,8192'.")
@click.option("--spec", "ranking", default="sum", show_default=True,
              type=click.Choice(["sum", "lex"]), help="Ranking used for TT(k).")
@click.option("--ks", default="1", show_default=True, help="TT(k) checkpoints.")
@click.option("--reps", default=3, show_default=True)
@click.option("--join-fraction", default=1.0, show_default=True)
@click.option("--exhaust", is_flag=True, help="Also time full enumeration.")
@click.option("--out", type=click.Path(), default=None,
              help="Write raw points as CSV.")
@click.pass_context
def bench(ctx, shape, atoms, sizes, ranking, ks, reps, join_fraction, exhaust, out):
    """Time-to-k scaling ladder: any-k engine vs join-then-rank."""
    payload = {
        "shape": shape,
        "atoms": atoms,
        "sizes": parse_sizes(sizes),
        "ranking": ranking,
        "ks": [int(t) for t in ks.split(",") if t.strip()],
        "reps": reps,
        "join_fraction": join_fraction,
        "exhaust": exhaust,
    }
    data = asyncio.run(_post_json(ctx.obj["server"], "/bench", payload))
    click.echo("competitor      n        k    median_ms")
    for row in data["medians"]:
        click.echo(f"{row['competitor']:<10} {row['n']:>8} {row['k']:>8} "
                   f"{row['median_ns'] / 1e6:>12.3f}")
    if out:
        with open(out, "w") as fh:
            fh.write("\n".join(data["csv"]) + "\n")
        click.echo(f"wrote {out}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()

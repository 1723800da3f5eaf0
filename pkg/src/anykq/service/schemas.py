"""Request/response models for the HTTP service."""
from __future__ import annotations

from typing import Optional, Union

from pydantic import BaseModel, Field, model_validator

Value = Union[int, float, str]


class RelationPayload(BaseModel):
    name: str
    columns: list[str]
    rows: list[list[Value]]
    weights: Optional[list[float]] = None


class WeightTablePayload(BaseModel):
    """Per-value weight table, referenced from SUM/MAX terms as w:<name>(var)."""

    name: str
    entries: list[tuple[Value, float]]


class DataPayload(BaseModel):
    """Either a server-side directory of CSV files or inline relations."""

    data_dir: Optional[str] = None
    relations: Optional[list[RelationPayload]] = None
    weight_tables: list[WeightTablePayload] = Field(default_factory=list)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.data_dir is None) == (self.relations is None):
            raise ValueError("provide exactly one of data_dir or relations")
        return self


class AnalyzeRequest(BaseModel):
    query: str


class AnalyzeResponse(BaseModel):
    acyclic: bool
    free_connex: bool
    algorithm: str
    lines: list[str]


class RunRequest(BaseModel):
    query: str
    data: DataPayload
    k: Optional[int] = Field(default=None, ge=1)
    explain: bool = False
    oracle: bool = False  # serve from the join-then-rank baseline instead


class CheckRequest(BaseModel):
    seeds: int = Field(default=100, ge=1)
    start: int = 0
    shapes: list[str] = Field(default_factory=lambda: ["path", "star", "tree"])
    max_atoms: int = Field(default=5, ge=2)
    max_rows: int = Field(default=100, ge=2)
    dangling: float = Field(default=0.15, ge=0.0, le=1.0)
    minimize: bool = True


class MismatchPayload(BaseModel):
    seed: int
    spec_name: str
    index: int
    engine_row: Optional[str] = None
    oracle_row: Optional[str] = None
    instance_dump: str = ""


class CheckResponse(BaseModel):
    ok: bool
    instances: int
    runs: int
    answers: int
    frontier_violations: int
    mismatches: list[MismatchPayload]


class BenchRequest(BaseModel):
    shape: str = "path"  # worst-case instance family; path is the only one
    atoms: int = Field(default=3, ge=2)
    sizes: list[int]
    ks: list[int] = Field(default_factory=lambda: [1])
    reps: int = Field(default=3, ge=1)
    join_fraction: float = Field(default=1.0, gt=0.0, le=1.0)
    exhaust: bool = False
    ranking: str = "sum"  # 'sum' or 'lex'
    competitors: list[str] = Field(default_factory=lambda: ["anyk", "joinfirst"])


class MedianRow(BaseModel):
    competitor: str
    n: int
    k: int
    median_ns: int


class BenchResponse(BaseModel):
    csv: list[str]
    medians: list[MedianRow]

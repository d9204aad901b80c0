import csv
import io
import math
from enum import Enum
from typing import Dict, List, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# Enums
class Problem(str, Enum):
    MAXCUT = "maxcut"
    CC = "cc"


class GraphKind(str, Enum):
    GRAPH = "graph"
    SIGNED = "signed"


class StreamOrder(str, Enum):
    SORTED = "sorted"
    SHUFFLED = "shuffled"
    INSERT_DELETE_MIX = "insert-delete-mix"


class Strategy(str, Enum):
    A = "A"
    B = "B"


class EstimateMode(str, Enum):
    EXHAUSTIVE = "exhaustive"
    SAMPLED = "sampled"


class SolverKind(str, Enum):
    EXACT = "exact"
    LOCAL_SEARCH = "local-search"
    EST = "est"


class Pipeline(str, Enum):
    OFFLINE = "offline"
    STREAMING = "streaming"


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class KeepRule(str, Enum):
    RESCALED = "rescaled"
    LOG = "log"


class SamplerBackend(str, Enum):
    SKETCH = "sketch"
    RESERVOIR = "reservoir"


# Parameter models
class ImportanceParams(BaseModel):
    """Parameters of the importance score; alpha_eps is derived"""

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(gt=0, lt=1)
    c_const: float = Field(default=1.0, gt=0)
    problem: Problem = Problem.MAXCUT
    n: int = Field(ge=2)
    delta: float = Field(gt=0)
    # CC variant: divide the eps*Delta floor by k
    floor_divisor: int = Field(default=1, ge=1)

    @property
    def alpha_eps(self) -> float:
        from app.services.common import log

        power = 4 if self.problem == Problem.MAXCUT else 8
        return self.epsilon ** power / (self.c_const * log(self.n))

    @property
    def floor(self) -> float:
        return self.epsilon * self.delta / self.floor_divisor

    @property
    def heavy_threshold(self) -> float:
        """Degree at which the score saturates at 1"""
        return self.delta ** 2 * self.alpha_eps


# Response / report models
class EstimateResult(BaseModel):
    value: float
    best_partition: List[int]
    seed_ids: List[int]
    partitions_evaluated: int
    mode: EstimateMode
    rng_seed: int
    problem: Problem = Problem.MAXCUT

    @model_validator(mode="after")
    def _partition_matches_seed(self):
        if len(self.best_partition) != len(self.seed_ids):
            raise ValueError("best_partition must label every seed vertex")
        return self


class SolutionRecord(BaseModel):
    assignment: List[int]
    value: float
    solver: str
    seed: Optional[int] = None


class CoresetMetadata(BaseModel):
    problem: Problem
    n_original: int
    original_ids: List[int]
    probabilities: List[float]
    delta: float
    epsilon: Optional[float] = None
    rng_seed: Optional[int] = None
    edge_sampled: bool = False
    keep_rule: Optional[KeepRule] = None

    @model_validator(mode="after")
    def _aligned(self):
        if len(self.original_ids) != len(self.probabilities):
            raise ValueError("original_ids and probabilities differ in length")
        return self


class StreamReport(BaseModel):
    problem: Problem
    solver: SolverKind
    value: float
    coreset_vertices: int
    coreset_edges: int
    low_count: int
    mid_count: int
    high_count: int
    sampler_backend: SamplerBackend
    space: Dict[str, int]
    rng_seed: int

    @property
    def stored_items(self) -> int:
        return self.space.get("peak_stored_items", 0)


# Experiment configuration and reports
class ExperimentConfig(BaseModel):
    problem: Problem = Problem.MAXCUT
    n: int = Field(default=256, ge=2)
    delta_exp: float = Field(default=0.5, gt=0, le=1)
    epsilon: float = Field(default=0.25, gt=0, lt=1)
    c_const: float = Field(default=1.0, gt=0)
    trials: int = Field(default=1, ge=1)
    rng_seed: int = Field(default=0, ge=0)
    pipeline: Pipeline = Pipeline.OFFLINE
    solver: SolverKind = SolverKind.LOCAL_SEARCH
    restarts: int = Field(default=20, ge=1)
    clusters: int = Field(default=2, ge=1)
    noise: float = Field(default=0.1, ge=0, le=1)
    stream_order: StreamOrder = StreamOrder.SHUFFLED
    edge_sampling: bool = True
    workers: int = Field(default=1, ge=1)
    output: Optional[str] = None

    @field_validator("output", mode="before")
    @classmethod
    def _blank_output(cls, value):
        if value in ("", "None"):
            return None
        return value

    def to_text(self) -> str:
        """Flat key=value form; floats written with repr so they round-trip"""
        lines = []
        for key, value in self.model_dump(mode="json").items():
            if value is None:
                value = ""
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        values = dotenv_values(stream=io.StringIO(text))
        unknown = set(values) - set(cls.model_fields)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in values.items() if v is not None})


class ExperimentRow(BaseModel):
    trial: int
    seed: int
    coreset_vertices: int
    coreset_edges: int
    baseline_value: float
    pipeline_value: float
    ratio: float
    stored_items: int


class TrialTiming(BaseModel):
    trial: int
    baseline_seconds: float
    pipeline_seconds: float


class ExperimentAggregate(BaseModel):
    mean_ratio: float
    min_ratio: float
    trials: int


class ExperimentReport(BaseModel):
    config: ExperimentConfig
    rows: List[ExperimentRow]
    timings: List[TrialTiming] = []
    aggregate: ExperimentAggregate

    @staticmethod
    def aggregate_rows(rows: List[ExperimentRow]) -> ExperimentAggregate:
        ratios = [row.ratio for row in rows]
        if not ratios:
            return ExperimentAggregate(mean_ratio=math.nan, min_ratio=math.nan, trials=0)
        return ExperimentAggregate(
            mean_ratio=sum(ratios) / len(ratios),
            min_ratio=min(ratios),
            trials=len(ratios),
        )

    def rows_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            data = row.model_dump()
            writer.writerow([repr(data[c]) if isinstance(data[c], float) else data[c] for c in CSV_COLUMNS])
        return buffer.getvalue()


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""


CSV_COLUMNS = [
    "trial",
    "seed",
    "coreset_vertices",
    "coreset_edges",
    "baseline_value",
    "pipeline_value",
    "ratio",
    "stored_items",
]


# Request models (HTTP API)
class GraphPayload(BaseModel):
    kind: GraphKind = GraphKind.GRAPH
    n: int = Field(ge=1)
    # [u, v, w] for plain graphs, [u, v, c_plus, c_minus] for signed ones
    edges: List[List[float]] = []


class RandomGraphRequest(BaseModel):
    n: int = Field(ge=2)
    delta_exp: float
    rng_seed: int = 0


class PlantedCCRequest(BaseModel):
    n: int = Field(ge=1)
    k: int = Field(ge=1)
    noise: float = Field(default=0.0, ge=0, le=1)
    rng_seed: int = 0


class CoresetRequest(BaseModel):
    graph: GraphPayload
    epsilon: float = Field(default=0.25, gt=0, lt=1)
    c_const: float = Field(default=1.0, gt=0)
    rng_seed: int = 0
    edge_sampling: bool = True


class EstimateRequest(BaseModel):
    graph: GraphPayload
    gamma: Optional[List[float]] = None
    epsilon: float = Field(default=0.25, gt=0, lt=1)
    mode: EstimateMode = EstimateMode.EXHAUSTIVE
    samples: int = Field(default=64, ge=1)
    k: int = Field(default=2, ge=1)
    rng_seed: int = 0


class SolveRequest(BaseModel):
    graph: GraphPayload
    solver: SolverKind = SolverKind.EXACT
    restarts: int = Field(default=20, ge=1)
    k: int = Field(default=2, ge=1)
    rng_seed: int = 0


class StreamRunRequest(BaseModel):
    graph: GraphPayload
    order: StreamOrder = StreamOrder.SHUFFLED
    epsilon: float = Field(default=0.25, gt=0, lt=1)
    c_const: float = Field(default=1.0, gt=0)
    solver: SolverKind = SolverKind.LOCAL_SEARCH
    k: int = Field(default=2, ge=1)
    rng_seed: int = 0


class CoresetResponse(BaseModel):
    graph: GraphPayload
    metadata: CoresetMetadata

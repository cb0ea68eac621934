"""Pydantic request/response models for the service endpoints."""

from typing import List, Optional

from pydantic import BaseModel, Field


class GenRequest(BaseModel):
    kind: str
    out_path: str
    seed: int = 0
    count: int = 1000
    n_pos: int = 200
    n_neg: int = 200
    mnist_images: Optional[str] = None
    mnist_labels: Optional[str] = None
    background_dir: Optional[str] = None
    noise_std: float = 3.0
    cluster_mean: float = 3.0
    cluster_std: float = 1.0
    signal_dims: int = 10
    dim: int = 30


class GenResponse(BaseModel):
    out_path: str
    n_pos: int
    n_neg: int
    d: int


class FitRequest(BaseModel):
    data_path: str
    method: str
    contrast: float
    k: int
    out_model_path: str
    center: bool = False
    ridge: float = 0.0
    normalize: str = "none"
    label_column: Optional[str] = None
    tag_column: Optional[str] = None
    drop_columns: List[str] = Field(default_factory=list)
    projections_out: Optional[str] = None


class FitResponse(BaseModel):
    out_model_path: str
    d: int
    k: int
    n_pos: int
    n_neg: int
    values: List[float]
    dropped_rows: int = 0
    lda_accuracy: Optional[float] = None
    sym_kl: Optional[float] = None
    projections_out: Optional[str] = None


class StreamRequest(BaseModel):
    data_path: str
    beta: float
    k: int
    eta: float
    tau: float = 1.0
    epochs: int = 1
    seeds: List[int] = Field(default_factory=lambda: [0])
    oracle_model_path: Optional[str] = None
    out_report_path: str = "stream.csv"
    record_every: int = 200
    normalize: str = "none"
    label_column: Optional[str] = None
    tag_column: Optional[str] = None
    drop_columns: List[str] = Field(default_factory=list)
    max_workers: Optional[int] = None


class StreamResponse(BaseModel):
    out_report_path: str
    seeds: List[int]
    final_alignments: List[Optional[float]]
    mean_final_alignment: Optional[float] = None
    std_final_alignment: Optional[float] = None
    steps: int = 0
    warning: Optional[str] = None


class SweepRequest(BaseModel):
    data_path: str
    method: str
    grid_spec: str
    k: int
    metric: str
    threshold: float = 0.9
    out_json: str = "report.json"
    out_csv: str = "report.csv"
    center: bool = False
    normalize: str = "none"
    label_column: Optional[str] = None
    tag_column: Optional[str] = None
    drop_columns: List[str] = Field(default_factory=list)
    max_workers: Optional[int] = None


class SweepResponse(BaseModel):
    out_json: str
    out_csv: str
    metric: str
    method: str
    threshold: float
    good_range_width: float
    grid_points: int


class EvalRequest(BaseModel):
    model_a: str
    model_b: Optional[str] = None
    data_path: Optional[str] = None
    normalize: str = "none"
    label_column: Optional[str] = None
    tag_column: Optional[str] = None
    drop_columns: List[str] = Field(default_factory=list)


class EvalResponse(BaseModel):
    metric_name: str
    d: int
    k: int
    alignment: Optional[float] = None
    lda_accuracy: Optional[float] = None
    sym_kl: Optional[float] = None


class PlotRequest(BaseModel):
    input_path: str
    out_svg_path: str
    kind: str
    threshold: Optional[float] = None


class PlotResponse(BaseModel):
    out_svg_path: str
    kind: str


class SessionCreateRequest(BaseModel):
    d: int
    k: int
    beta: float
    eta: float
    tau: float = 1.0
    seed: int = 0
    lr_decay: bool = False


class SessionInfo(BaseModel):
    session_id: str
    d: int
    k: int
    beta: float
    eta: float
    tau: float
    t: int
    p: float


class SampleIn(BaseModel):
    x: List[float]
    delta: int


class FeedRequest(BaseModel):
    samples: List[SampleIn]


class FeedResponse(BaseModel):
    session_id: str
    t: int
    p: float
    last_z: List[float]


class SubspaceResponse(BaseModel):
    method: str
    contrast: float
    d: int
    k: int
    values: List[float]
    basis: List[List[float]]


class HealthResponse(BaseModel):
    status: str
    version: str

"""Request/response models for the HTTP service."""

from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field

Label = Union[int, str]  # class id, or "outlier"


class Box(BaseModel):
    x: int
    y: int
    w: int = Field(gt=0)
    h: int = Field(gt=0)


class TableModel(BaseModel):
    box: Box
    method: str
    confidence: float


class EntryModel(BaseModel):
    class_id: int
    row_start: int
    row_end: int
    symbol_png: Optional[str] = None  # audit path when the run audited
    name_png: Optional[str] = None


class DetectionModel(BaseModel):
    box: Box
    confidence: float
    source: str


class OutcomeModel(BaseModel):
    box: Box
    label: Label
    best_score: float
    scores: List[Tuple[int, float]]


class ReportModel(BaseModel):
    image_id: str
    image_size: Tuple[int, int]
    table: TableModel
    entries: List[EntryModel]
    detections: List[DetectionModel]
    outcomes: List[OutcomeModel]
    counts: Dict[int, int]
    outliers: int
    timings: Dict[str, float] = {}


class EvalRowModel(BaseModel):
    image_id: str
    present: int
    detected: int
    detected_correct: int
    classified_correct: int


class Annotation(BaseModel):
    x: int
    y: int
    w: int = Field(gt=0)
    h: int = Field(gt=0)
    label: Label


class RunRequest(BaseModel):
    image_png: str  # base64 PNG, grayscale
    image_id: str = "image"
    config: Optional[dict] = None
    detections: Optional[dict] = None  # detection sidecar document
    embeddings: Optional[dict] = None  # embedding sidecar document


class ExtractTableRequest(BaseModel):
    image_png: str
    image_id: str = "image"
    config: Optional[dict] = None
    detections: Optional[dict] = None


class ExtractTableResponse(BaseModel):
    table: Optional[TableModel] = None


class ParseTableRequest(BaseModel):
    table_png: str  # base64 PNG of the cropped table
    config: Optional[dict] = None


class ParsedEntry(BaseModel):
    class_id: int
    row_start: int
    row_end: int
    symbol_png: str  # base64 PNG crops
    name_png: str


class ParseTableResponse(BaseModel):
    entries: List[ParsedEntry]


class DetectRequest(BaseModel):
    image_png: str
    config: Optional[dict] = None
    table_box: Optional[Box] = None  # excluded region, e.g. the legend


class DetectResponse(BaseModel):
    detections: List[DetectionModel]


class MatchRequest(BaseModel):
    query_png: str
    template_png: str
    config: Optional[dict] = None


class MatchResponse(BaseModel):
    s: float
    n: int
    m: int
    score_mode: str


class FixtureRequest(BaseModel):
    seed: int = 0
    classes: int = 6
    instances: int = 30
    outliers: int = 0
    heading_rows: int = 1
    lines: int = 6
    noise: int = 120
    height: int = 2400
    width: int = 2800
    symbol_side: str = "left"


class FixtureResponse(BaseModel):
    image_png: str  # base64 PNG
    ground_truth: dict  # ground truth sidecar document
    key: dict  # answer key: classes, table box, anchor


class EvaluateRequest(BaseModel):
    report: ReportModel
    annotations: List[Annotation]
    iou: float = 0.5


class HealthResponse(BaseModel):
    status: str
    version: str

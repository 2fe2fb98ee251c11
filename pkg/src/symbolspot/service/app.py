"""FastAPI application exposing the pipeline stages.

Every endpoint is stateless: the image rides in the request as a
base64 PNG and tunables ride in an optional config object, so one
server can serve unrelated jobs. Errors map to 400 for bad input
documents and 404 for images where a stage legitimately found nothing.
"""

import base64
import binascii
import json

import cv2
import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__, detect, fixtures, legend_parse, match, pipeline, sidecar
from ..config import ConfigError, PipelineConfig, config_from_dict
from ..pipeline import Report, TableNotFound
from . import schemas


def decode_png(b64: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise HTTPException(400, f"image is not valid base64: {exc}")
    img = cv2.imdecode(np.frombuffer(raw, np.uint8), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise HTTPException(400, "payload does not decode as an image")
    return img


def encode_png(img: np.ndarray) -> str:
    ok, buf = cv2.imencode(".png", img)
    if not ok:
        raise HTTPException(500, "could not encode image")
    return base64.b64encode(buf.tobytes()).decode("ascii")


def _config(doc, default: PipelineConfig) -> PipelineConfig:
    if doc is None:
        return default
    try:
        return config_from_dict(doc)
    except ConfigError as exc:
        raise HTTPException(400, f"invalid config: {exc}")


def _box(b: schemas.Box) -> pipeline.BBox:
    return pipeline.BBox(b.x, b.y, b.w, b.h)


def create_app(default_config: PipelineConfig = PipelineConfig()) -> FastAPI:
    app = FastAPI(title="symbolspot", version=__version__)

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/pipeline/run", response_model=schemas.ReportModel)
    def run(req: schemas.RunRequest):
        img = decode_png(req.image_png)
        cfg = _config(req.config, default_config)
        try:
            report = pipeline.run_pipeline(
                img, cfg, image_id=req.image_id, detection_doc=req.detections, embedding_doc=req.embeddings
            )
        except TableNotFound as exc:
            raise HTTPException(404, str(exc))
        except legend_parse.EmptyTable as exc:
            raise HTTPException(404, f"legend-parser: {exc}")
        except sidecar.SidecarError as exc:
            raise HTTPException(400, str(exc))
        return report.to_dict()

    @app.post("/legend/extract-table", response_model=schemas.ExtractTableResponse)
    def extract_table(req: schemas.ExtractTableRequest):
        img = decode_png(req.image_png)
        cfg = _config(req.config, default_config)
        try:
            table = pipeline.locate_table(img, cfg, req.image_id, detection_doc=req.detections)
        except sidecar.SidecarError as exc:
            raise HTTPException(400, str(exc))
        if table is None:
            return {"table": None}
        return {
            "table": {
                "box": {"x": table.box.x, "y": table.box.y, "w": table.box.w, "h": table.box.h},
                "method": table.method,
                "confidence": table.confidence,
            }
        }

    @app.post("/legend/parse-table", response_model=schemas.ParseTableResponse)
    def parse_table(req: schemas.ParseTableRequest):
        img = decode_png(req.table_png)
        cfg = _config(req.config, default_config)
        try:
            entries = legend_parse.parse_table(
                img,
                threshold=cfg.threshold,
                black_fraction=cfg.stray_fraction,
                white_mean_min=cfg.white_mean_min,
            )
        except legend_parse.EmptyTable as exc:
            raise HTTPException(404, f"legend-parser: {exc}")
        return {
            "entries": [
                {
                    "class_id": e.class_id,
                    "row_start": e.source_row.start,
                    "row_end": e.source_row.end,
                    "symbol_png": encode_png(e.symbol),
                    "name_png": encode_png(e.name_img),
                }
                for e in entries
            ]
        }

    @app.post("/symbols/detect", response_model=schemas.DetectResponse)
    def detect_symbols(req: schemas.DetectRequest):
        img = decode_png(req.image_png)
        cfg = _config(req.config, default_config)
        table_box = _box(req.table_box) if req.table_box else None
        dets = detect.detect_symbols_classical(
            img,
            table_box=table_box,
            cfg=cfg.detector,
            threshold=cfg.threshold,
            kernel_divisor=cfg.kernel_divisor,
        )
        dets = detect.nms(dets, cfg.detector.nms_iou)
        return {
            "detections": [
                {
                    "box": {"x": d.box.x, "y": d.box.y, "w": d.box.w, "h": d.box.h},
                    "confidence": d.confidence,
                    "source": d.source,
                }
                for d in dets
            ]
        }

    @app.post("/symbols/match", response_model=schemas.MatchResponse)
    def match_crops(req: schemas.MatchRequest):
        q = decode_png(req.query_png)
        t = decode_png(req.template_png)
        cfg = _config(req.config, default_config)
        mcfg = cfg.match_config()
        score = match.similarity(match.tighten_to_ink(q), match.tighten_to_ink(t), mcfg)
        return {"s": score.s, "n": score.stats.n, "m": score.stats.m, "score_mode": mcfg.score_mode}

    @app.post("/fixtures/generate", response_model=schemas.FixtureResponse)
    def generate(req: schemas.FixtureRequest):
        try:
            spec = fixtures.FixtureSpec(
                n_classes=req.classes,
                n_instances=req.instances,
                n_outliers=req.outliers,
                heading_rows=req.heading_rows,
                n_lines=req.lines,
                n_noise=req.noise,
                height=req.height,
                width=req.width,
                symbol_side=req.symbol_side,
            )
            fx = fixtures.generate_fixture(spec, req.seed)
        except (ValueError, RuntimeError) as exc:
            raise HTTPException(400, str(exc))
        image_id = f"fixture-{req.seed}"
        gt = json.loads(sidecar.serialize_ground_truth(pipeline.fixture_ground_truth(fx, image_id)))
        key = {
            "image_id": image_id,
            "seed": fx.seed,
            "table_box": {"x": fx.table_box.x, "y": fx.table_box.y, "w": fx.table_box.w, "h": fx.table_box.h},
            "classes": [
                {"class_id": e.class_id, "glyph": e.glyph_key, "name": e.name_text} for e in fx.entries
            ],
        }
        return {"image_png": encode_png(fx.image), "ground_truth": gt, "key": key}

    @app.post("/evaluate", response_model=schemas.EvalRowModel)
    def evaluate(req: schemas.EvaluateRequest):
        report = Report.from_dict(req.report.model_dump())
        anns = [a.model_dump() for a in req.annotations]
        try:
            row = pipeline.evaluate(report, anns, req.iou)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return {
            "image_id": row.image_id,
            "present": row.present,
            "detected": row.detected,
            "detected_correct": row.detected_correct,
            "classified_correct": row.classified_correct,
        }

    return app


app = create_app()

"""End-to-end orchestration: drawing in, classified symbol counts out.

The stages run in a fixed order: locate the legend table, parse it into
templates, detect symbol candidates over the sheet, classify each crop
against the templates, count. Each stage can be fed from a sidecar file
instead of (or on top of) the built-in classical method, and the whole
run is captured in a serializable Report. The evaluation harness scores
a Report against ground truth boxes with greedy IoU matching.
"""

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import detect, legend_locate, legend_parse, match, raster, sidecar
from .config import PipelineConfig
from .fixtures import locate_words_builtin
from .raster import BBox

log = logging.getLogger(__name__)


class TableNotFound(ValueError):
    """No legend table candidate survived the locator stage."""


@dataclass(frozen=True)
class EntryRecord:
    """Report view of one parsed legend row."""

    class_id: int
    row_start: int
    row_end: int
    symbol_png: str = None  # audit path, relative to the audit dir
    name_png: str = None


@dataclass(frozen=True)
class OutcomeRecord:
    box: BBox
    label: object  # class id int, or "outlier"
    best_score: float
    scores: tuple  # (class_id, score) per template


@dataclass
class Report:
    image_id: str
    image_size: tuple  # (height, width)
    table: legend_locate.TableDetection
    entries: list
    detections: list  # detect.Detection
    outcomes: list  # OutcomeRecord
    counts: dict  # class_id -> count
    outliers: int
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = True):
        doc = {
            "image_id": self.image_id,
            "image_size": [int(v) for v in self.image_size],
            "table": {
                "box": _box_dict(self.table.box),
                "method": self.table.method,
                "confidence": float(self.table.confidence),
            },
            "entries": [
                {
                    "class_id": e.class_id,
                    "row_start": e.row_start,
                    "row_end": e.row_end,
                    "symbol_png": e.symbol_png,
                    "name_png": e.name_png,
                }
                for e in self.entries
            ],
            "detections": [
                {"box": _box_dict(d.box), "confidence": float(d.confidence), "source": d.source}
                for d in self.detections
            ],
            "outcomes": [
                {
                    "box": _box_dict(o.box),
                    "label": o.label,
                    "best_score": float(o.best_score),
                    "scores": [[int(c), float(s)] for c, s in o.scores],
                }
                for o in self.outcomes
            ],
            "counts": {str(k): int(v) for k, v in self.counts.items()},
            "outliers": int(self.outliers),
        }
        if include_timings:
            doc["timings"] = {k: float(v) for k, v in self.timings.items()}
        return doc

    @classmethod
    def from_dict(cls, doc):
        table = legend_locate.TableDetection(
            _dict_box(doc["table"]["box"]), doc["table"]["method"], float(doc["table"]["confidence"])
        )
        entries = [
            EntryRecord(e["class_id"], e["row_start"], e["row_end"], e["symbol_png"], e["name_png"])
            for e in doc["entries"]
        ]
        detections = [
            detect.Detection(_dict_box(d["box"]), float(d["confidence"]), d["source"])
            for d in doc["detections"]
        ]
        outcomes = [
            OutcomeRecord(
                _dict_box(o["box"]),
                o["label"],
                float(o["best_score"]),
                tuple((int(c), float(s)) for c, s in o["scores"]),
            )
            for o in doc["outcomes"]
        ]
        return cls(
            image_id=doc["image_id"],
            image_size=tuple(doc["image_size"]),
            table=table,
            entries=entries,
            detections=detections,
            outcomes=outcomes,
            counts={int(k): int(v) for k, v in doc["counts"].items()},
            outliers=int(doc["outliers"]),
            timings=dict(doc.get("timings", {})),
        )


@dataclass(frozen=True)
class EvalRow:
    """One evaluation line: detection and classification tallies."""

    image_id: str
    present: int
    detected: int
    detected_correct: int
    classified_correct: int

    def __post_init__(self):
        if min(self.present, self.detected, self.detected_correct, self.classified_correct) < 0:
            raise ValueError("counts must be non-negative")
        if self.detected_correct > min(self.present, self.detected):
            raise ValueError("detected_correct exceeds present or detected")
        if self.classified_correct > self.detected:
            raise ValueError("classified_correct exceeds detected")


def _box_dict(b: BBox):
    return {"x": int(b.x), "y": int(b.y), "w": int(b.w), "h": int(b.h)}


def _dict_box(d) -> BBox:
    return BBox(int(d["x"]), int(d["y"]), int(d["w"]), int(d["h"]))


def _locate_stage(img, cfg, image_id, words, detection_doc):
    candidates = []
    if cfg.use_classical_table:
        if words is None:
            words = locate_words_builtin(img, vocabulary=cfg.anchor_words)
        for anchor in cfg.anchor_words:
            det = legend_locate.extract_table_classical(
                img, words, threshold=cfg.threshold, kernel_divisor=cfg.kernel_divisor, anchor=anchor
            )
            if det is not None:
                candidates.append(det)
    if detection_doc is not None:
        candidates.extend(legend_locate.ingest_table_detections(detection_doc, image_id, img.shape))
    return legend_locate.select_table(candidates)


def locate_table(image, cfg: PipelineConfig = PipelineConfig(), image_id: str = "image", words=None, detection_doc=None):
    """Locator stage alone: the selected table candidate, or None."""
    return _locate_stage(image, cfg, image_id, words, detection_doc)


def _detect_stage(img, cfg, image_id, table_box, detection_doc):
    dets = []
    if cfg.use_classical_detector:
        dets.extend(
            detect.detect_symbols_classical(
                img,
                table_box=table_box,
                cfg=cfg.detector,
                threshold=cfg.threshold,
                kernel_divisor=cfg.kernel_divisor,
            )
        )
    if detection_doc is not None:
        dets.extend(detect.ingest_symbol_detections(detection_doc, image_id, img.shape))
    # legend templates are not detections, whichever source proposed them
    dets = [d for d in dets if not d.box.intersects(table_box)]
    return detect.nms(dets, cfg.detector.nms_iou)


def _template_embeddings(embedding_doc, class_ids):
    """(query lookup, template list) when the sidecar covers every class."""
    if embedding_doc is None:
        return None, None
    _, vectors = sidecar.parse_embedding_sidecar(embedding_doc)
    templates = []
    for cid in class_ids:
        vec = vectors.get(f"tpl:{cid}")
        if vec is None:
            log.warning("embedding sidecar lacks tpl:%d; falling back to keypoint matching", cid)
            return None, None
        templates.append((cid, vec))
    return vectors, templates


def _classify_stage(img, cfg, entries, dets, embedding_doc):
    mcfg = cfg.match_config()
    templates = [(e.class_id, match.tighten_to_ink(e.symbol)) for e in entries]
    tpl_features = [match.extract_features(t, mcfg) for _, t in templates]
    vectors, tpl_embs = _template_embeddings(embedding_doc, [cid for cid, _ in templates])

    outcomes = []
    for i, det in enumerate(dets):
        vec = vectors.get(f"det:{i}") if vectors is not None else None
        if tpl_embs is not None and vec is not None:
            # distances are recorded negated so that larger is better,
            # same as the keypoint scores
            label = match.classify_by_embedding(vec, tpl_embs)
            q = np.asarray(vec, np.float64)
            scores = tuple(
                (cid, -float(np.linalg.norm(q - np.asarray(emb, np.float64)))) for cid, emb in tpl_embs
            )
            best = max(s for _, s in scores)
            outcomes.append(OutcomeRecord(det.box, label, best, scores))
        else:
            crop = match.tighten_to_ink(raster.crop(img, det.box))
            out = match.classify(crop, templates, outlier_tau=mcfg.outlier_tau, cfg=mcfg, template_features=tpl_features)
            outcomes.append(OutcomeRecord(det.box, out.label, out.best_score, out.per_template_scores))
    return outcomes


def _write_audit(audit_dir, image_id, img, cfg, table_box, entries, outcomes, records):
    base = Path(audit_dir) / image_id
    base.mkdir(parents=True, exist_ok=True)
    tcrop = raster.crop(img, table_box)
    raster.save_png(base / "table.png", tcrop)
    cleaned = legend_parse.remove_stray_lines(
        raster.auto_invert(raster.binarize(tcrop, cfg.threshold)), cfg.stray_fraction
    )
    out_records = []
    for e, rec in zip(entries, records):
        names = {
            "row": f"{image_id}/row_{e.class_id:02d}.png",
            "symbol": f"{image_id}/sym_{e.class_id:02d}.png",
            "name": f"{image_id}/name_{e.class_id:02d}.png",
        }
        raster.save_png(Path(audit_dir) / names["row"], cleaned[e.source_row.start : e.source_row.end])
        raster.save_png(Path(audit_dir) / names["symbol"], e.symbol)
        raster.save_png(Path(audit_dir) / names["name"], e.name_img)
        out_records.append(replace(rec, symbol_png=names["symbol"], name_png=names["name"]))
    labelled = [(table_box, "table", 0)]
    for i, o in enumerate(outcomes):
        raster.save_png(base / f"det_{i:03d}.png", raster.crop(img, o.box))
        color = len(entries) if o.label == match.OUTLIER else int(o.label)
        labelled.append((o.box, str(o.label), 1 + color))
    raster.save_png(base / "overlay.png", raster.render_overlay(img, labelled))
    return out_records


def run_pipeline(
    image,
    cfg: PipelineConfig = PipelineConfig(),
    image_id: str = None,
    words=None,
    detection_doc=None,
    embedding_doc=None,
    audit_dir=None,
) -> Report:
    """Run every stage on one drawing and assemble the Report.

    image may be a path or a grayscale array. words, when given, skip
    the built-in word finder (e.g. boxes from an OCR run). Sidecar
    documents contribute table/symbol candidates and embeddings; the
    embedding ids det:<i> refer to positions in the final detection
    order. With audit_dir set, every intermediate crop is written
    beneath it.
    """
    if isinstance(image, (str, Path)):
        if image_id is None:
            image_id = Path(image).stem
        image = raster.load_png(image)
    elif image_id is None:
        image_id = "image"
    if image.ndim != 2:
        raise ValueError("expected a single-channel grayscale image")

    timings = {}
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    table = _locate_stage(image, cfg, image_id, words, detection_doc)
    timings["locate"] = time.perf_counter() - t0
    if table is None:
        raise TableNotFound(f"legend-locator: no table found in '{image_id}'")

    t0 = time.perf_counter()
    entries = legend_parse.parse_table(
        raster.crop(image, table.box),
        threshold=cfg.threshold,
        black_fraction=cfg.stray_fraction,
        white_mean_min=cfg.white_mean_min,
    )
    timings["parse"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    dets = _detect_stage(image, cfg, image_id, table.box, detection_doc)
    timings["detect"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    outcomes = _classify_stage(image, cfg, entries, dets, embedding_doc)
    timings["classify"] = time.perf_counter() - t0

    counts = {}
    outliers = 0
    for o in outcomes:
        if o.label == match.OUTLIER:
            outliers += 1
        else:
            counts[o.label] = counts.get(o.label, 0) + 1

    records = [EntryRecord(e.class_id, e.source_row.start, e.source_row.end) for e in entries]
    if audit_dir is not None:
        records = _write_audit(audit_dir, image_id, image, cfg, table.box, entries, outcomes, records)

    timings["total"] = time.perf_counter() - t_start
    return Report(
        image_id=image_id,
        image_size=tuple(int(v) for v in image.shape),
        table=table,
        entries=records,
        detections=dets,
        outcomes=outcomes,
        counts=counts,
        outliers=outliers,
        timings=timings,
    )


def run_batch(paths, cfg: PipelineConfig = PipelineConfig(), jobs: int = 1, **kwargs):
    """Run the pipeline over many images; reports come back sorted by id."""

    def one(path):
        return run_pipeline(path, cfg, **kwargs)

    if jobs <= 1:
        reports = [one(p) for p in paths]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(one, paths))
    return sorted(reports, key=lambda r: r.image_id)


def _as_annotation(ann):
    if isinstance(ann, dict):
        return BBox(ann["x"], ann["y"], ann["w"], ann["h"]), ann["label"]
    box, label = ann
    return box, label


def evaluate(report: Report, annotations, iou_threshold: float = 0.5) -> EvalRow:
    """Score a report against ground truth boxes.

    Detections and ground truth are matched greedily by descending IoU,
    one-to-one, at the given threshold. A detection counts as correctly
    classified when its matched box carries the same label, or when it
    matched nothing and the classifier called it an outlier.
    """
    gt = [_as_annotation(a) for a in annotations]
    outcomes = report.outcomes

    pairs = []
    for i, o in enumerate(outcomes):
        for j, (box, _) in enumerate(gt):
            v = detect.iou(o.box, box)
            if v >= iou_threshold:
                pairs.append((-v, i, j))
    pairs.sort()
    det_match = {}
    gt_used = set()
    for neg_iou, i, j in pairs:
        if i in det_match or j in gt_used:
            continue
        det_match[i] = j
        gt_used.add(j)

    classified = 0
    for i, o in enumerate(outcomes):
        if i in det_match:
            if gt[det_match[i]][1] == o.label:
                classified += 1
        elif o.label == match.OUTLIER:
            classified += 1

    return EvalRow(
        image_id=report.image_id,
        present=len(gt),
        detected=len(outcomes),
        detected_correct=len(det_match),
        classified_correct=classified,
    )


CSV_HEADER = ("image_id", "present", "detected", "detected_correct", "classified_correct")


def emit_report_json(report: Report, path=None, include_timings: bool = True):
    """Serialize a Report; counts are re-derived from outcomes first."""
    counts = {}
    outliers = 0
    for o in report.outcomes:
        if o.label == match.OUTLIER:
            outliers += 1
        else:
            counts[o.label] = counts.get(o.label, 0) + 1
    if counts != report.counts or outliers != report.outliers:
        raise ValueError("report counts are inconsistent with its outcomes")
    text = json.dumps(report.to_dict(include_timings=include_timings), indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text


def emit_eval_csv(rows, path):
    """Write EvalRows sorted by image id plus a Total row of column sums."""
    rows = sorted(rows, key=lambda r: r.image_id)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([r.image_id, r.present, r.detected, r.detected_correct, r.classified_correct])
        writer.writerow(
            [
                "Total",
                sum(r.present for r in rows),
                sum(r.detected for r in rows),
                sum(r.detected_correct for r in rows),
                sum(r.classified_correct for r in rows),
            ]
        )


def emit_report(payload, format: str, path):
    """json: one Report document. csv: an EvalRow table with a Total line."""
    if format == "json":
        emit_report_json(payload, path)
    elif format == "csv":
        emit_eval_csv(payload, path)
    else:
        raise ValueError(f"unknown report format: {format}")


def fixture_ground_truth(fx, image_id: str):
    """Ground-truth annotation mapping for a generated fixture."""
    anns = [
        {"x": box.x, "y": box.y, "w": box.w, "h": box.h, "label": label}
        for box, label in fx.instances
    ]
    return {image_id: anns}

"""Candidate symbol localization across the full drawing.

The classical route removes long ruling and wiring lines, then groups the
leftover ink into connected components and merges neighbouring fragments
back into symbol-sized boxes. The external route ingests detections from
a sidecar file.
"""

from dataclasses import dataclass

import numpy as np

from . import raster, sidecar
from .raster import BBox


@dataclass(frozen=True)
class Detection:
    box: BBox
    confidence: float
    source: str  # "classical" or "external"


@dataclass(frozen=True)
class DetectorConfig:
    min_area: int = 25
    max_area_fraction: float = 0.05
    merge_gap: int = 3
    aspect_max: float = 8.0
    nms_iou: float = 0.5

    def __post_init__(self):
        if self.min_area < 1:
            raise ValueError("min_area must be >= 1")
        if not 0 < self.max_area_fraction <= 1:
            raise ValueError("max_area_fraction must be in (0, 1]")
        if not 0 <= self.nms_iou < 1:
            raise ValueError("nms_iou must be in [0, 1)")


# Variant tuned for single legend-row crops: a symbol there is large
# relative to the crop and roughly square, while rendered words are wide
# and flat, so a tight aspect cap separates the two.
ROW_DETECTOR = DetectorConfig(min_area=100, max_area_fraction=1.0, merge_gap=3, aspect_max=3.0)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ix = max(0, min(a.x2, b.x2) - max(a.x, b.x))
    iy = max(0, min(a.y2, b.y2) - max(a.y, b.y))
    inter = ix * iy
    if inter == 0:
        return 0.0
    return inter / (a.area + b.area - inter)


def _box_gap(a: BBox, b: BBox) -> int:
    """Chebyshev gap between two boxes; 0 if they touch or overlap."""
    dx = max(a.x - b.x2, b.x - a.x2, 0)
    dy = max(a.y - b.y2, b.y - a.y2, 0)
    return max(dx, dy)


def _merge_components(comps, merge_gap: int):
    """Union-find grouping of components whose boxes sit within merge_gap px."""
    n = len(comps)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if _box_gap(comps[i][0], comps[j][0]) <= merge_gap:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    merged = []
    for members in groups.values():
        box = comps[members[0]][0]
        ink = 0
        for i in members:
            box = box.union(comps[i][0])
            ink += comps[i][1]
        merged.append((box, ink))
    merged.sort(key=lambda c: (c[0].y, c[0].x, c[0].w, c[0].h))
    return merged


def detect_symbols_classical(
    img: np.ndarray,
    table_box=None,
    cfg: DetectorConfig = DetectorConfig(),
    threshold: int = raster.DEFAULT_THRESHOLD,
    kernel_divisor: int = raster.KERNEL_DIVISOR,
    iterations: int = 1,
    subtract_lines: bool = True,
):
    """Line-subtraction plus connected-component symbol proposals.

    Long straight strokes are removed first so wiring does not glue
    symbols together; nearby fragments are then merged back and filtered
    by ink area, box area and aspect ratio. Boxes touching table_box are
    dropped because legend templates are not detections.
    """
    binary = raster.auto_invert(raster.binarize(img, threshold))
    h, w = binary.shape
    work = binary
    if subtract_lines:
        horiz, vert = raster.make_line_kernels(w, h, kernel_divisor)
        hl, vl = raster.detect_lines(binary, horiz, vert, iterations)
        lines = raster.combine_lines(hl, vl)
        work = np.where(lines == raster.INK, raster.BACKGROUND, binary).astype(np.uint8)

    comps = raster.connected_components(work)
    merged = _merge_components(comps, cfg.merge_gap)

    max_box_area = cfg.max_area_fraction * w * h
    out = []
    for box, ink in merged:
        if ink < cfg.min_area:
            continue
        if box.area > max_box_area:
            continue
        if max(box.w, box.h) / min(box.w, box.h) > cfg.aspect_max:
            continue
        if table_box is not None and box.intersects(table_box):
            continue
        density = ink / box.area
        out.append(Detection(box, min(1.0, 2.0 * density), "classical"))
    return out


def ingest_symbol_detections(doc, image_id: str, image_size=None):
    """Detections of kind 'symbol' for one image from a sidecar document."""
    parsed = sidecar.parse_detection_sidecar(doc)
    out = []
    for rec in parsed.get(image_id, []):
        if rec["kind"] != "symbol":
            continue
        box = BBox(rec["x"], rec["y"], rec["w"], rec["h"])
        if image_size is not None:
            box = box.clamped(image_size[1], image_size[0])
        out.append(Detection(box, rec["confidence"], "external"))
    return out


def nms(dets, iou_threshold: float):
    """Greedy non-maximum suppression, highest confidence first."""
    ordered = sorted(dets, key=lambda d: (-d.confidence, d.box.y, d.box.x))
    kept = []
    for det in ordered:
        if all(iou(det.box, k.box) <= iou_threshold for k in kept):
            kept.append(det)
    return kept

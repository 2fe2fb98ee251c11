"""Finding the legend table region in a drawing.

The classical route anchors on the word "LEGEND": detect ruling lines,
collect rectangles, find the cell containing the word and crop the
parent rectangle around it. External detections can stand in when a
drawing defeats the classical method.
"""

import string
from dataclasses import dataclass

import numpy as np

from . import raster, sidecar
from .raster import BBox

DEFAULT_ANCHOR = "LEGEND"

METHOD_CLASSICAL = "classical-anchor"
METHOD_EXTERNAL = "external"


@dataclass(frozen=True)
class WordBox:
    text: str
    box: BBox
    confidence: float


@dataclass(frozen=True)
class TableDetection:
    box: BBox
    method: str
    confidence: float


def normalize_word(text: str) -> str:
    return text.strip(string.punctuation + string.whitespace).casefold()


def locate_anchor_word(words, anchor: str = DEFAULT_ANCHOR, exact: bool = False):
    """Best word matching the anchor after case folding and punctuation stripping.

    Prefix matches count by default so "LEGENDS" and "LEGEND:" anchor
    too. Returns the highest-confidence hit, position-ordered on ties.
    """
    target = normalize_word(anchor)
    hits = []
    for wb in words:
        norm = normalize_word(wb.text)
        if norm == target or (not exact and norm.startswith(target)):
            hits.append(wb)
    if not hits:
        return None
    return min(hits, key=lambda wb: (-wb.confidence, wb.box.y, wb.box.x))


def enclosing_table(rects, anchor: BBox):
    """Parent rectangle of the cell containing the anchor box.

    The cell is the smallest rectangle fully containing the anchor; the
    parent is the smallest rectangle strictly containing that cell. A
    cell with no parent is returned as is.
    """
    containing = [r for r in rects if r.contains(anchor)]
    if not containing:
        return None
    cell = min(containing, key=lambda r: (r.area, r.y, r.x))
    parents = [r for r in rects if r.contains(cell) and r != cell]
    if not parents:
        return cell
    return min(parents, key=lambda r: (r.area, r.y, r.x))


def extract_table_classical(
    img: np.ndarray,
    words,
    threshold: int = raster.DEFAULT_THRESHOLD,
    kernel_divisor: int = raster.KERNEL_DIVISOR,
    iterations: int = 1,
    anchor: str = DEFAULT_ANCHOR,
    exact: bool = False,
    min_rect_area: int = raster.MIN_RECT_AREA,
):
    """Word-anchored table extraction; None when any stage comes up empty."""
    word = locate_anchor_word(words, anchor, exact)
    if word is None:
        return None
    binary = raster.auto_invert(raster.binarize(img, threshold))
    h, w = binary.shape
    horiz, vert = raster.make_line_kernels(w, h, kernel_divisor)
    hlines, vlines = raster.detect_lines(binary, horiz, vert, iterations)
    rects = raster.find_rectangles(raster.combine_lines(hlines, vlines), min_rect_area)
    if not rects:
        return None
    box = enclosing_table(rects, word.box)
    if box is None:
        return None
    return TableDetection(box, METHOD_CLASSICAL, 1.0)


def ingest_table_detections(doc, image_id: str, image_size=None):
    """Detections of kind 'table' for one image from a sidecar document."""
    parsed = sidecar.parse_detection_sidecar(doc)
    out = []
    for rec in parsed.get(image_id, []):
        if rec["kind"] != "table":
            continue
        box = BBox(rec["x"], rec["y"], rec["w"], rec["h"])
        if image_size is not None:
            box = box.clamped(image_size[1], image_size[0])
        out.append(TableDetection(box, METHOD_EXTERNAL, rec["confidence"]))
    return out


def select_table(candidates):
    """Deterministic pick: confidence, then area, then top-left position."""
    if not candidates:
        return None
    return min(candidates, key=lambda t: (-t.confidence, -t.box.area, t.box.y, t.box.x))

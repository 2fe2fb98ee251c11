"""Parsing a cropped legend table into symbol/name template pairs.

Borders are whitened, rows are cut at white gaps, heading rows without
symbols are discarded and each remaining row is segregated into its
symbol crop and name crop.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import detect, raster
from .raster import BBox

log = logging.getLogger(__name__)

STRAY_FRACTION = 0.9
WHITE_MEAN_MIN = 250
MIN_ROW_HEIGHT = 4

DIR_LTR = "left-to-right"
DIR_RTL = "right-to-left"


class RowNotSplittable(ValueError):
    """Row has fewer than two column spans; degenerate and skipped."""


class EmptyTable(ValueError):
    """No usable symbol rows survived parsing."""


@dataclass(frozen=True)
class Span:
    start: int
    end: int  # exclusive
    axis: str  # "row" or "column"

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad span [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class LegendEntry:
    class_id: int
    symbol: np.ndarray
    name_img: np.ndarray
    name_text: Optional[str]
    source_row: Span


def remove_stray_lines(img: np.ndarray, black_fraction: float = STRAY_FRACTION) -> np.ndarray:
    """Whiten every row and column whose ink share exceeds black_fraction.

    Both scans are evaluated against the original image in one pass, so a
    row qualifying does not stop its columns from qualifying too.
    """
    if not 0 < black_fraction < 1:
        raise ValueError("black_fraction must be in (0, 1)")
    ink = img == raster.INK
    h, w = ink.shape
    rows = ink.sum(axis=1) / w > black_fraction
    cols = ink.sum(axis=0) / h > black_fraction
    out = img.copy()
    out[rows, :] = raster.BACKGROUND
    out[:, cols] = raster.BACKGROUND
    return out


def scan_spans(img: np.ndarray, axis: str = "row", white_mean_min: int = WHITE_MEAN_MIN):
    """Maximal runs of non-white lines along the chosen axis.

    A line is white when its mean intensity is at least white_mean_min,
    which tolerates a little salt noise.
    """
    if axis == "row":
        means = img.mean(axis=1)
    elif axis == "column":
        means = img.mean(axis=0)
    else:
        raise ValueError(f"axis must be 'row' or 'column', got {axis!r}")
    nonwhite = means < white_mean_min
    spans = []
    start = None
    for i, flag in enumerate(nonwhite):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            spans.append(Span(start, i, axis))
            start = None
    if start is not None:
        spans.append(Span(start, len(nonwhite), axis))
    return spans


def default_symbol_finder(cfg: detect.DetectorConfig = detect.ROW_DETECTOR):
    """Predicate telling whether a row crop contains a symbol-sized blob.

    Runs the classical detector without line subtraction; row crops have
    already had their ruling removed.
    """

    def finder(img: np.ndarray) -> bool:
        return bool(detect.detect_symbols_classical(img, cfg=cfg, subtract_lines=False))

    return finder


def drop_heading_rows(rows, symbol_finder):
    """Drop the longest prefix of rows in which no symbol is detected."""
    for i, (_, row_img) in enumerate(rows):
        if symbol_finder(row_img):
            return list(rows[i:])
    return []


def split_row(row: np.ndarray, symbol_finder, white_mean_min: int = WHITE_MEAN_MIN):
    """Cut a row into its symbol box and name box.

    Scanning is left-to-right by default; when the leftmost column span
    holds no symbol, scanning flips and the rightmost span becomes the
    symbol. The name box is the union of all remaining spans. Both boxes
    take the row's full height.
    """
    spans = scan_spans(row, "column", white_mean_min)
    if len(spans) < 2:
        raise RowNotSplittable(f"{len(spans)} column span(s)")
    height = row.shape[0]

    first = spans[0]
    first_crop = row[:, first.start : first.end]
    if symbol_finder(first_crop):
        symbol_span, rest, direction = first, spans[1:], DIR_LTR
    else:
        symbol_span, rest, direction = spans[-1], spans[:-1], DIR_RTL

    symbol = BBox(symbol_span.start, 0, symbol_span.length, height)
    name = BBox(rest[0].start, 0, rest[-1].end - rest[0].start, height)
    return symbol, name, direction


def parse_table(
    table: np.ndarray,
    symbol_finder=None,
    threshold: int = raster.DEFAULT_THRESHOLD,
    black_fraction: float = STRAY_FRACTION,
    white_mean_min: int = WHITE_MEAN_MIN,
    min_row_height: int = MIN_ROW_HEIGHT,
):
    """Full table parse: rows in table order become LegendEntry values.

    Rows that cannot be split are skipped with a warning. Raises
    EmptyTable when nothing survives.
    """
    if symbol_finder is None:
        symbol_finder = default_symbol_finder()
    binary = raster.auto_invert(raster.binarize(table, threshold))
    cleaned = remove_stray_lines(binary, black_fraction)

    row_spans = [s for s in scan_spans(cleaned, "row", white_mean_min) if s.length >= min_row_height]
    rows = [(s, cleaned[s.start : s.end, :]) for s in row_spans]
    rows = drop_heading_rows(rows, symbol_finder)

    entries = []
    for span, row_img in rows:
        try:
            symbol_box, name_box, _ = split_row(row_img, symbol_finder, white_mean_min)
        except RowNotSplittable as exc:
            log.warning("skipping row [%d, %d): %s", span.start, span.end, exc)
            continue
        entries.append(
            LegendEntry(
                class_id=len(entries),
                symbol=raster.crop(row_img, symbol_box),
                name_img=raster.crop(row_img, name_box),
                name_text=None,
                source_row=span,
            )
        )
    if not entries:
        raise EmptyTable("no symbol rows found")
    return entries

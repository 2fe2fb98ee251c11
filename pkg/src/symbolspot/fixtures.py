"""Synthetic engineering-drawing fixtures with exact ground truth.

Generates white-background line drawings containing a bordered legend
table, stamped symbol instances, distractor ruling lines, and salt
noise. Every placement is driven by a seeded generator, so a (spec,
seed) pair reproduces the image byte for byte. The module also carries
the bitmap font used for table text and a template-matching word
locator for the anchor word, which stands in for OCR on fixtures.
"""

import string
from dataclasses import dataclass, field

import cv2
import numpy as np

from . import raster
from .legend_locate import WordBox
from .match import OUTLIER
from .raster import BBox

GLYPH_SIZE = 72

# 5x7 bitmap font, uppercase plus digits
_FONT = {
    "A": ("01110", "10001", "10001", "11111", "10001", "10001", "10001"),
    "B": ("11110", "10001", "10001", "11110", "10001", "10001", "11110"),
    "C": ("01110", "10001", "10000", "10000", "10000", "10001", "01110"),
    "D": ("11110", "10001", "10001", "10001", "10001", "10001", "11110"),
    "E": ("11111", "10000", "10000", "11110", "10000", "10000", "11111"),
    "F": ("11111", "10000", "10000", "11110", "10000", "10000", "10000"),
    "G": ("01110", "10001", "10000", "10111", "10001", "10001", "01111"),
    "H": ("10001", "10001", "10001", "11111", "10001", "10001", "10001"),
    "I": ("11111", "00100", "00100", "00100", "00100", "00100", "11111"),
    "J": ("00111", "00010", "00010", "00010", "00010", "10010", "01100"),
    "K": ("10001", "10010", "10100", "11000", "10100", "10010", "10001"),
    "L": ("10000", "10000", "10000", "10000", "10000", "10000", "11111"),
    "M": ("10001", "11011", "10101", "10101", "10001", "10001", "10001"),
    "N": ("10001", "11001", "10101", "10011", "10001", "10001", "10001"),
    "O": ("01110", "10001", "10001", "10001", "10001", "10001", "01110"),
    "P": ("11110", "10001", "10001", "11110", "10000", "10000", "10000"),
    "Q": ("01110", "10001", "10001", "10001", "10101", "10010", "01101"),
    "R": ("11110", "10001", "10001", "11110", "10100", "10010", "10001"),
    "S": ("01111", "10000", "10000", "01110", "00001", "00001", "11110"),
    "T": ("11111", "00100", "00100", "00100", "00100", "00100", "00100"),
    "U": ("10001", "10001", "10001", "10001", "10001", "10001", "01110"),
    "V": ("10001", "10001", "10001", "10001", "10001", "01010", "00100"),
    "W": ("10001", "10001", "10001", "10101", "10101", "11011", "10001"),
    "X": ("10001", "01010", "00100", "00100", "00100", "01010", "10001"),
    "Y": ("10001", "01010", "00100", "00100", "00100", "00100", "00100"),
    "Z": ("11111", "00001", "00010", "00100", "01000", "10000", "11111"),
    "0": ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    "1": ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    "2": ("01110", "10001", "00001", "00110", "01000", "10000", "11111"),
    "3": ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    "4": ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    "5": ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    "6": ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    "7": ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    "8": ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    "9": ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}

FONT_H = 7
FONT_W = 5

# Table text shown for each glyph. Kept to words of four or more
# letters so rendered words never pass the row detector's aspect gate.
DISPLAY_NAMES = {
    "alarm": "ALARM",
    "antenna": "ANTENNA",
    "breaker": "BREAKER",
    "camera": "CAMERA",
    "fan": "BLOWER",
    "filter": "FILTER",
    "gauge": "GAUGE",
    "heater": "HEATER",
    "lamp": "LAMP",
    "motor": "MOTOR",
    "pump": "PUMP",
    "sensor": "SENSOR",
    "speaker": "SPEAKER",
    "switch": "SWITCH",
    "tank": "TANK",
    "valve": "VALVE",
}

HEADING_WORDS = (("SYMBOL", "NAME"), ("MARK", "DESCRIPTION"))

ANCHOR_WORD = "LEGEND"


def _canvas(h, w):
    return np.full((h, w), raster.BACKGROUND, np.uint8)


def build_glyphs():
    """16 line-art glyphs on 72x72 canvases, keyed by name.

    Each glyph is built from its own motif vocabulary and deliberately
    avoids three things: axis-aligned ink runs long enough to read as
    ruling lines, exact local symmetries (which produce duplicate
    descriptors), and gaps in its row or column ink projection (which
    would split table rows or symbol spans). Pointy stroke tips get a
    3 px serif so no column of a glyph holds a single lonely pixel,
    which a column-mean scan would read as white.
    """
    S = GLYPH_SIZE
    out = {}

    g = _canvas(S, S)  # two scalene open triangles nose to nose, left one larger
    cv2.polylines(g, [np.array([[4, 16], [16, 58], [35, 38]])], True, 0, 3)
    cv2.polylines(g, [np.array([[66, 20], [60, 54], [37, 36]])], True, 0, 3)
    out["valve"] = g

    g = _canvas(S, S)  # ring with gap at one o'clock, chevron pointing southwest
    cv2.ellipse(g, (36, 36), (16, 16), 0, 75, 340, 0, 3)
    cv2.polylines(g, [np.array([[44, 28], [26, 36], [40, 48]])], False, 0, 3)
    out["pump"] = g

    g = _canvas(S, S)  # X with one solid dot tip and one open ring tip
    cv2.line(g, (16, 12), (58, 60), 0, 3)
    cv2.line(g, (60, 16), (14, 56), 0, 3)
    cv2.circle(g, (16, 12), 6, 0, -1)
    cv2.circle(g, (60, 60), 5, 0, 2)
    cv2.line(g, (10, 11), (10, 13), 0, 1)
    out["lamp"] = g

    g = _canvas(S, S)  # scalene triangle, offset solid dot
    cv2.polylines(g, [np.array([[32, 8], [64, 46], [12, 60]])], True, 0, 3)
    cv2.circle(g, (40, 40), 6, 0, -1)
    out["sensor"] = g

    g = _canvas(S, S)  # ring with gap at eight o'clock, inner zigzag leaning right
    cv2.ellipse(g, (36, 36), (20, 20), 0, 160, 480, 0, 3)
    cv2.polylines(g, [np.array([[26, 44], [30, 26], [40, 46], [48, 28]])], False, 0, 3)
    out["motor"] = g

    g = _canvas(S, S)  # diamond with one clipped corner, off-center small ring
    cv2.polylines(g, [np.array([[36, 6], [66, 36], [36, 66], [10, 42], [16, 24]])], True, 0, 3)
    cv2.circle(g, (40, 32), 7, 0, 2)
    cv2.line(g, (68, 35), (68, 37), 0, 1)
    out["alarm"] = g

    g = _canvas(S, S)  # tilted box and flare horn
    cv2.polylines(g, [np.array([[8, 30], [24, 24], [28, 46], [12, 52]])], True, 0, 3)
    cv2.polylines(g, [np.array([[26, 28], [54, 10], [64, 58], [28, 44]])], True, 0, 3)
    out["speaker"] = g

    g = _canvas(S, S)  # lever between solid pivot and open contact, shallow arc base
    cv2.circle(g, (14, 52), 6, 0, -1)
    cv2.line(g, (18, 48), (54, 14), 0, 3)
    cv2.circle(g, (58, 46), 5, 0, 2)
    cv2.ellipse(g, (36, 66), (20, 14), 0, 205, 335, 0, 3)
    cv2.line(g, (8, 51), (8, 53), 0, 1)
    out["switch"] = g

    g = _canvas(S, S)  # lopsided V over short mast and gapped ring
    cv2.polylines(g, [np.array([[14, 6], [36, 26], [60, 12]])], False, 0, 3)
    cv2.line(g, (36, 28), (36, 34), 0, 3)
    cv2.ellipse(g, (36, 50), (13, 13), 0, -55, 230, 0, 3)
    cv2.line(g, (12, 5), (12, 7), 0, 1)
    cv2.line(g, (62, 11), (62, 13), 0, 1)
    out["antenna"] = g

    g = _canvas(S, S)  # irregular zigzag wave with solid square tail
    cv2.polylines(g, [np.array([[6, 44], [18, 20], [30, 52], [42, 26], [52, 46], [62, 30]])], False, 0, 3)
    cv2.rectangle(g, (58, 52), (66, 60), 0, -1)
    out["breaker"] = g

    g = _canvas(S, S)  # tilted ellipse dial, raised needle, hub dot
    cv2.ellipse(g, (36, 40), (21, 13), 15, 0, 360, 0, 3)
    cv2.line(g, (36, 40), (52, 24), 0, 3)
    cv2.circle(g, (34, 42), 4, 0, -1)
    out["gauge"] = g

    g = _canvas(S, S)  # rhombus body, offset lens ring, corner dot
    cv2.polylines(g, [np.array([[12, 22], [50, 12], [62, 46], [22, 58]])], True, 0, 3)
    cv2.circle(g, (40, 34), 7, 0, 2)
    cv2.circle(g, (20, 28), 3, 0, -1)
    out["camera"] = g

    g = _canvas(S, S)  # three blades of unequal sweep around a hub
    cv2.ellipse(g, (36, 36), (22, 9), 20, 15, 130, 0, 3)
    cv2.ellipse(g, (36, 36), (21, 10), 140, 20, 150, 0, 3)
    cv2.ellipse(g, (36, 36), (21, 9), 260, 10, 120, 0, 3)
    cv2.circle(g, (36, 36), 5, 0, -1)
    cv2.line(g, (57, 44), (57, 46), 0, 1)
    out["fan"] = g

    g = _canvas(S, S)  # funnel chevron with two unequal drip dots
    cv2.polylines(g, [np.array([[8, 12], [36, 42], [64, 18]])], False, 0, 3)
    cv2.circle(g, (34, 47), 5, 0, -1)
    cv2.circle(g, (40, 56), 3, 0, -1)
    cv2.line(g, (6, 11), (6, 13), 0, 1)
    cv2.line(g, (66, 17), (66, 19), 0, 1)
    out["filter"] = g

    g = _canvas(S, S)  # coil of three bumps, middle one inverted and taller
    cv2.ellipse(g, (16, 38), (9, 14), 0, -50, 230, 0, 3)
    cv2.ellipse(g, (36, 34), (9, 18), 0, 130, 410, 0, 3)
    cv2.ellipse(g, (56, 38), (9, 12), 0, -40, 220, 0, 3)
    out["heater"] = g

    g = _canvas(S, S)  # irregular hexagon, all edges slanted, inner dash
    cv2.polylines(g, [np.array([[34, 6], [62, 22], [54, 52], [38, 66], [10, 48], [20, 16]])], True, 0, 3)
    cv2.line(g, (24, 44), (48, 30), 0, 3)
    out["tank"] = g
    return out


def glyph_ink_box(glyph, threshold=raster.DEFAULT_THRESHOLD):
    ys, xs = np.nonzero(glyph < threshold)
    return BBox(int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))


def text_size(text, scale=2):
    """(height, width) of render_text output."""
    w = 0
    for word in text.split(" "):
        if w:
            w += 4 * scale
        w += len(word) * (FONT_W + 1) * scale - scale
    return FONT_H * scale, max(w, scale)


def render_text(text, scale=2):
    """Rasterize uppercase text in the 5x7 font; ink 0 on 255."""
    h, w = text_size(text, scale)
    img = _canvas(h, w)
    x = 0
    for word in text.split(" "):
        for ch in word:
            rows = _FONT.get(ch)
            if rows is None:
                raise ValueError(f"unsupported character {ch!r}")
            for r, bits in enumerate(rows):
                for c, bit in enumerate(bits):
                    if bit == "1":
                        img[r * scale : (r + 1) * scale, x + c * scale : x + (c + 1) * scale] = 0
            x += (FONT_W + 1) * scale
        x += 3 * scale  # word gap: 1 letter gap already added, pad to 4 cells
    return img


def _stamp(dst, src, y, x):
    dst[y : y + src.shape[0], x : x + src.shape[1]] = np.minimum(
        dst[y : y + src.shape[0], x : x + src.shape[1]], src
    )


@dataclass(frozen=True)
class TableEntry:
    """Ground truth for one data row of a rendered table."""

    class_id: int
    glyph_key: str
    name_text: str
    symbol_box: BBox  # tight ink box of the stamped glyph
    name_box: BBox  # tight ink box of the rendered name
    band: tuple  # (y0, y1) of the row's cell interior


@dataclass(frozen=True)
class TableGeometry:
    box: BBox  # outer border bounds
    anchor_box: BBox  # the title word
    entries: tuple
    heading_rows: int


def render_legend_table(keys, heading_rows=1, symbol_side="left", pad=8, scale=2, glyphs=None):
    """Draw a bordered legend table and return it with its geometry.

    One data row per glyph key: a symbol cell and a name cell separated
    by whitespace (no vertical rule), with a title band on top and
    optional heading bands. All strokes are 1 px so stray-line removal
    can erase them cleanly. Each data row carries a short vertical bar
    at the outer edge of its name cell; the bar spans the whole cell
    band, so a row-mean scan never sees a white row inside the band and
    the band cannot split at a thin glyph tip. Boxes in the geometry
    are table-local.
    """
    if not 0 <= heading_rows <= len(HEADING_WORDS):
        raise ValueError("heading_rows must be 0..2")
    if symbol_side not in ("left", "right"):
        raise ValueError("symbol_side must be left or right")
    glyphs = glyphs if glyphs is not None else build_glyphs()

    text_h = FONT_H * scale
    title_h = text_h + 2 * pad
    head_h = text_h + 2 * pad
    data_h = GLYPH_SIZE + 2 * pad
    sym_w = GLYPH_SIZE + 2 * pad
    name_texts = [DISPLAY_NAMES[k] for k in keys]
    widths = [text_size(t, scale)[1] for t in name_texts]
    for pair in HEADING_WORDS[:heading_rows]:
        widths.append(text_size(pair[1], scale)[1])
    widths.append(text_size(ANCHOR_WORD, scale)[1])
    bar_w = 6
    name_w = max(widths) + 2 * pad + 2 * bar_w + 8
    inner_w = sym_w + name_w
    n_bands = 1 + heading_rows + len(keys)
    total_h = 1 + title_h + heading_rows * (1 + head_h) + len(keys) * (1 + data_h) + 1
    total_w = inner_w + 2

    img = _canvas(total_h, total_w)
    img[0, :] = 0
    img[total_h - 1, :] = 0
    img[:, 0] = 0
    img[:, total_w - 1] = 0

    if symbol_side == "left":
        sym_x0, name_x0 = 1, 1 + sym_w
    else:
        name_x0, sym_x0 = 1, 1 + name_w

    y = 1
    title = render_text(ANCHOR_WORD, scale)
    tx = 1 + (inner_w - title.shape[1]) // 2
    ty = y + (title_h - title.shape[0]) // 2
    _stamp(img, title, ty, tx)
    anchor_box = BBox(tx, ty, title.shape[1], title.shape[0])
    y += title_h
    img[y, :] = 0
    y += 1

    for row in range(heading_rows):
        sym_word, name_word = HEADING_WORDS[row]
        for word, x0, w in ((sym_word, sym_x0, sym_w), (name_word, name_x0, name_w)):
            t = render_text(word, scale)
            _stamp(img, t, y + (head_h - t.shape[0]) // 2, x0 + (w - t.shape[1]) // 2)
        y += head_h
        img[y, :] = 0
        y += 1

    entries = []
    for cid, key in enumerate(keys):
        glyph = glyphs[key]
        gy, gx = y + pad, sym_x0 + pad
        _stamp(img, glyph, gy, gx)
        ink = glyph_ink_box(glyph)
        sym_box = BBox(gx + ink.x, gy + ink.y, ink.w, ink.h)
        t = render_text(name_texts[cid], scale)
        # stagger the bars so they never stack into a near-full column,
        # which the stray-line scan would whiten away
        bar_off = (cid % 2) * (bar_w + 4)
        if symbol_side == "left":
            nx, bar_x = name_x0 + pad, name_x0 + name_w - 2 - bar_w - bar_off
        else:
            nx, bar_x = name_x0 + pad + 2 * bar_w + 8, name_x0 + 2 + bar_off
        ny = y + (data_h - t.shape[0]) // 2
        _stamp(img, t, ny, nx)
        img[y + 1 : y + data_h - 1, bar_x : bar_x + bar_w] = 0
        entries.append(
            TableEntry(cid, key, name_texts[cid], sym_box, BBox(nx, ny, t.shape[1], t.shape[0]), (y, y + data_h))
        )
        y += data_h
        if cid < len(keys) - 1:
            img[y, :] = 0
            y += 1

    geom = TableGeometry(BBox(0, 0, total_w, total_h), anchor_box, tuple(entries), heading_rows)
    return img, geom


@dataclass(frozen=True)
class FixtureSpec:
    """Knobs for generate_fixture; all placement detail comes from the seed."""

    n_classes: int = 6
    n_instances: int = 30
    n_outliers: int = 0
    heading_rows: int = 1
    n_lines: int = 6
    n_noise: int = 120
    height: int = 2400
    width: int = 2800
    symbol_side: str = "left"

    def __post_init__(self):
        if not 1 <= self.n_classes <= len(DISPLAY_NAMES):
            raise ValueError("n_classes out of range")
        if self.n_outliers and self.n_classes >= len(DISPLAY_NAMES):
            raise ValueError("no glyphs left over for outliers")


@dataclass
class FixtureResult:
    image: np.ndarray
    table_box: BBox
    entries: tuple  # TableEntry, boxes in image coordinates
    instances: tuple  # (BBox, class_id or OUTLIER) per stamped symbol
    anchor: WordBox
    seed: int


def _shift_box(b, dy, dx):
    return BBox(b.x + dx, b.y + dy, b.w, b.h)


def _expand(b, margin):
    return BBox(b.x - margin, b.y - margin, b.w + 2 * margin, b.h + 2 * margin)


def _place(rng, occupied, box_h, box_w, height, width, margin, tries=4000):
    """Random top-left for a box_h x box_w region clear of occupied boxes."""
    for _ in range(tries):
        y = int(rng.integers(margin, height - box_h - margin))
        x = int(rng.integers(margin, width - box_w - margin))
        cand = _expand(BBox(x, y, box_w, box_h), margin)
        if not any(cand.intersects(o) for o in occupied):
            return y, x
    raise RuntimeError("could not place fixture element; lower the density")


def generate_fixture(spec: FixtureSpec, seed: int) -> FixtureResult:
    """Build one drawing: legend table, stamps, lines, noise, ground truth.

    Stamps keep a clear margin from the table, the ruling lines, and
    each other, so one stamp maps to one detection. Noise dots are kept
    at least 8 px from everything that matters.
    """
    rng = np.random.default_rng(seed)
    glyphs = build_glyphs()
    keys = sorted(glyphs)
    chosen = [keys[i] for i in rng.choice(len(keys), spec.n_classes, replace=False)]
    spare = [k for k in keys if k not in chosen]

    img = _canvas(spec.height, spec.width)
    table_img, geom = render_legend_table(
        chosen, heading_rows=spec.heading_rows, symbol_side=spec.symbol_side, glyphs=glyphs
    )
    th, tw = table_img.shape
    ty = int(rng.integers(40, max(41, min(400, spec.height - th - 40))))
    tx = int(rng.integers(40, max(41, min(400, spec.width - tw - 40))))
    _stamp(img, table_img, ty, tx)
    table_box = BBox(tx, ty, tw, th)
    entries = tuple(
        TableEntry(
            e.class_id,
            e.glyph_key,
            e.name_text,
            _shift_box(e.symbol_box, ty, tx),
            _shift_box(e.name_box, ty, tx),
            (e.band[0] + ty, e.band[1] + ty),
        )
        for e in geom.entries
    )
    anchor = WordBox(ANCHOR_WORD, _shift_box(geom.anchor_box, ty, tx), 1.0)

    occupied = [_expand(table_box, 12)]
    instances = []
    for i in range(spec.n_instances + spec.n_outliers):
        if i < spec.n_instances:
            key = chosen[int(rng.integers(len(chosen)))]
            label = chosen.index(key)
        else:
            key = spare[int(rng.integers(len(spare)))]
            label = OUTLIER
        glyph = glyphs[key]
        y, x = _place(rng, occupied, GLYPH_SIZE, GLYPH_SIZE, spec.height, spec.width, 12)
        _stamp(img, glyph, y, x)
        occupied.append(_expand(BBox(x, y, GLYPH_SIZE, GLYPH_SIZE), 12))
        ink = glyph_ink_box(glyph)
        instances.append((BBox(x + ink.x, y + ink.y, ink.w, ink.h), label))

    line_boxes = []
    for _ in range(spec.n_lines):
        horizontal = bool(rng.integers(2))
        length = int(rng.integers(300, 1200))
        lh, lw = (3, length) if horizontal else (length, 3)
        if lh >= spec.height - 80 or lw >= spec.width - 80:
            continue
        try:
            y, x = _place(rng, occupied, lh, lw, spec.height, spec.width, 12)
        except RuntimeError:
            continue
        img[y : y + lh, x : x + lw] = 0
        line_boxes.append(BBox(x, y, lw, lh))
    occupied.extend(_expand(b, 8) for b in line_boxes)

    for _ in range(spec.n_noise):
        s = int(rng.integers(1, 3))
        try:
            y, x = _place(rng, occupied, s, s, spec.height, spec.width, 8, tries=200)
        except RuntimeError:
            continue
        img[y : y + s, x : x + s] = 0
        occupied.append(_expand(BBox(x, y, s, s), 8))

    return FixtureResult(img, table_box, entries, tuple(instances), anchor, seed)


def locate_words_builtin(img, vocabulary=(ANCHOR_WORD,), scale=2, min_agreement=0.98, max_hits=16):
    """Find rendered vocabulary words by exact template matching.

    Stands in for OCR on fixture images: agreement is 1 minus the
    normalized squared difference, so a pixel-perfect occurrence scores
    1.0. Overlapping hits of the same word are suppressed greedily.
    """
    found = []
    for word in vocabulary:
        tmpl = render_text(word, scale)
        h, w = tmpl.shape
        if img.shape[0] < h or img.shape[1] < w:
            continue
        sq = cv2.matchTemplate(img, tmpl, cv2.TM_SQDIFF)
        agree = 1.0 - sq / (255.0 * 255.0 * h * w)
        for _ in range(max_hits):
            _, best, _, loc = cv2.minMaxLoc(agree)
            if best < min_agreement:
                break
            x, y = loc
            conf = min(1.0, float(best))
            if np.array_equal(img[y : y + h, x : x + w], tmpl):
                conf = 1.0  # matchTemplate accumulates in float32
            found.append(WordBox(word, BBox(x, y, w, h), conf))
            y0, y1 = max(0, y - h + 1), min(agree.shape[0], y + h)
            x0, x1 = max(0, x - w + 1), min(agree.shape[1], x + w)
            agree[y0:y1, x0:x1] = -1.0
    found.sort(key=lambda wb: (-wb.confidence, wb.box.y, wb.box.x))
    return found

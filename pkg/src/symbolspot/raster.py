"""Pixel-level primitives shared by every pipeline stage.

Images are numpy uint8 arrays of shape (h, w), grayscale, with ink dark
(0) and background light (255) after binarization.
"""

from dataclasses import dataclass

import cv2
import numpy as np

DEFAULT_THRESHOLD = 200
KERNEL_DIVISOR = 70
MIN_KERNEL_LEN = 2
RECT_BORDER_RATIO = 0.9
MIN_RECT_AREA = 100

INK = 0
BACKGROUND = 255

OVERLAY_PALETTE = [
    (220, 20, 20),
    (20, 140, 20),
    (20, 20, 220),
    (200, 140, 0),
    (140, 0, 200),
    (0, 160, 160),
]


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel rectangle, origin top-left."""

    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    def contains(self, other: "BBox") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and self.x2 >= other.x2
            and self.y2 >= other.y2
        )

    def intersects(self, other: "BBox") -> bool:
        return not (
            self.x2 <= other.x
            or other.x2 <= self.x
            or self.y2 <= other.y
            or other.y2 <= self.y
        )

    def union(self, other: "BBox") -> "BBox":
        x = min(self.x, other.x)
        y = min(self.y, other.y)
        return BBox(x, y, max(self.x2, other.x2) - x, max(self.y2, other.y2) - y)

    def clamped(self, width: int, height: int) -> "BBox":
        x = min(max(self.x, 0), width - 1)
        y = min(max(self.y, 0), height - 1)
        return BBox(x, y, max(1, min(self.x2, width) - x), max(1, min(self.y2, height) - y))


@dataclass(frozen=True)
class LineKernel:
    """1-D structuring element, horizontal (1 x length) or vertical (length x 1)."""

    orientation: str
    length: int

    def __post_init__(self):
        if self.orientation not in ("horizontal", "vertical"):
            raise ValueError(f"bad orientation: {self.orientation}")
        if self.length < 1:
            raise ValueError("kernel length must be >= 1")


def load_png(path) -> np.ndarray:
    """Load an image file as 8-bit grayscale."""
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise IOError(f"cannot read image: {path}")
    return img


def save_png(path, img: np.ndarray) -> None:
    if not cv2.imwrite(str(path), img):
        raise IOError(f"cannot write image: {path}")


def binarize(img: np.ndarray, threshold: int = DEFAULT_THRESHOLD) -> np.ndarray:
    """Global threshold: pixel < threshold becomes ink (0), else background (255)."""
    if not 0 < threshold < 255:
        raise ValueError("threshold must be in (0, 255)")
    return np.where(img < threshold, INK, BACKGROUND).astype(np.uint8)


def ink_fraction(img: np.ndarray) -> float:
    return float(np.count_nonzero(img == INK)) / img.size


def auto_invert(img: np.ndarray) -> np.ndarray:
    """Flip a light-on-dark binary image; drawings are assumed dark-on-light."""
    if ink_fraction(img) > 0.5:
        return (BACKGROUND - img).astype(np.uint8)
    return img


def make_line_kernels(w: int, h: int, divisor: int = KERNEL_DIVISOR):
    """Build the horizontal 1 x w/divisor and vertical h/divisor x 1 kernels.

    Lengths are floored and clamped to 2: a length-1 kernel would leave
    the image unchanged and small images would otherwise get one.
    """
    horiz = LineKernel("horizontal", max(MIN_KERNEL_LEN, w // divisor))
    vert = LineKernel("vertical", max(MIN_KERNEL_LEN, h // divisor))
    return horiz, vert


def _kernel_offsets(k: LineKernel):
    anchor = k.length // 2
    return [off - anchor for off in range(k.length)]


def _shift(img: np.ndarray, dy: int, dx: int, fill: int) -> np.ndarray:
    """Return img translated so out[y, x] = img[y + dy, x + dx], fill outside."""
    h, w = img.shape
    out = np.full_like(img, fill)
    ys = slice(max(dy, 0), min(h + dy, h))
    xs = slice(max(dx, 0), min(w + dx, w))
    oys = slice(max(-dy, 0), max(-dy, 0) + (ys.stop - ys.start))
    oxs = slice(max(-dx, 0), max(-dx, 0) + (xs.stop - xs.start))
    if ys.stop > ys.start and xs.stop > xs.start:
        out[oys, oxs] = img[ys, xs]
    return out


def erode(img: np.ndarray, k: LineKernel, iterations: int = 1) -> np.ndarray:
    """A pixel stays ink only if the whole kernel footprint is ink.

    Pixels outside the image count as background, so ink touching the
    border is shaved like anywhere else.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    out = img
    for _ in range(iterations):
        acc = out.copy()
        for off in _kernel_offsets(k):
            dy, dx = (0, off) if k.orientation == "horizontal" else (off, 0)
            acc = np.maximum(acc, _shift(out, dy, dx, BACKGROUND))
        out = acc
    return out


def dilate(img: np.ndarray, k: LineKernel, iterations: int = 1) -> np.ndarray:
    """A pixel becomes ink if any pixel of the reflected footprint is ink."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    out = img
    for _ in range(iterations):
        acc = out.copy()
        for off in _kernel_offsets(k):
            dy, dx = (0, -off) if k.orientation == "horizontal" else (-off, 0)
            acc = np.minimum(acc, _shift(out, dy, dx, BACKGROUND))
        out = acc
    return out


def opening(img: np.ndarray, k: LineKernel, iterations: int = 1) -> np.ndarray:
    return dilate(erode(img, k, iterations), k, iterations)


def detect_lines(img: np.ndarray, horiz: LineKernel, vert: LineKernel, iterations: int = 1):
    """Morphological opening per orientation; keeps only runs at least one kernel long."""
    return opening(img, horiz, iterations), opening(img, vert, iterations)


def combine_lines(hlines: np.ndarray, vlines: np.ndarray) -> np.ndarray:
    """Ink-union of the two line images."""
    if hlines.shape != vlines.shape:
        raise ValueError(f"shape mismatch: {hlines.shape} vs {vlines.shape}")
    return np.minimum(hlines, vlines)


def find_rectangles(
    boxes_img: np.ndarray,
    min_area: int = MIN_RECT_AREA,
    border_ratio: float = RECT_BORDER_RATIO,
):
    """Bounding boxes of closed rectangular contours in a combined-lines image.

    A contour counts as a rectangle when its traced border covers at least
    border_ratio of its bounding-box perimeter, which accepts cell borders
    and rejects diagonals and L-shaped fragments. Nested rectangles (table
    cells seen as holes of the grid) are included.
    """
    mask = (boxes_img == INK).astype(np.uint8)
    contours, _ = cv2.findContours(mask, cv2.RETR_LIST, cv2.CHAIN_APPROX_NONE)
    seen = set()
    rects = []
    for contour in contours:
        x, y, w, h = cv2.boundingRect(contour)
        if w * h < min_area:
            continue
        if len(contour) < border_ratio * 2 * (w + h):
            continue
        key = (x, y, w, h)
        if key in seen:
            continue
        seen.add(key)
        rects.append(BBox(x, y, w, h))
    rects.sort(key=lambda b: (-b.area, b.y, b.x, b.w))
    return rects


def connected_components(img: np.ndarray):
    """8-connected ink components as (tight BBox, ink pixel count) pairs."""
    mask = (img == INK).astype(np.uint8)
    count, _, stats, _ = cv2.connectedComponentsWithStats(mask, connectivity=8)
    comps = []
    for label in range(1, count):
        x, y, w, h, area = stats[label]
        comps.append((BBox(int(x), int(y), int(w), int(h)), int(area)))
    comps.sort(key=lambda c: (c[0].y, c[0].x, c[0].w, c[0].h))
    return comps


def resize(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize to exactly (out_w, out_h)."""
    if out_w <= 0 or out_h <= 0:
        raise ValueError("output dimensions must be positive")
    return cv2.resize(img, (out_w, out_h), interpolation=cv2.INTER_LINEAR)


def crop(img: np.ndarray, b: BBox) -> np.ndarray:
    h, w = img.shape[:2]
    if b.x < 0 or b.y < 0 or b.x2 > w or b.y2 > h or b.w <= 0 or b.h <= 0:
        raise ValueError(f"crop box {b} outside {w}x{h} image")
    return img[b.y : b.y2, b.x : b.x2].copy()


def render_overlay(img: np.ndarray, boxes) -> np.ndarray:
    """Burn labelled box outlines into an RGB copy of the image.

    boxes is a list of (BBox, label text, color-class int). Out-of-bounds
    boxes are clipped. The input raster is left untouched.
    """
    out = cv2.cvtColor(img, cv2.COLOR_GRAY2RGB)
    h, w = img.shape[:2]
    for box, label, color_class in boxes:
        color = OVERLAY_PALETTE[color_class % len(OVERLAY_PALETTE)]
        clipped = box.clamped(w, h)
        cv2.rectangle(
            out,
            (clipped.x, clipped.y),
            (clipped.x2 - 1, clipped.y2 - 1),
            color,
            1,
        )
        if label:
            cv2.putText(
                out,
                str(label),
                (clipped.x, max(10, clipped.y - 3)),
                cv2.FONT_HERSHEY_SIMPLEX,
                0.35,
                color,
                1,
                cv2.LINE_AA,
            )
    return out

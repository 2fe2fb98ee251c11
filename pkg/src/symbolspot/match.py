"""Keypoint matching and zero-shot template classification.

A query crop and each template are resized to a common working size,
SIFT keypoints are matched brute-force with the ratio test, and the
(n, m) match counts feed a piecewise similarity score. The template
with the highest score wins unless every score sits below the outlier
threshold.
"""

import math
from dataclasses import dataclass

import cv2
import numpy as np

from . import raster

OUTLIER = "outlier"

WORKING_SIZE = 64
DEFAULT_RATIO = 0.75
DEFAULT_TAU = 0.15
SCORE_MODES = ("piecewise", "fraction")


@dataclass(frozen=True)
class MatchConfig:
    ratio: float = DEFAULT_RATIO
    outlier_tau: float = DEFAULT_TAU
    score_mode: str = "piecewise"
    working_size: int = WORKING_SIZE

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must be in (0, 1)")
        if self.score_mode not in SCORE_MODES:
            raise ValueError(f"score_mode must be one of {SCORE_MODES}")


@dataclass(frozen=True)
class FeatureSet:
    """SIFT keypoints as (x, y, scale, orientation-radians) with descriptors."""

    keypoints: tuple
    descriptors: np.ndarray

    def __len__(self):
        return len(self.keypoints)


@dataclass(frozen=True)
class MatchStats:
    m: int
    n: int


@dataclass(frozen=True)
class SimilarityScore:
    s: float
    stats: MatchStats


@dataclass(frozen=True)
class ClassificationOutcome:
    label: object  # class id int, or OUTLIER
    best_score: float
    per_template_scores: tuple
    box: object = None


_EMPTY_DESCRIPTORS = np.zeros((0, 128), np.float32)


def tighten_to_ink(img: np.ndarray, threshold: int = raster.DEFAULT_THRESHOLD) -> np.ndarray:
    """Crop to the bounding box of ink pixels; unchanged if there is no ink.

    Detections and legend templates frame the same glyph with different
    margins, so both sides are tightened before feature extraction.
    """
    ys, xs = np.nonzero(img < threshold)
    if len(ys) == 0:
        return img
    return img[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]


def extract_features(img: np.ndarray, cfg: MatchConfig = MatchConfig()) -> FeatureSet:
    """Resize to the working size and run SIFT; empty set for featureless input."""
    small = raster.resize(img, cfg.working_size, cfg.working_size)
    sift = cv2.SIFT_create()
    kps, desc = sift.detectAndCompute(small, None)
    if desc is None or len(kps) == 0:
        return FeatureSet((), _EMPTY_DESCRIPTORS)
    points = tuple(
        (float(k.pt[0]), float(k.pt[1]), float(k.size), math.radians(k.angle))
        for k in kps
    )
    return FeatureSet(points, desc.astype(np.float32))


def brute_force_match(d1: np.ndarray, d2: np.ndarray):
    """Nearest and second-nearest neighbour in d2 for every d1 descriptor.

    Returns a list of (i, j, best_distance, second_distance). With a
    single d2 descriptor the second distance is +inf, which lets the lone
    match pass any ratio test. Ties break toward the lower d2 index.
    """
    if len(d1) == 0 or len(d2) == 0:
        return []
    d1 = np.asarray(d1, np.float32)
    d2 = np.asarray(d2, np.float32)
    # exact pairwise distances; identical descriptors must come out at 0
    diff = d1[:, None, :].astype(np.float64) - d2[None, :, :].astype(np.float64)
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    out = []
    for i in range(len(d1)):
        order = np.argsort(dist[i], kind="stable")
        j = int(order[0])
        best = float(dist[i][j])
        second = float(dist[i][order[1]]) if len(d2) > 1 else float("inf")
        out.append((i, j, best, second))
    return out


def ratio_test(matches, ratio: float = DEFAULT_RATIO) -> int:
    """Count matches whose best distance beats ratio times the second best."""
    return sum(1 for _, _, best, second in matches if best < ratio * second)


def similarity_score(n: int, m: int, mode: str = "piecewise") -> float:
    """Piecewise score over match counts.

    The default mode scores 1 only for a clean sweep (n == m), gives a
    single surviving match a token 0.1, and otherwise decreases with the
    fraction of matches retained. The 'fraction' mode scores plain n/m.
    """
    if mode == "fraction":
        return n / m if m > 0 else 0.0
    if mode != "piecewise":
        raise ValueError(f"unknown score mode {mode!r}")
    if m > 0 and n == m:
        return 1.0
    if n == 1:
        return 0.1
    if 1 < n < m:
        return 1.0 - n / m
    return 0.0


def similarity(q: np.ndarray, t: np.ndarray, cfg: MatchConfig = MatchConfig()) -> SimilarityScore:
    """Score query against template; the query supplies d1, the template d2."""
    qf = extract_features(q, cfg)
    tf = extract_features(t, cfg)
    return similarity_from_features(qf, tf, cfg)


def similarity_from_features(qf: FeatureSet, tf: FeatureSet, cfg: MatchConfig = MatchConfig()) -> SimilarityScore:
    matches = brute_force_match(qf.descriptors, tf.descriptors)
    m = len(matches)
    n = ratio_test(matches, cfg.ratio)
    return SimilarityScore(similarity_score(n, m, cfg.score_mode), MatchStats(m, n))


def classify(
    det_crop: np.ndarray,
    templates,
    outlier_tau: float = DEFAULT_TAU,
    cfg: MatchConfig = MatchConfig(),
    template_features=None,
) -> ClassificationOutcome:
    """Label a crop with the best-scoring template class, or OUTLIER.

    templates is a list of (class_id, template raster). Precomputed
    template FeatureSets can be passed to avoid re-extraction across many
    detections. Score ties break toward the lower class id.
    """
    if not templates:
        raise ValueError("classify needs at least one template")
    qf = extract_features(det_crop, cfg)
    scored = []
    for idx, (class_id, timg) in enumerate(templates):
        tf = template_features[idx] if template_features is not None else extract_features(timg, cfg)
        scored.append((class_id, similarity_from_features(qf, tf, cfg).s))
    best_id, best_score = min(scored, key=lambda cs: (-cs[1], cs[0]))
    label = best_id if best_score >= outlier_tau else OUTLIER
    return ClassificationOutcome(label, best_score, tuple(scored))


def classify_by_embedding(f, templates):
    """Nearest template by Euclidean distance; ties break to the lower class id."""
    if not templates:
        raise ValueError("classify_by_embedding needs at least one template")
    f = np.asarray(f, np.float64)
    best = None
    for class_id, emb in templates:
        emb = np.asarray(emb, np.float64)
        if emb.shape != f.shape:
            raise ValueError(f"embedding length mismatch: {emb.shape} vs {f.shape}")
        d = float(np.linalg.norm(f - emb))
        if best is None or (d, class_id) < best:
            best = (d, class_id)
    return best[1]


def count_by_class(outcomes):
    """Multiset of labels, with outliers counted separately."""
    counts = {}
    outliers = 0
    for outcome in outcomes:
        if outcome.label == OUTLIER:
            outliers += 1
        else:
            counts[outcome.label] = counts.get(outcome.label, 0) + 1
    return counts, outliers

import itertools
import json

import numpy as np
import pytest

from symbolspot import fixtures, legend_locate, raster
from symbolspot.legend_locate import (
    METHOD_CLASSICAL,
    METHOD_EXTERNAL,
    TableDetection,
    WordBox,
    enclosing_table,
    extract_table_classical,
    ingest_table_detections,
    locate_anchor_word,
    select_table,
)
from symbolspot.raster import BBox


def wb(text, x=0, y=0, w=50, h=10, conf=0.9):
    return WordBox(text, BBox(x, y, w, h), conf)


# --- locate_anchor_word ---

def test_anchor_exact_hit():
    words = [wb("VALVE"), wb("LEGEND", conf=0.9), wb("NOTE")]
    assert locate_anchor_word(words) == words[1]


def test_anchor_prefix_and_punctuation():
    for text in ("LEGENDS", "Legend:", "legend", '"LEGEND"'):
        assert locate_anchor_word([wb(text)]) is not None, text


def test_anchor_exact_flag_rejects_prefix():
    assert locate_anchor_word([wb("LEGENDS")], exact=True) is None
    assert locate_anchor_word([wb("Legend:")], exact=True) is not None


def test_anchor_none_when_absent():
    assert locate_anchor_word([wb("TITLE"), wb("NOTES")]) is None
    assert locate_anchor_word([]) is None


def test_anchor_picks_highest_confidence_then_position():
    a = wb("LEGEND", x=5, y=9, conf=0.7)
    b = wb("LEGEND", x=0, y=2, conf=0.9)
    c = wb("LEGEND", x=3, y=2, conf=0.9)
    assert locate_anchor_word([a, b, c]) == b
    assert locate_anchor_word([a, c]) == c


def test_anchor_word_embedded_in_longer_text_not_required():
    # the anchor must be the word's prefix, not a substring
    assert locate_anchor_word([wb("MYLEGEND")]) is None


# --- enclosing_table ---

def test_enclosing_nested_returns_parent():
    anchor = BBox(22, 22, 10, 5)
    cell = BBox(20, 20, 40, 12)
    outer = BBox(10, 10, 200, 300)
    unrelated = BBox(500, 500, 50, 50)
    assert enclosing_table([unrelated, outer, cell], anchor) == outer


def test_enclosing_single_rect_returned_as_is():
    anchor = BBox(5, 5, 4, 4)
    only = BBox(0, 0, 100, 100)
    assert enclosing_table([only], anchor) == only


def test_enclosing_none_without_containing_rect():
    assert enclosing_table([BBox(50, 50, 10, 10)], BBox(0, 0, 5, 5)) is None
    assert enclosing_table([], BBox(0, 0, 5, 5)) is None


def test_enclosing_grandparent_not_chosen():
    anchor = BBox(30, 30, 5, 5)
    cell = BBox(28, 28, 10, 10)
    parent = BBox(20, 20, 60, 60)
    grand = BBox(0, 0, 400, 400)
    assert enclosing_table([grand, parent, cell], anchor) == parent


def test_enclosing_result_contains_anchor_property():
    rng = np.random.default_rng(5)
    for _ in range(200):
        anchor = BBox(int(rng.integers(0, 50)), int(rng.integers(0, 50)), int(rng.integers(1, 20)), int(rng.integers(1, 20)))
        rects = []
        for _ in range(int(rng.integers(0, 8))):
            rects.append(
                BBox(int(rng.integers(0, 60)), int(rng.integers(0, 60)), int(rng.integers(5, 120)), int(rng.integers(5, 120)))
            )
        got = enclosing_table(rects, anchor)
        if got is not None:
            assert got.contains(anchor) or any(r.contains(anchor) and got.contains(r) for r in rects)


# --- extract_table_classical ---

def make_drawing(seed=3, **kw):
    spec = fixtures.FixtureSpec(**kw)
    return fixtures.generate_fixture(spec, seed)


def test_extract_matches_generated_bounds():
    fx = make_drawing(seed=21, n_classes=5, n_instances=8, n_lines=4, n_noise=40)
    words = [fx.anchor]
    det = extract_table_classical(fx.image, words)
    assert det is not None
    assert det.method == METHOD_CLASSICAL
    assert det.confidence == 1.0
    assert abs(det.box.x - fx.table_box.x) <= 2
    assert abs(det.box.y - fx.table_box.y) <= 2
    assert abs(det.box.x2 - fx.table_box.x2) <= 2
    assert abs(det.box.y2 - fx.table_box.y2) <= 2


def test_extract_box_comes_from_detected_rectangles():
    fx = make_drawing(seed=22, n_classes=4, n_instances=6, n_lines=3, n_noise=20)
    det = extract_table_classical(fx.image, [fx.anchor])
    binary = raster.auto_invert(raster.binarize(fx.image))
    h, w = binary.shape
    hk, vk = raster.make_line_kernels(w, h)
    hl, vl = raster.detect_lines(binary, hk, vk)
    rects = raster.find_rectangles(raster.combine_lines(hl, vl))
    assert det.box in rects


def test_extract_borderless_table_returns_none():
    # word and symbols present but no ruled border anywhere
    img = np.full((800, 1000), 255, np.uint8)
    word = fixtures.render_text("LEGEND")
    img[40 : 40 + word.shape[0], 60 : 60 + word.shape[1]] = word
    glyph = fixtures.build_glyphs()["pump"]
    img[200:272, 100:172] = glyph
    words = [WordBox("LEGEND", BBox(60, 40, word.shape[1], word.shape[0]), 1.0)]
    assert extract_table_classical(img, words) is None


def test_extract_blank_image_returns_none():
    img = np.full((400, 400), 255, np.uint8)
    assert extract_table_classical(img, []) is None
    assert extract_table_classical(img, [wb("LEGEND")]) is None


def test_extract_missing_anchor_returns_none():
    fx = make_drawing(seed=23, n_classes=3, n_instances=5, n_lines=2, n_noise=10)
    assert extract_table_classical(fx.image, [wb("NOTES")]) is None


# --- ingest_table_detections ---

def doc_with(dets, image_id="d1"):
    return json.dumps({"images": [{"id": image_id, "detections": dets}]})


def test_ingest_table_detections():
    doc = doc_with(
        [
            {"kind": "table", "x": 10, "y": 20, "w": 300, "h": 200, "confidence": 0.98},
            {"kind": "symbol", "x": 5, "y": 5, "w": 10, "h": 10, "confidence": 0.5},
        ]
    )
    got = ingest_table_detections(doc, "d1")
    assert got == [TableDetection(BBox(10, 20, 300, 200), METHOD_EXTERNAL, 0.98)]


def test_ingest_unknown_image_id_empty():
    assert ingest_table_detections(doc_with([]), "other") == []


def test_ingest_clamps_to_image_bounds():
    doc = doc_with([{"kind": "table", "x": 10, "y": 20, "w": 900, "h": 900, "confidence": 1.0}])
    got = ingest_table_detections(doc, "d1", image_size=(100, 200))
    assert got[0].box == BBox(10, 20, 190, 80)


def test_ingest_confidence_out_of_range_rejected():
    doc = doc_with([{"kind": "table", "x": 0, "y": 0, "w": 5, "h": 5, "confidence": 1.7}])
    with pytest.raises(ValueError):
        ingest_table_detections(doc, "d1")


# --- select_table ---

def test_select_by_confidence_then_area_then_position():
    classical = TableDetection(BBox(0, 0, 10, 10), METHOD_CLASSICAL, 1.0)
    external = TableDetection(BBox(0, 0, 500, 500), METHOD_EXTERNAL, 0.9)
    assert select_table([external, classical]) == classical

    small = TableDetection(BBox(0, 0, 10, 10), METHOD_EXTERNAL, 0.8)
    big = TableDetection(BBox(50, 50, 20, 10), METHOD_EXTERNAL, 0.8)
    assert select_table([small, big]) == big

    a = TableDetection(BBox(5, 2, 10, 10), METHOD_EXTERNAL, 0.8)
    b = TableDetection(BBox(1, 2, 10, 10), METHOD_EXTERNAL, 0.8)
    assert select_table([a, b]) == b


def test_select_empty_is_none():
    assert select_table([]) is None


def test_select_permutation_invariant():
    cands = [
        TableDetection(BBox(0, 0, 10, 10), METHOD_EXTERNAL, 0.7),
        TableDetection(BBox(4, 4, 30, 10), METHOD_EXTERNAL, 0.9),
        TableDetection(BBox(2, 9, 10, 30), METHOD_CLASSICAL, 0.9),
        TableDetection(BBox(8, 1, 40, 40), METHOD_EXTERNAL, 0.2),
    ]
    results = {select_table(list(p)) for p in itertools.permutations(cands)}
    assert len(results) == 1

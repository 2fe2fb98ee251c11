import numpy as np
import pytest

from symbolspot import fixtures, legend_parse, match, raster
from symbolspot.legend_parse import (
    EmptyTable,
    RowNotSplittable,
    Span,
    drop_heading_rows,
    parse_table,
    remove_stray_lines,
    scan_spans,
    split_row,
)

GLYPHS = fixtures.build_glyphs()


def white(h, w):
    return np.full((h, w), 255, np.uint8)


# --- Span ---

def test_span_validation():
    Span(0, 1, "row")
    with pytest.raises(ValueError):
        Span(5, 5, "row")
    with pytest.raises(ValueError):
        Span(-1, 3, "row")
    assert Span(2, 9, "column").length == 7


# --- remove_stray_lines ---

def test_stray_border_whitened_content_kept():
    img = white(40, 60)
    img[0, :] = 0
    img[-1, :] = 0
    img[:, 0] = 0
    img[:, -1] = 0
    img[10:14, 10:20] = 0  # cell content
    out = remove_stray_lines(img)
    assert (out[0] == 255).all() and (out[-1] == 255).all()
    assert (out[:, 0] == 255).all() and (out[:, -1] == 255).all()
    assert (out[10:14, 10:20] == 0).all()


def test_stray_fixed_point_when_nothing_qualifies():
    img = white(30, 30)
    img[5:12, 5:12] = 0
    assert np.array_equal(remove_stray_lines(img), img)


def test_stray_all_ink_becomes_all_white():
    img = np.zeros((8, 8), np.uint8)
    assert (remove_stray_lines(img) == 255).all()


def test_stray_row_and_column_tests_use_original():
    # a row qualifying must not save a column from qualifying, and vice
    # versa: the cross pattern loses both arms in a single pass
    img = white(20, 20)
    img[10, :] = 0
    img[:, 7] = 0
    out = remove_stray_lines(img)
    assert (out == 255).all()


def test_stray_postcondition_rescan():
    rng = np.random.default_rng(9)
    for _ in range(25):
        img = (rng.random((30, 40)) > 0.3).astype(np.uint8) * 255
        for _ in range(int(rng.integers(0, 4))):
            img[int(rng.integers(30)), :] = 0
        for _ in range(int(rng.integers(0, 4))):
            img[:, int(rng.integers(40))] = 0
        out = remove_stray_lines(img, 0.9)
        ink = out == 0
        assert (ink.sum(axis=1) / out.shape[1] <= 0.9).all()
        assert (ink.sum(axis=0) / out.shape[0] <= 0.9).all()


def test_stray_fraction_validated():
    with pytest.raises(ValueError):
        remove_stray_lines(white(5, 5), 0.0)
    with pytest.raises(ValueError):
        remove_stray_lines(white(5, 5), 1.0)


# --- scan_spans ---

def test_scan_three_bands_exact():
    img = white(60, 30)
    img[5:15, 10] = 0
    img[20:21, 10] = 0
    img[40:55, 10] = 0
    got = scan_spans(img, "row")
    assert [(s.start, s.end) for s in got] == [(5, 15), (20, 21), (40, 55)]
    assert all(s.axis == "row" for s in got)


def test_scan_all_white_empty():
    assert scan_spans(white(10, 10), "row") == []


def test_scan_ink_touching_top_edge():
    img = white(20, 20)
    img[0:4, 5] = 0
    got = scan_spans(img, "row")
    assert got[0].start == 0


def test_scan_column_axis():
    img = white(20, 40)
    img[:, 3:9] = 0
    img[:, 30:31] = 0
    got = scan_spans(img, "column")
    assert [(s.start, s.end) for s in got] == [(3, 9), (30, 31)]


def test_scan_tolerates_salt_noise():
    img = white(10, 300)
    img[4, 150] = 0  # single dark pixel, mean stays >= 250
    assert scan_spans(img, "row") == []


def test_scan_axis_validation():
    with pytest.raises(ValueError):
        scan_spans(white(5, 5), "diagonal")


def test_scan_spans_disjoint_ordered_cover_property():
    rng = np.random.default_rng(4)
    for _ in range(50):
        img = white(40, 8)
        dark = rng.random(40) < 0.4
        img[dark, :] = 0
        got = scan_spans(img, "row")
        covered = np.zeros(40, bool)
        prev_end = -1
        for s in got:
            assert s.start > prev_end
            prev_end = s.end
            covered[s.start : s.end] = True
        assert np.array_equal(covered, dark)


# --- drop_heading_rows ---

def label_finder(symbol_rows):
    def finder(img):
        return img.tobytes() in symbol_rows

    return finder


def test_drop_heading_prefix():
    rows = [(Span(i, i + 1, "row"), np.full((1, 4), 255 - i, np.uint8)) for i in range(4)]
    keep = {rows[2][1].tobytes(), rows[3][1].tobytes()}
    assert drop_heading_rows(rows, label_finder(keep)) == rows[2:]


def test_drop_heading_keeps_later_symbolless_rows():
    rows = [(Span(i, i + 1, "row"), np.full((1, 4), i, np.uint8)) for i in range(4)]
    keep = {rows[1][1].tobytes(), rows[3][1].tobytes()}
    got = drop_heading_rows(rows, label_finder(keep))
    assert got == rows[1:]


def test_drop_heading_no_headings():
    rows = [(Span(0, 1, "row"), white(1, 4))]
    assert drop_heading_rows(rows, lambda img: True) == rows


def test_drop_heading_all_dropped():
    rows = [(Span(i, i + 1, "row"), white(1, 4)) for i in range(3)]
    assert drop_heading_rows(rows, lambda img: False) == []


# --- split_row ---

def render_row(key="pump", side="left"):
    img, geom = fixtures.render_legend_table([key], heading_rows=0, symbol_side=side)
    binary = raster.auto_invert(raster.binarize(img))
    cleaned = remove_stray_lines(binary)
    spans = scan_spans(cleaned, "row")
    assert len(spans) == 2  # title band + data band
    s = spans[-1]
    return cleaned[s.start : s.end, :], geom


def test_split_row_left_to_right():
    row, geom = render_row("pump", "left")
    sym, name, direction = split_row(row, legend_parse.default_symbol_finder())
    assert direction == legend_parse.DIR_LTR
    assert sym.x2 <= name.x
    tight = match.tighten_to_ink(raster.crop(row, sym))
    assert np.array_equal(tight, match.tighten_to_ink(GLYPHS["pump"]))


def test_split_row_right_to_left_fallback():
    row, geom = render_row("motor", "right")
    sym, name, direction = split_row(row, legend_parse.default_symbol_finder())
    assert direction == legend_parse.DIR_RTL
    assert name.x2 <= sym.x
    tight = match.tighten_to_ink(raster.crop(row, sym))
    assert np.array_equal(tight, match.tighten_to_ink(GLYPHS["motor"]))


def test_split_row_boxes_disjoint_full_height():
    row, _ = render_row("tank", "left")
    sym, name, _ = split_row(row, legend_parse.default_symbol_finder())
    assert not sym.intersects(name)
    assert sym.y == name.y == 0
    assert sym.h == name.h == row.shape[0]


def test_split_row_single_span_raises():
    img = white(30, 40)
    img[10:20, 15:25] = 0
    with pytest.raises(RowNotSplittable):
        split_row(img, lambda crop: True)


# --- parse_table ---

def test_parse_nine_row_table_exact():
    keys = sorted(GLYPHS)[:9]
    img, geom = fixtures.render_legend_table(keys, heading_rows=1)
    entries = parse_table(img)
    assert len(entries) == 9
    assert [e.class_id for e in entries] == list(range(9))
    for e, k in zip(entries, keys):
        assert np.array_equal(match.tighten_to_ink(e.symbol), match.tighten_to_ink(GLYPHS[k]))
        assert e.name_img.size > 0
        assert e.symbol.shape[0] == e.name_img.shape[0]


def test_parse_drops_heading_rows():
    keys = sorted(GLYPHS)[3:7]
    for heads in (0, 1, 2):
        img, _ = fixtures.render_legend_table(keys, heading_rows=heads)
        entries = parse_table(img)
        assert len(entries) == len(keys), heads


def test_parse_blank_crop_empty_table():
    with pytest.raises(EmptyTable):
        parse_table(white(100, 160))


def test_parse_text_only_table_empty():
    img, _ = fixtures.render_legend_table(sorted(GLYPHS)[:3], heading_rows=2)
    # keep only the bands above the first data row
    first_data = img.shape[0]
    entries_band = 1 + 30 + 1 + 2 * 31  # border, title, rule, two heading bands
    with pytest.raises(EmptyTable):
        parse_table(img[:entries_band, :])


def test_parse_deterministic_byte_identical():
    keys = sorted(GLYPHS)[5:10]
    img, _ = fixtures.render_legend_table(keys, heading_rows=1)
    a = parse_table(img)
    b = parse_table(img)
    assert len(a) == len(b)
    for ea, eb in zip(a, b):
        assert ea.class_id == eb.class_id
        assert np.array_equal(ea.symbol, eb.symbol)
        assert np.array_equal(ea.name_img, eb.name_img)
        assert ea.source_row == eb.source_row


def test_parse_right_to_left_table():
    keys = sorted(GLYPHS)[8:13]
    img, _ = fixtures.render_legend_table(keys, heading_rows=1, symbol_side="right")
    entries = parse_table(img)
    assert len(entries) == len(keys)
    for e, k in zip(entries, keys):
        assert np.array_equal(match.tighten_to_ink(e.symbol), match.tighten_to_ink(GLYPHS[k]))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homology_match import io as hio
from homology_match.errors import ParseError
from homology_match.matching import CorrespondenceSet, MatchConfig
from homology_match.synthetic import make_fixture

GOOD = """\
# comment
format: homology-match/correspondences
version: 1
reference_id: mug/03
query_id: scene-17
pairs: 4
10.5 20.25 12.0 19.75
100 20 110 25
10 200 15 190
150 160 140 170
"""


def test_parses_header_and_rows():
    corr = hio.parse_correspondences(GOOD)
    assert corr.reference_id == "mug/03" and corr.query_id == "scene-17"
    assert len(corr) == 4
    assert np.array_equal(corr.ref[0], [10.5, 20.25])
    assert np.array_equal(corr.qry[3], [140.0, 170.0])
    assert corr.confidence is None and corr.epipoles is None


def test_optional_confidence_and_epipoles():
    text = GOOD.replace("pairs: 4", "epipoles: 1 2 1 3 4 1\npairs: 4")
    rows = text.splitlines()
    text = "\n".join(rows[:-4] + [r + " 0.5" for r in rows[-4:]]) + "\n"
    corr = hio.parse_correspondences(text)
    assert np.array_equal(corr.confidence, [0.5] * 4)
    assert np.array_equal(corr.epipoles[1], [3.0, 4.0, 1.0])


def line_of(text):
    with pytest.raises(ParseError) as info:
        hio.parse_correspondences(text, path="f.txt")
    return info.value


def test_three_pairs_are_rejected_with_line_number():
    text = "\n".join(GOOD.splitlines()[:-1]).replace("pairs: 4", "pairs: 3")
    err = line_of(text)
    assert "at least 4 correspondences required" in str(err)
    assert err.line == 6 and str(err).startswith("f.txt:6:")


def test_missing_version_is_rejected():
    assert "version" in str(line_of(GOOD.replace("version: 1\n", "")))


def test_unsupported_version_points_at_its_line():
    assert line_of(GOOD.replace("version: 1", "version: 7")).line == 3


def test_row_count_mismatch_is_rejected():
    assert "declared 5 pairs but found 4" in str(line_of(GOOD.replace("pairs: 4", "pairs: 5")))
    assert line_of(GOOD + "1 2 3 4\n").line == 11


@pytest.mark.parametrize("bad", ["nan", "inf", "-inf"])
def test_non_finite_coordinates_are_rejected(bad):
    err = line_of(GOOD.replace("100 20 110 25", f"100 {bad} 110 25"))
    assert err.line == 8 and "finite" in str(err)


def test_wrong_row_width_is_rejected():
    assert line_of(GOOD.replace("100 20 110 25", "100 20 110")).line == 8


def test_mixed_confidence_is_rejected():
    assert "confidence" in str(line_of(GOOD.replace("100 20 110 25", "100 20 110 25 0.9")))


def test_non_numeric_value_is_rejected():
    assert line_of(GOOD.replace("100 20 110 25", "100 twenty 110 25")).line == 8


def test_duplicate_points_are_input_errors():
    assert "duplicate" in str(line_of(GOOD.replace("100 20 110 25", "10.5 20.25 110 25")))


def test_unreadable_file_is_parse_error(tmp_path):
    with pytest.raises(ParseError):
        hio.read_correspondences(tmp_path / "absent.txt")


@pytest.mark.parametrize("kind", ["match", "nonmatch", "planar", "noisy:6"])
@pytest.mark.parametrize("seed", [0, 3])
def test_fixture_write_read_write_is_byte_identical(tmp_path, kind, seed):
    path = tmp_path / "f.txt"
    hio.write_correspondences(make_fixture(kind, seed=seed), path)
    first = path.read_text()
    again = hio.format_correspondences(hio.read_correspondences(path))
    assert again == first


@settings(max_examples=100, deadline=None)
@given(st.integers(4, 30), st.integers(0, 2 ** 32 - 1), st.booleans())
def test_arbitrary_sets_round_trip_without_loss(n, seed, with_conf):
    rng = np.random.default_rng(seed)
    corr = CorrespondenceSet(
        rng.normal(scale=10 ** rng.uniform(-3, 4), size=(n, 2)),
        rng.normal(scale=500, size=(n, 2)),
        reference_id="cls/1", query_id="q",
        confidence=rng.uniform(size=n) if with_conf else None,
        gt_epipoles=(rng.normal(size=3), rng.normal(size=3)))
    back = hio.parse_correspondences(hio.format_correspondences(corr))
    assert np.array_equal(back.ref, corr.ref) and np.array_equal(back.qry, corr.qry)
    assert all(np.array_equal(a, b) for a, b in zip(back.gt_epipoles, corr.gt_epipoles))
    if with_conf:
        assert np.array_equal(back.confidence, corr.confidence)
    assert hio.format_correspondences(back) == hio.format_correspondences(corr)


# run configuration

def test_config_overrides_defaults(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[run]\ncap = 50\nsampson-px = 2.5\nransac = yes\nepipole_mode = ground_truth\n")
    cfg = hio.read_config(path)
    assert cfg.cap == 50 and cfg.sampson_px == 2.5 and cfg.ransac is True
    assert cfg.epipole_mode == "ground_truth" and cfg.seed == MatchConfig().seed


def test_config_round_trips(tmp_path):
    path = tmp_path / "run.ini"
    cfg = MatchConfig(cap=7, outlier_filter=True, class_fusion="mean", clamp=0.5)
    path.write_text(hio.format_config(cfg))
    assert hio.read_config(path) == cfg


@pytest.mark.parametrize("body, message", [
    ("[run]\ncolour = red\n", "unknown config key"),
    ("[run]\nransac = maybe\n", "boolean"),
    ("[run]\ncap = 0\n", "cap"),
    ("[run]\nsampson_px = -1\n", "positive"),
    ("[other]\ncap = 3\n", "missing [run]"),
    ("cap = 3\n", "cannot read config"),
])
def test_bad_config_is_rejected(tmp_path, body, message):
    path = tmp_path / "run.ini"
    path.write_text(body)
    with pytest.raises(ParseError, match=message.replace("[", r"\[").replace("]", r"\]")):
        hio.read_config(path)


def test_shipped_example_config_parses():
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "docs" / "example_config.ini"
    assert hio.read_config(path) == MatchConfig()

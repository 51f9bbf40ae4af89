"""Metric specs, databases, exact queries, and the file formats."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privdist.metric import (Database, MetricKind, MetricSpec, ParseError,
                             QuerySet, avg_distance, coord_subgradient,
                             coord_value, coord_value_batch, cross_distances,
                             load_labels, load_matrix, load_points,
                             oracle_answers, save_points, sensitivity_probe,
                             validate_matrix)


def test_l1_spec_defaults():
    spec = MetricSpec.l1(3)
    assert spec.kind is MetricKind.L1
    assert spec.diameter == 3.0
    assert spec.coord_scale == 1.0
    assert spec.output_scale == 1.0


def test_l2_spec_default_diameter():
    assert MetricSpec.l2(4).diameter == pytest.approx(2.0)


def test_normalize_scales_distances():
    spec = MetricSpec.l1(2).normalize()
    assert spec.diameter == 1.0
    assert spec.coord_scale == pytest.approx(0.5)
    assert spec.output_scale == pytest.approx(2.0)
    assert spec.distance([0, 0], [1, 1]) == pytest.approx(1.0)
    # already within bounds: untouched
    unit = MetricSpec.l1(1)
    assert unit.normalize() is unit


def test_matrix_spec_normalizes_and_records_scale():
    m = np.array([[0.0, 2.0], [2.0, 0.0]])
    spec = MetricSpec.from_matrix(["a", "b"], m).normalize()
    assert spec.diameter == pytest.approx(1.0)
    assert spec.output_scale == pytest.approx(2.0)
    assert spec.distance(0, 1) == pytest.approx(1.0)


@pytest.mark.parametrize("bad, msg", [
    (np.array([[0.0, 1.0], [2.0, 0.0]]), "symmetric"),
    (np.array([[0.5, 1.0], [1.0, 0.0]]), "diagonal"),
    (np.array([[0.0, -1.0], [-1.0, 0.0]]), "nonnegative"),
    (np.array([[0.0, 1.0, 0.1], [1.0, 0.0, 0.1], [0.1, 0.1, 0.0]]), "triangle"),
])
def test_matrix_validation_rejects(bad, msg):
    labels = [str(i) for i in range(bad.shape[0])]
    with pytest.raises(ValueError, match=msg):
        validate_matrix(labels, bad)


def test_database_rejects_bad_points():
    spec = MetricSpec.l1(2)
    with pytest.raises(ValueError, match="dimension"):
        Database(spec, np.zeros((3, 3)))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        Database(spec, np.array([[0.5, 1.5]]))
    with pytest.raises(ValueError, match="finite"):
        Database(spec, np.array([[0.5, np.nan]]))
    with pytest.raises(ValueError, match="at least one"):
        Database(spec, np.zeros((0, 2)))


def test_database_points_are_frozen():
    db = Database(MetricSpec.l1(1), np.array([[0.5]]))
    with pytest.raises(ValueError):
        db.points[0, 0] = 0.1


def test_replace_point_builds_neighbor():
    db = Database(MetricSpec.l1(2), np.array([[0.1, 0.2], [0.3, 0.4]]))
    nb = db.replace_point(1, [0.9, 0.9])
    assert nb.n == db.n
    assert np.array_equal(nb.points[0], db.points[0])
    assert np.array_equal(nb.points[1], [0.9, 0.9])


def test_queryset_dedup_preserves_order():
    spec = MetricSpec.l1(1)
    qs = QuerySet(spec, np.array([[0.5], [0.1], [0.5], [0.9]]), dedup=True)
    assert qs.k == 3
    np.testing.assert_array_equal(qs.points.ravel(), [0.5, 0.1, 0.9])


def test_avg_distance_matches_brute_force(rng):
    spec = MetricSpec.l1(3).normalize()
    pts = rng.random((40, 3))
    db = Database(spec, pts)
    y = rng.random(3)
    brute = np.abs(pts - y).sum(axis=1).mean() / 3.0
    assert avg_distance(db, y) == pytest.approx(brute, rel=1e-12)
    # l1 average distance is the sum of its coordinate components
    total = sum(coord_value(db, i, y[i]) for i in range(3))
    assert total == pytest.approx(avg_distance(db, y), rel=1e-12)


def test_avg_distance_matrix_kind():
    m = np.array([[0.0, 0.4, 0.9], [0.4, 0.0, 0.6], [0.9, 0.6, 0.0]])
    spec = MetricSpec.from_matrix(list("abc"), m)
    db = Database.from_labels(spec, ["a", "a", "c"])
    assert avg_distance(db, "b") == pytest.approx((0.4 + 0.4 + 0.6) / 3)
    assert avg_distance(db, 0) == pytest.approx(0.9 / 3)


def test_coord_value_bounds_and_batch(rng):
    db = Database(MetricSpec.l1(2).normalize(), rng.random((30, 2)))
    ts = np.linspace(0, 1, 11)
    vals = coord_value_batch(db, 0, ts)
    assert (vals >= 0).all() and (vals <= db.spec.coord_scale + 1e-12).all()
    assert vals[3] == pytest.approx(coord_value(db, 0, ts[3]))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        coord_value(db, 0, 1.5)


def test_coord_value_rejects_non_l1():
    db = Database(MetricSpec.l2(2).normalize(), np.array([[0.5, 0.5]]))
    with pytest.raises(ValueError, match="l1"):
        coord_value(db, 0, 0.5)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=20),
       st.floats(0, 1), st.floats(0, 1))
def test_coord_value_is_convex_lipschitz_nonneg(xs, s, t):
    db = Database(MetricSpec.l1(1), np.array(xs)[:, None])
    fs, ft = coord_value(db, 0, s), coord_value(db, 0, t)
    mid = coord_value(db, 0, (s + t) / 2)
    assert fs >= 0 and ft >= 0
    assert abs(fs - ft) <= abs(s - t) + 1e-12
    assert mid <= (fs + ft) / 2 + 1e-12


def test_oracle_answers_all_kinds(rng):
    for spec in (MetricSpec.l1(2).normalize(), MetricSpec.l2(2).normalize()):
        db = Database(spec, rng.random((25, 2)))
        qs = QuerySet(spec, rng.random((7, 2)))
        ans = oracle_answers(db, qs)
        expect = [avg_distance(db, q) for q in qs.points]
        np.testing.assert_allclose(ans, expect, rtol=1e-12)


def test_cross_distances_shape(rng):
    spec = MetricSpec.l2(3).normalize()
    d = cross_distances(spec, rng.random((4, 3)), rng.random((6, 3)))
    assert d.shape == (4, 6)
    assert (d >= 0).all() and (d <= 1 + 1e-9).all()


def test_sensitivity_probe_small():
    db = Database(MetricSpec.l1(1), np.array([[0.0], [0.5], [1.0]]))
    nb = db.replace_point(0, [1.0])
    assert sensitivity_probe(db, nb, "coord_value") <= 1 / 3 + 1e-12
    assert sensitivity_probe(db, nb, "coord_subgradient") <= 2 / 3 + 1e-12
    with pytest.raises(ValueError, match="equal size"):
        sensitivity_probe(db, Database(db.spec, np.array([[0.5]])), "coord_value")


def test_subgradient_sign_convention():
    db = Database(MetricSpec.l1(1), np.array([[0.2], [0.8]]))
    assert coord_subgradient(db, 0, 0.0) == pytest.approx(-1.0)
    assert coord_subgradient(db, 0, 1.0) == pytest.approx(1.0)
    assert coord_subgradient(db, 0, 0.5) == pytest.approx(0.0)
    assert coord_subgradient(db, 0, 0.2) == pytest.approx(-0.5)


# ---------------------------------------------------------------------------
# File formats

def test_points_roundtrip(tmp_path, rng):
    path = tmp_path / "pts.csv"
    pts = rng.random((13, 3))
    save_points(path, pts)
    back, dim = load_points(path)
    assert dim == 3
    np.testing.assert_array_equal(back, pts)  # repr floats survive exactly


@pytest.mark.parametrize("text, line, msg", [
    ("", 1, "empty"),
    ("3\n0.1,0.2,0.3\n", 1, "dim="),
    ("dim=2\n0.1\n", 2, "expected 2"),
    ("dim=1\nfoo\n", 2, "bad number"),
    ("dim=1\n1.5\n", 2, "outside"),
    ("dim=1\nnan\n", 2, "non-finite"),
    ("dim=1\n", 1, "no rows"),
])
def test_points_parse_errors(tmp_path, text, line, msg):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ParseError, match=msg) as exc:
        load_points(path)
    assert exc.value.line == line


def test_matrix_file_roundtrip(tmp_path):
    m = np.array([[0.0, 1.2, 2.0], [1.2, 0.0, 1.5], [2.0, 1.5, 0.0]])
    path = tmp_path / "metric.csv"
    lines = ["labels=a,b,c"] + [",".join(repr(float(v)) for v in row)
                                for row in m]
    path.write_text("\n".join(lines) + "\n")
    spec = load_matrix(path)
    assert spec.labels == ("a", "b", "c")
    assert spec.diameter == pytest.approx(1.0)  # normalized on load
    assert spec.output_scale == pytest.approx(2.0)
    np.testing.assert_allclose(spec.matrix, m / 2.0)


def test_matrix_file_rejects_bad_metric(tmp_path):
    path = tmp_path / "metric.csv"
    path.write_text("labels=a,b\n0.0,1.0\n2.0,0.0\n")
    with pytest.raises(ParseError, match="symmetric"):
        load_matrix(path)


def test_label_file(tmp_path):
    path = tmp_path / "db.csv"
    path.write_text("labels=a, b ,a\n")
    assert load_labels(path) == ["a", "b", "a"]
    path.write_text("a,b\n")
    with pytest.raises(ParseError, match="labels="):
        load_labels(path)

import numpy as np
import pytest

from dppfit import patterns
from dppfit.errors import PatternFormatError
from dppfit.geometry import RectWindow
from dppfit.patterns import PointPattern, close_pairs, close_tuples, count


def make_pattern(pts, n=5.0):
    return PointPattern(np.asarray(pts, dtype=float), RectWindow.square(n))


def test_count():
    assert count(make_pattern(np.empty((0, 2)))) == 0
    assert count(make_pattern([(1, 1), (2, 2), (3, 3)])) == 3


def test_point_outside_window_rejected():
    with pytest.raises(ValueError):
        make_pattern([(6.0, 1.0)])


def test_count_monotone_under_subwindow_restriction():
    from dppfit import geometry
    from dppfit.geometry import RectWindow

    rng = np.random.default_rng(8)
    pat = make_pattern(rng.uniform(0, 5, size=(80, 2)))
    sub = RectWindow((1.0, 1.0), (4.0, 4.0))
    kept = pat.points[geometry.contains_points(sub, pat.points)]
    restricted = PointPattern(kept, sub)
    assert count(restricted) <= count(pat)


def test_close_pairs_ordered_convention():
    pat = make_pattern([(1.0, 1.0), (1.05, 1.0)])
    pairs = close_pairs(pat, 0.1)
    assert sorted(map(tuple, pairs)) == [(0, 1), (1, 0)]
    assert len(close_pairs(pat, 0.01)) == 0


def test_close_pairs_even_count():
    rng = np.random.default_rng(1)
    pat = make_pattern(rng.uniform(0, 5, size=(200, 2)))
    assert len(close_pairs(pat, 0.4)) % 2 == 0


def brute_force_pairs(pts, r):
    out = set()
    for i in range(len(pts)):
        for j in range(len(pts)):
            if i != j and np.linalg.norm(pts[i] - pts[j]) <= r:
                out.add((i, j))
    return out


def test_close_pairs_matches_brute_force():
    rng = np.random.default_rng(7)
    for trial in range(50):
        n = rng.integers(2, 120)
        pts = rng.uniform(0, 5, size=(n, 2))
        r = rng.uniform(0.05, 1.5)
        pat = make_pattern(pts)
        got = set(map(tuple, close_pairs(pat, r)))
        assert got == brute_force_pairs(pts, r)


def test_close_pairs_500_uniform_exact():
    rng = np.random.default_rng(123)
    pts = rng.uniform(0, 5, size=(500, 2))
    pat = make_pattern(pts)
    got = set(map(tuple, close_pairs(pat, 0.3)))
    assert got == brute_force_pairs(pts, 0.3)


def test_close_tuples_reduces_to_pairs():
    rng = np.random.default_rng(2)
    pat = make_pattern(rng.uniform(0, 5, size=(60, 2)))
    np.testing.assert_array_equal(close_tuples(pat, 0.5, 2), close_pairs(pat, 0.5))


def test_close_tuples_triangle():
    side = 0.1
    pat = make_pattern([(1, 1), (1 + side, 1), (1 + side / 2, 1 + side)])
    tuples = close_tuples(pat, 0.3, 3)
    assert len(tuples) == 6
    anchors = [t[0] for t in tuples]
    assert sorted(anchors) == [0, 0, 1, 1, 2, 2]


def test_close_tuples_anchor_only_constraint():
    # x2 close to anchor x1, x3 far from everything: no triple
    pat = make_pattern([(1.0, 1.0), (1.1, 1.0), (4.0, 4.0)])
    assert len(close_tuples(pat, 0.3, 3)) == 0
    # chain: x1-x2 close, x2-x3 close, x1-x3 far: anchoring at x2 gives
    # tuples even though x1 and x3 are mutually distant
    pat = make_pattern([(1.0, 1.0), (1.25, 1.0), (1.5, 1.0)])
    tuples = close_tuples(pat, 0.3, 3)
    assert sorted(map(tuple, tuples)) == [(1, 0, 2), (1, 2, 0)]


def test_close_tuples_matches_exhaustive_enumeration():
    rng = np.random.default_rng(9)
    pts = rng.uniform(0, 2, size=(25, 2))
    pat = make_pattern(pts)
    r = 0.6
    got = set(map(tuple, close_tuples(pat, r, 3)))
    expected = set()
    for a in range(25):
        for b in range(25):
            for c in range(25):
                if len({a, b, c}) != 3:
                    continue
                if np.linalg.norm(pts[a] - pts[b]) <= r and np.linalg.norm(pts[a] - pts[c]) <= r:
                    expected.add((a, b, c))
    assert got == expected


def test_close_tuples_order_cap():
    pat = make_pattern([(1, 1), (1.01, 1), (1.02, 1), (1.03, 1), (1.04, 1), (1.05, 1)])
    with pytest.raises(ValueError):
        close_tuples(pat, 0.2, 5)
    assert len(close_tuples(pat, 0.2, 5, allow_large=True)) > 0


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    pat = make_pattern(rng.uniform(0, 5, size=(100, 2)))
    path = tmp_path / "points.csv"
    patterns.write_csv(pat, path)
    back = patterns.read_csv(path)
    np.testing.assert_array_equal(back.points, pat.points)
    assert back.window == pat.window


def test_csv_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1.0,2.0\na,b\n")
    with pytest.raises(PatternFormatError) as err:
        patterns.read_csv(path, RectWindow.square(5.0))
    assert err.value.line == 3


def test_csv_point_outside_declared_window(tmp_path):
    path = tmp_path / "out.csv"
    path.write_text("x,y\n6.0,1.0\n")
    with pytest.raises(PatternFormatError):
        patterns.read_csv(path, RectWindow.square(5.0))


def test_csv_missing_sidecar(tmp_path):
    path = tmp_path / "nowin.csv"
    path.write_text("x,y\n1.0,1.0\n")
    with pytest.raises(PatternFormatError):
        patterns.read_csv(path)


def test_empirical_pcf_single_pair():
    pat = make_pattern([(2.0, 2.0), (2.05, 2.0)])
    res = patterns.empirical_pcf(pat, np.array([0.0, 0.02, 0.07, 0.2]))
    assert res["g"][0] is None
    assert res["g"][1] is not None and res["g"][1] > 0
    assert res["g"][2] is None


def test_empirical_pcf_poisson_near_one():
    # pooled over replicates to avoid empty-bin selection bias
    from dppfit.sampler import RngStream, sample_poisson

    w = RectWindow.square(5.0)
    bins = np.array([0.2, 0.3, 0.4])
    num = 0.0
    R = 300
    lam = 10.0
    for i in range(R):
        pat = sample_poisson(lam, w, RngStream(321, i))
        res = patterns.empirical_pcf(pat, bins)
        lam_hat = len(pat) / 25.0
        for k in range(len(bins) - 1):
            if res["g"][k] is not None:
                # undo the per-pattern lambda_hat^2 scaling, pool raw mass
                num += res["g"][k] * lam_hat**2 * np.pi * (bins[k + 1] ** 2 - bins[k] ** 2)
    denom = R * lam**2 * np.pi * (bins[-1] ** 2 - bins[0] ** 2)
    pooled = num / denom
    assert pooled == pytest.approx(1.0, abs=0.05)

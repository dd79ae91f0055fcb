import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heterobench._parallel import lanes
from heterobench.level2 import dwt, kmeans, lavamd, mandelbrot, nw, srad, where
from heterobench.level2.mandelbrot import INTERIOR, STANDARD_VIEW


# K-means ------------------------------------------------------------------

def test_kmeans_fixed_point_converges_in_one_iteration():
    sites = np.array([[0.0, 0.0], [5.0, 5.0], [-3.0, 7.0]])
    pts = np.repeat(sites, 10, axis=0)
    centers, labels, iters = kmeans.kmeans(pts, sites.copy(), 50)
    assert iters == 1
    assert np.array_equal(centers, sites)
    assert np.array_equal(labels, np.repeat([0, 1, 2], 10))


def test_kmeans_single_cluster_is_the_mean():
    pts = np.random.default_rng(0).standard_normal((100, 3))
    centers, _, _ = kmeans.kmeans(pts, pts[:1].copy(), 10)
    assert np.allclose(centers[0], pts.mean(axis=0), rtol=1e-12, atol=1e-14)


def test_kmeans_matches_sequential_lloyd_each_iteration():
    rng = np.random.default_rng(5)
    pts = rng.standard_normal((500, 4))
    init = kmeans.initial_centers(pts, 8, rng)
    for t in range(1, 8):
        c, lab, it = kmeans.kmeans(pts, init, t)
        rc, rl, rit = kmeans.kmeans_reference(pts, init, t)
        assert it == rit and np.array_equal(lab, rl)
        assert np.allclose(c, rc, rtol=1e-12, atol=1e-12)


def test_kmeans_wcss_non_increasing():
    rng = np.random.default_rng(1)
    pts = rng.standard_normal((2000, 5))
    hist = []
    kmeans.kmeans(pts, kmeans.initial_centers(pts, 10, rng), 30, history=hist)
    assert len(hist) >= 2
    assert all(b <= a * (1 + 1e-12) for a, b in zip(hist, hist[1:]))


def test_kmeans_k_greater_than_n():
    with pytest.raises(ValueError):
        kmeans.kmeans(np.zeros((3, 2)), np.zeros((4, 2)), 5)


def test_kmeans_lane_independent():
    rng = np.random.default_rng(4)
    pts = rng.standard_normal((5000, 3))
    init = kmeans.initial_centers(pts, 6, rng)
    with lanes(1):
        a = kmeans.kmeans(pts, init, 10)
    with lanes(8):
        b = kmeans.kmeans(pts, init, 10)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


# LavaMD -------------------------------------------------------------------

def space_from(positions, charges, boxes=1, cutoff=0.5):
    pos = np.array(positions, dtype=np.float64)
    return lavamd.ParticleSpace(boxes, len(pos) // boxes ** 3, pos, np.array(charges, dtype=np.float64), cutoff)


def test_lavamd_pairs_beyond_cutoff_do_not_interact():
    s = space_from([[0.1, 0.1, 0.1], [0.9, 0.9, 0.9]], [1.0, 1.0], cutoff=0.5)
    assert np.array_equal(lavamd.lavamd(s), np.zeros((2, 4)))


def test_lavamd_single_particle_feels_nothing():
    s = space_from([[0.5, 0.5, 0.5]], [1.0])
    assert np.array_equal(lavamd.lavamd(s), np.zeros((1, 4)))


def test_lavamd_matches_all_pairs_oracle():
    s = lavamd.random_space(3, 16, np.random.default_rng(9))
    got, ref = lavamd.lavamd(s), lavamd.lavamd_reference(s)
    assert np.abs(got - ref).max() <= 1e-10 * np.abs(ref).max()


def test_lavamd_rejects_cutoff_beyond_box():
    with pytest.raises(ValueError):
        lavamd.random_space(2, 4, np.random.default_rng(0), cutoff=1.5)


def test_lavamd_neighbor_count_bound():
    s = lavamd.random_space(4, 8, np.random.default_rng(2), cutoff=0.7)
    assert np.allclose(lavamd.lavamd(s), lavamd.lavamd_reference(s), rtol=1e-10, atol=1e-12)


# Mandelbrot ---------------------------------------------------------------

def test_origin_never_escapes():
    assert mandelbrot.escape_dwell(0j, 1000) == INTERIOR


def test_c_equals_two_escapes_at_iteration_two():
    # z1 = 2 gives |z1|^2 = 4 (not > 4); z2 = 6 escapes
    assert mandelbrot.escape_dwell(2 + 0j, 100) == 2


def test_doubling_max_iter_never_decreases_dwell():
    a = mandelbrot.mandelbrot_escape(STANDARD_VIEW, 96, 64, 64).dwell.astype(np.int64)
    b = mandelbrot.mandelbrot_escape(STANDARD_VIEW, 96, 64, 128).dwell.astype(np.int64)
    big = np.iinfo(np.int64).max
    a[a == INTERIOR] = big
    b[b == INTERIOR] = big
    assert (b >= np.minimum(a, b)).all() and (b[a != big] == a[a != big]).all()


def test_escape_zero_area_view():
    with pytest.raises(ValueError):
        mandelbrot.mandelbrot_escape((0.0, 0.0, -1.0, 1.0), 10, 10, 10)


def test_interior_rectangle_is_filled_without_iterating_inside():
    view = (-0.3, -0.1, -0.1, 0.1)   # inside the main cardioid
    img = mandelbrot.mandelbrot_mariani_silver(view, 64, 64, 200, min_tile=4)
    assert (img.dwell == INTERIOR).all()
    assert img.pixels_iterated == 4 * 64 - 4


def test_mariani_silver_standard_view_512():
    ms = mandelbrot.mandelbrot_mariani_silver(STANDARD_VIEW, 512, 512, 256, 16)
    esc = mandelbrot.mandelbrot_escape(STANDARD_VIEW, 512, 512, 256)
    assert mandelbrot.agreement(ms, esc) >= 0.999
    assert ms.pixels_iterated < 512 * 512


def test_image_below_min_tile_equals_escape():
    ms = mandelbrot.mandelbrot_mariani_silver(STANDARD_VIEW, 12, 9, 100, min_tile=16)
    esc = mandelbrot.mandelbrot_escape(STANDARD_VIEW, 12, 9, 100)
    assert np.array_equal(ms.dwell, esc.dwell) and ms.pixels_iterated == 12 * 9


def test_min_tile_validation():
    with pytest.raises(ValueError):
        mandelbrot.mandelbrot_mariani_silver(STANDARD_VIEW, 32, 32, 10, min_tile=1)


# Needleman-Wunsch ---------------------------------------------------------

def test_identical_sequences_align_without_gaps():
    pair = nw.SequencePair.from_strings("GATTACA", "GATTACA")
    al = nw.needleman_wunsch(pair)
    assert al.score == 7 and nw.GAP not in al.a and nw.GAP not in al.b


def test_single_mismatch_beats_two_gaps():
    assert nw.needleman_wunsch(nw.SequencePair.from_strings("A", "G")).score == -1


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        nw.SequencePair.from_strings("A", "")


def test_random_length8_pairs_match_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(10):
        a = rng.integers(0, 4, size=8, dtype=np.int32)
        b = rng.integers(0, 4, size=8, dtype=np.int32)
        pair = nw.SequencePair(a, b, nw.default_similarity(4))
        assert nw.needleman_wunsch(pair).score == nw.bruteforce_score(pair)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=7),
       st.lists(st.integers(0, 3), min_size=1, max_size=7), st.integers(-3, 0))
def test_nw_properties(a, b, gap):
    pair = nw.SequencePair(np.array(a, dtype=np.int32), np.array(b, dtype=np.int32),
                           nw.default_similarity(4, 2, -1), gap)
    al = nw.needleman_wunsch(pair)
    assert al.score == nw.bruteforce_score(pair)
    assert al.score == nw.needleman_wunsch(pair.swapped()).score
    assert nw.alignment_score(al.a, al.b, pair.similarity, gap) == al.score
    assert np.array_equal(al.a[al.a != nw.GAP], pair.a) and np.array_equal(al.b[al.b != nw.GAP], pair.b)
    assert np.array_equal(al.matrix, nw.reference_matrix(pair))


# SRAD ---------------------------------------------------------------------

def speckled(n=64, seed=0):
    rng = np.random.default_rng(seed)
    base = np.ones((n, n)) + (np.arange(n)[None, :] > n // 2)
    return (base * rng.gamma(4.0, 0.25, size=(n, n))).astype(np.float32)


def test_srad_constant_image_is_fixed_point():
    img = np.full((20, 30), 3.25, dtype=np.float32)
    assert np.array_equal(srad.srad(img, 0.5, 7), img)


def test_srad_one_iteration_reduces_variance():
    img = speckled()
    assert srad.srad(img, 0.5, 1).var(dtype=np.float64) < img.var(dtype=np.float64)


def test_srad_parallel_equals_sequential_bitwise():
    img = speckled(97, 3)
    with lanes(8):
        got = srad.srad(img, 0.5, 5)
    assert np.array_equal(got, srad.srad_reference(img, 0.5, 5))


def test_srad_input_checks():
    with pytest.raises(ValueError):
        srad.srad(np.ones((2, 5), dtype=np.float32))
    with pytest.raises(ValueError):
        srad.srad(np.ones((5, 5), dtype=np.float32), lam=0.0)


# Where --------------------------------------------------------------------

def test_where_always_true_and_false():
    t = where.random_table(1000, 2, np.random.default_rng(0))
    everything = where.where_filter(t, where.Predicate((("col0", ">=", 0),)))
    nothing = where.where_filter(t, where.Predicate((("col0", "<", 0),)))
    assert all(np.array_equal(everything[c], t[c]) for c in t)
    assert all(len(nothing[c]) == 0 for c in t)


def test_where_matches_sequential_filter():
    t = where.random_table(10 ** 5, 3, np.random.default_rng(13))
    p = where.Predicate((("col0", "<", 500),))
    got, ref = where.where_filter(t, p), where.where_reference(t, p)
    assert all(np.array_equal(got[c], ref[c]) for c in t)
    assert len(got["col0"]) == int((t["col0"] < 500).sum())


def test_where_unknown_column():
    with pytest.raises(KeyError):
        where.where_filter({"a": np.arange(3)}, where.Predicate((("b", "<", 1),)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 3000), st.integers(0, 1000), st.sampled_from(["<", "<=", ">", ">=", "==", "!="]),
       st.integers(0, 2 ** 32))
def test_where_partition_property(n, value, op, seed):
    t = where.random_table(n, 2, np.random.default_rng(seed), high=50)
    p = where.Predicate((("col0", op, value % 50), ("col1", ">", 10)))
    yes, no = where.where_filter(t, p), where.where_filter(t, p.negate())
    ref = where.where_reference(t, p)
    assert all(np.array_equal(yes[c], ref[c]) for c in t)
    idx = np.concatenate([yes["col0"], no["col0"]])
    assert np.array_equal(np.sort(idx), np.sort(t["col0"]))
    assert len(yes["col0"]) + len(no["col0"]) == n


# DWT ----------------------------------------------------------------------

def test_constant_image_has_zero_highpass_53():
    img = np.full((64, 32), 77, dtype=np.int32)
    out = dwt.dwt2d(img, "int_5_3", "forward", 3)
    assert (out[dwt.highpass_mask(out.shape, 3)] == 0).all()


def test_53_round_trip_is_exact():
    img = np.random.default_rng(0).integers(-500, 500, size=(128, 64), dtype=np.int32)
    fwd = dwt.dwt2d(img, "int_5_3", "forward", 4)
    assert np.array_equal(dwt.dwt2d(fwd, "int_5_3", "inverse", 4), img)


def test_97_round_trip_within_tolerance():
    img = np.random.default_rng(1).random((128, 128), dtype=np.float32) * 255
    back = dwt.dwt2d(dwt.dwt2d(img, "float_9_7", "forward", 3), "float_9_7", "inverse", 3)
    assert np.abs(back - img).max() < 1e-4 * 255


def test_dwt_dimension_check():
    with pytest.raises(ValueError):
        dwt.dwt2d(np.zeros((12, 16), dtype=np.int32), "int_5_3", "forward", 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2 ** 32))
def test_53_round_trip_property(levels, hm, wm, seed):
    h, w = hm << levels, wm << levels
    img = np.random.default_rng(seed).integers(-1000, 1000, size=(h, w), dtype=np.int32)
    assert np.array_equal(dwt.dwt2d(dwt.dwt2d(img, "int_5_3", "forward", levels), "int_5_3",
                                    "inverse", levels), img)

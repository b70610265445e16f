import numpy as np
import pytest

from dexsim.correlator import (
    CorrelationHistogram,
    CorrelationPair,
    cross_correlate,
    cross_correlate_brute,
    degree_of_correlation,
    merge_histograms,
    normalize,
    read_curve_csv,
    read_histogram_csv,
    start_stop_correlate,
    windowed_degree,
    write_curve_csv,
    write_histogram_csv,
)


def _pair(window=5.0, width=0.5):
    return CorrelationPair("a", "b", window=window, bin_width=width)


def test_two_stop_events_land_in_their_bins():
    h = cross_correlate(np.array([0.0]), np.array([1.0, 2.0]), _pair())
    assert h.counts.sum() == 2
    centers = h.tau_centers
    for tau in (1.0, 2.0):
        k = int(np.argmin(np.abs(centers - (tau + 0.25))))
        assert h.counts[k] == 1


def test_autocorrelation_symmetric_with_zero_peak():
    rng = np.random.default_rng(0)
    t = np.sort(rng.uniform(0, 1000, 400))
    h = cross_correlate(t, t, _pair(window=10.0, width=1.0))
    # the 400 self pairs sit exactly on the tau=0 edge, inside the 10th bin;
    # mutual pairs are mirror-symmetric up to that binning artifact
    counts = h.counts.copy()
    assert counts[10] >= 400
    counts[10] -= 400
    assert np.array_equal(counts, counts[::-1])
    assert int(np.argmax(h.counts)) == 10  # peak at tau = 0


def test_swap_mirrors_the_histogram():
    rng = np.random.default_rng(1)
    a = np.sort(rng.uniform(0, 500, 300))
    b = np.sort(rng.uniform(0, 500, 250))
    h_ab = cross_correlate(a, b, _pair(window=8.0, width=1.0))
    h_ba = cross_correlate(b, a, _pair(window=8.0, width=1.0))
    assert np.array_equal(h_ab.counts, h_ba.counts[::-1])


def test_poisson_pair_rate_matches_expectation():
    # E[counts per bin] = r_a * r_b * duration * bin_width for independent
    # Poisson streams (all-pairs within the window)
    rng = np.random.default_rng(2)
    rate, duration = 0.01, 1.0e6
    a = np.cumsum(rng.exponential(1.0 / rate, int(rate * duration)))
    b = np.cumsum(rng.exponential(1.0 / rate, int(rate * duration)))
    pair = CorrelationPair("a", "b", window=10.0, bin_width=0.1)
    h = cross_correlate(a, b, pair, span=duration)
    expected = rate * rate * duration * 0.1
    mean = h.counts.mean()
    assert abs(mean - expected) < 4 * np.sqrt(expected / len(h.counts))
    g = normalize(h)
    inside = np.abs(g.g2 - 1.0) <= 4 * g.g2_err
    assert inside.mean() > 0.99


def test_brute_force_equivalence_small_streams():
    rng = np.random.default_rng(3)
    for _ in range(25):
        na, nb = rng.integers(0, 200, 2)
        a = np.sort(rng.uniform(0, 50, na))
        b = np.sort(rng.uniform(0, 50, nb))
        width = rng.uniform(0.05, 1.0)
        window = width * rng.integers(3, 40)
        pair = CorrelationPair("a", "b", window=window, bin_width=width)
        fast = cross_correlate(a, b, pair)
        brute = cross_correlate_brute(a, b, pair)
        assert np.array_equal(fast.counts, brute.counts)


def test_empty_stream_gives_flagged_zero_histogram():
    h = cross_correlate(np.array([]), np.array([1.0, 2.0]), _pair())
    assert h.empty_input
    assert h.counts.sum() == 0
    with pytest.raises(ValueError, match="singles"):
        normalize(h)


def test_normalize_zero_counts_flags_infinite_error():
    h = CorrelationHistogram(
        bin_edges=np.array([0.0, 1.0, 2.0]),
        counts=np.array([0, 4]),
        n_start=10,
        n_stop=10,
        span=100.0,
    )
    g = normalize(h)
    assert g.g2[0] == 0.0 and np.isinf(g.g2_err[0])
    assert g.g2[1] == pytest.approx(4 * 100.0 / (10 * 10 * 1.0))
    assert g.g2_err[1] == pytest.approx(g.g2[1] / 2.0)


def test_normalize_scale_invariance():
    edges = np.linspace(-5, 5, 11)
    base = CorrelationHistogram(edges, np.arange(10), 100, 50, 1000.0)
    # doubling the efficiency of both channels: singles double, coincidences
    # quadruple, g2 unchanged
    both = CorrelationHistogram(edges, 4 * np.arange(10), 200, 100, 1000.0)
    assert np.allclose(normalize(base).g2, normalize(both).g2)
    # doubling one channel: its singles and the coincidences double
    one = CorrelationHistogram(edges, 2 * np.arange(10), 200, 50, 1000.0)
    assert np.allclose(normalize(base).g2, normalize(one).g2)
    # doubling the acquisition: counts, both singles and span all double
    longer = CorrelationHistogram(edges, 2 * np.arange(10), 200, 100, 2000.0)
    assert np.allclose(normalize(base).g2, normalize(longer).g2)


def test_degree_of_correlation_values_and_errors():
    edges = np.array([0.0, 1.0])

    def hist(counts):
        return normalize(
            CorrelationHistogram(bin_edges=edges, counts=np.array([counts]),
                                 n_start=100, n_stop=100, span=100.0)
        )

    curve = degree_of_correlation(hist(200), hist(100))
    assert curve.c[0] == pytest.approx(1.0 / 3.0)
    curve_eq = degree_of_correlation(hist(150), hist(150))
    assert curve_eq.c[0] == pytest.approx(0.0)


def test_degree_swap_antisymmetry_and_bounds():
    rng = np.random.default_rng(4)
    edges = np.linspace(-2, 2, 21)
    counts_a = rng.integers(0, 50, 20)
    counts_b = rng.integers(0, 50, 20)

    def hist(counts):
        return normalize(
            CorrelationHistogram(bin_edges=edges, counts=counts, n_start=500,
                                 n_stop=500, span=1000.0)
        )

    fwd = degree_of_correlation(hist(counts_a), hist(counts_b))
    rev = degree_of_correlation(hist(counts_b), hist(counts_a))
    d = fwd.defined
    assert np.allclose(fwd.c[d], -rev.c[d], equal_nan=True)
    assert np.all(np.abs(fwd.c[d]) <= 1.0 + 1e-12)
    assert not fwd.defined[(counts_a + counts_b) == 0].any()


def test_degree_requires_matching_binning():
    h1 = CorrelationHistogram(np.linspace(-1, 1, 5), np.ones(4, int), 10, 10, 10.0)
    h2 = CorrelationHistogram(np.linspace(-2, 2, 5), np.ones(4, int), 10, 10, 10.0)
    with pytest.raises(ValueError, match="binning"):
        degree_of_correlation(normalize(h1), normalize(h2))


def test_merge_adds_counts_and_singles():
    edges = np.linspace(-1, 1, 5)
    h1 = CorrelationHistogram(edges, np.array([1, 2, 3, 4]), 10, 20, 50.0, "a", "b")
    h2 = CorrelationHistogram(edges, np.array([4, 3, 2, 1]), 5, 2, 50.0, "c", "d")
    m = merge_histograms(h1, h2)
    assert np.array_equal(m.counts, [5, 5, 5, 5])
    assert (m.n_start, m.n_stop) == (15, 22)
    with pytest.raises(ValueError, match="span"):
        merge_histograms(h1, CorrelationHistogram(edges, np.ones(4, int), 1, 1, 60.0))


def test_start_stop_uses_only_next_stop():
    a = np.array([0.0, 10.0])
    b = np.array([1.0, 2.0, 11.0])
    h = start_stop_correlate(a, b, _pair(window=5.0, width=0.5))
    assert h.counts.sum() == 2  # 0->1 and 10->11, the 2.0 stop is skipped


def test_windowed_degree_from_counts():
    edges = np.linspace(0.0, 2.0, 3)
    h_co = CorrelationHistogram(edges, np.array([30, 0]), 10, 10, 10.0)
    h_cr = CorrelationHistogram(edges, np.array([10, 0]), 10, 10, 10.0)
    c, err = windowed_degree(h_co, h_cr, 0.0, 1.0)
    assert c == pytest.approx(0.5)
    assert err > 0


def test_histogram_csv_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    a = np.sort(rng.uniform(0, 100, 50))
    b = np.sort(rng.uniform(0, 100, 60))
    h = normalize(cross_correlate(a, b, _pair(window=4.0, width=0.25), span=100.0))
    path = tmp_path / "hist.csv"
    write_histogram_csv(h, path)
    back = read_histogram_csv(path)
    assert np.array_equal(back.counts, h.counts)
    assert np.allclose(back.bin_edges, h.bin_edges)
    assert np.allclose(back.g2, h.g2)
    assert (back.n_start, back.n_stop, back.span) == (h.n_start, h.n_stop, h.span)


def test_curve_csv_round_trip(tmp_path):
    edges = np.linspace(-1, 1, 9)
    rng = np.random.default_rng(6)
    h1 = normalize(CorrelationHistogram(edges, rng.integers(1, 30, 8), 50, 50, 100.0))
    h2 = normalize(CorrelationHistogram(edges, rng.integers(1, 30, 8), 50, 50, 100.0))
    curve = degree_of_correlation(h1, h2)
    path = tmp_path / "curve.csv"
    write_curve_csv(curve, path)
    back = read_curve_csv(path)
    assert np.allclose(back.tau, curve.tau)
    assert np.allclose(back.c, curve.c)
    assert np.allclose(back.c_err, curve.c_err)
    assert np.array_equal(back.defined, curve.defined)


def test_pair_validation():
    with pytest.raises(ValueError):
        CorrelationPair("a", "b", window=1.0, bin_width=0.0)
    with pytest.raises(ValueError):
        CorrelationPair("a", "b", window=0.1, bin_width=0.5)

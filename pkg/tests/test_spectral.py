import numpy as np
import pytest

from qgraphlab import (ConfigurationError, SolverError, build_complete_graph,
                       eigenphases, evolution_map, find_levels,
                       graph_from_lengths, merge_spectra, split_window,
                       unfold, winding_count)


class TestEigenphases:
    def test_sorted_in_range(self, graph_v4):
        th = eigenphases(graph_v4, 3.3)
        assert len(th) == graph_v4.index.size
        assert np.all(np.diff(th) >= 0)
        assert th.min() >= 0.0 and th.max() < 2 * np.pi

    def test_velocity_within_length_bounds(self, graph_v6):
        # each eigenphase moves with d(theta)/dk inside [L_min, L_max]
        k, h = 17.0, 1e-6
        a = np.sort(eigenphases(graph_v6, k))
        b = np.sort(eigenphases(graph_v6, k + h))
        # alignment by sorted order is safe for a tiny step away from crossings
        vel = (np.unwrap(b - a + np.pi) - np.pi) / h
        lo, hi = graph_v6.lengths.min(), graph_v6.lengths.max()
        assert vel.min() > lo - 0.02
        assert vel.max() < hi + 0.02


class TestWinding:
    def test_integer_and_telescoping(self, graph_v6):
        n_ac = winding_count(graph_v6, 10.0, 14.0)
        n_ab = winding_count(graph_v6, 10.0, 12.3)
        n_bc = winding_count(graph_v6, 12.3, 14.0)
        assert n_ac == n_ab + n_bc

    def test_matches_mean_density(self, graph_v6):
        span = 30.0
        n = winding_count(graph_v6, 10.0, 10.0 + span)
        expected = span * graph_v6.mean_density()
        assert abs(n - expected) < 3 * np.sqrt(expected)


class TestIntervalOracle:
    def test_single_bond_levels(self):
        L = np.pi
        g = graph_from_lengths(2, [L])
        res = find_levels(g, 0.5, 5.5)
        assert res.count == 5
        assert np.abs(res.levels - np.arange(1, 6) * np.pi / L).max() < 1e-9

    def test_generic_length(self):
        L = 1.37
        g = graph_from_lengths(2, [L])
        res = find_levels(g, 1.0, 20.0)
        n = np.arange(1, 20)
        want = n * np.pi / L
        want = want[(want > 1.0) & (want <= 20.0)]
        assert res.count == len(want)
        assert np.abs(res.levels - want).max() < 1e-9


class TestDegenerateSpectra:
    def test_triangle_is_a_circle(self):
        # valency-2 Neumann vertices are transparent, so the V=3 graph has
        # the doubly degenerate spectrum of a circle of the total length
        g = build_complete_graph(3, seed=2)
        C = g.total_length
        res = find_levels(g, 1.0, 12.0)
        n = np.arange(1, 40)
        base = 2 * np.pi * n / C
        base = base[(base > 1.0) & (base <= 12.0)]
        want = np.sort(np.repeat(base, 2))
        assert res.count == len(want)
        assert np.abs(res.levels - want).max() < 1e-7
        assert res.degenerate_flags is not None
        assert res.degenerate_flags.sum() == len(want)


class TestFindLevels:
    @pytest.mark.parametrize("seed,V", [(1, 4), (2, 5), (3, 7)])
    def test_count_equals_winding(self, seed, V):
        g = build_complete_graph(V, seed=seed)
        res = find_levels(g, 8.0, 14.0)
        assert res.count == res.winding_count
        assert np.all(np.diff(res.levels) >= 0)
        assert np.all((res.levels > 8.0) & (res.levels <= 14.0))

    def test_levels_are_secular_zeros(self, graph_v6):
        # at a level, some eigenphase of U(k) sits on 0 mod 2pi
        res = find_levels(graph_v6, 12.0, 16.0, target_tol=1e-10)
        L_max = graph_v6.lengths.max()
        for k in res.levels:
            th = eigenphases(graph_v6, k)
            dist = np.minimum(th, 2 * np.pi - th).min()
            assert dist < 4 * 1e-10 * L_max

    def test_coarse_grid_recovery(self, graph_v4):
        # a deliberately coarse scan forces the deficit-drill path
        fine = find_levels(graph_v4, 10.0, 13.0)
        coarse = find_levels(graph_v4, 10.0, 13.0, grid_step=0.8)
        assert coarse.count == fine.count
        assert np.abs(coarse.levels - fine.levels).max() < 1e-8

    def test_invalid_window(self, graph_v4):
        with pytest.raises(ConfigurationError):
            find_levels(graph_v4, 5.0, 5.0)

    def test_depth_exhaustion_raises(self):
        g = build_complete_graph(3, seed=2)   # exactly degenerate levels
        with pytest.raises(SolverError):
            # forbidding collisions makes the doubled roots unresolvable
            find_levels(g, 1.0, 8.0, collision_floor=0.0, max_depth=6)


class TestMergeAndUnfold:
    def test_split_matches_whole(self, graph_v6):
        whole = find_levels(graph_v6, 10.0, 16.0)
        parts = [find_levels(graph_v6, a, b)
                 for a, b in split_window(10.0, 16.0,
                                          graph_v6.mean_density(), 12.0)]
        merged = merge_spectra(parts)
        assert merged.count == whole.count
        assert merged.winding_count == whole.winding_count
        assert np.abs(merged.levels - whole.levels).max() < 1e-10

    def test_merge_rejects_gaps(self, graph_v6):
        a = find_levels(graph_v6, 10.0, 11.0)
        b = find_levels(graph_v6, 11.5, 12.5)
        with pytest.raises(ConfigurationError):
            merge_spectra([a, b])

    def test_unfold_scales_by_density(self, graph_v4):
        res = find_levels(graph_v4, 9.0, 12.0)
        x = unfold(res)
        assert np.array_equal(x.values, res.levels * res.mean_density)
        spacing = np.mean(np.diff(x.values))
        assert spacing == pytest.approx(1.0, abs=0.35)

    def test_unfold_raw_needs_density(self):
        with pytest.raises(ConfigurationError):
            unfold(np.array([1.0, 2.0]))

    def test_split_window_tiles(self):
        parts = split_window(3.0, 9.0, 10.0, 16.0)
        assert parts[0][0] == 3.0 and parts[-1][1] == 9.0
        for (a0, b0), (a1, b1) in zip(parts[:-1], parts[1:]):
            assert b0 == a1


class TestWeylLaw:
    def test_counting_function(self):
        g = build_complete_graph(8, seed=17)
        res = find_levels(g, 5.0, 20.0)
        expected = 15.0 * g.mean_density()
        assert abs(res.count - expected) < 3 * np.sqrt(res.count)


@pytest.fixture(scope="module")
def fluctuation_psd():
    g = build_complete_graph(8, seed=81)
    d = g.mean_density()
    span = 2000.0 / d
    res = find_levels(g, 8.0, 8.0 + span)
    m = 2 ** 16
    kg = np.linspace(8.0, 8.0 + span, m, endpoint=False)
    nfl = np.searchsorted(res.levels, kg) - (kg - 8.0) * d
    nfl = nfl - nfl.mean()
    F = np.fft.rfft(nfl) / m
    psd = 2.0 * np.abs(F[1:]) ** 2
    omega = 2.0 * np.pi * np.arange(1, len(F)) / span
    return g, omega, psd


class TestCountingFluctuations:
    """Spectroscopy of the staircase fluctuation N(k) - k<d_R>.

    The fluctuation is a sum of oscillations at the periodic-orbit
    frequencies, so its power spectrum is a hard pipeline check: any
    missed, duplicated, or drifting level dumps power below the shortest
    orbit frequency 2 L_min, where a clean spectrum has none. The
    self-retracing bounce orbits (out and back along one bond) dominate
    the band [2 L_min, 2 L_max] with per-bond variance A^2/(2 pi^2),
    A = (2/(V-1) - 1)^2 the product of the two end backscatters.
    """

    def test_no_power_below_shortest_orbit(self, fluctuation_psd):
        g, omega, psd = fluctuation_psd
        lo = 2.0 * g.lengths.min()
        sub = psd[(omega >= 0.2) & (omega < lo - 0.15)].sum()
        assert sub < 0.01

    def test_bounce_band_power_matches_backscatter(self, fluctuation_psd):
        g, omega, psd = fluctuation_psd
        lo, hi = 2.0 * g.lengths.min(), 2.0 * g.lengths.max()
        band = psd[(omega >= lo - 0.05) & (omega < hi + 0.05)].sum()
        A = (2.0 / 7.0 - 1.0) ** 2
        predicted = g.index.B * A ** 2 / (2.0 * np.pi ** 2)
        assert band == pytest.approx(predicted, rel=0.3)

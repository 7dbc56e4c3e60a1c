import numpy as np
import pytest

from qgraphlab import (ConfigurationError, build_complete_graph, gap_scan,
                       mixing_decay, open_graph, pf_operator, pf_spectrum)


class TestPfOperator:
    def test_v2_is_the_swap(self):
        g = build_complete_graph(2, seed=0)
        F = pf_operator(g)
        assert np.array_equal(F.matrix, np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert not F.substochastic

    def test_neumann_entries_v4(self):
        # valency 3: back-scatter |2/3 - 1|^2 = 1/9, transmission |2/3|^2 = 4/9
        g = build_complete_graph(4, seed=1)
        F = pf_operator(g).matrix
        vals = np.unique(np.round(F[F > 0], 12))
        assert vals == pytest.approx([1.0 / 9.0, 4.0 / 9.0])

    @pytest.mark.parametrize("V,kind", [(4, "neumann"), (6, "neumann"),
                                        (5, "random")])
    def test_doubly_stochastic(self, V, kind):
        g = build_complete_graph(V, condition_kind=kind, seed=V)
        F = pf_operator(g).matrix
        assert np.abs(F.sum(axis=0) - 1.0).max() < 1e-12
        assert np.abs(F.sum(axis=1) - 1.0).max() < 1e-12

    def test_open_graph_leaks_mass(self):
        g = build_complete_graph(5, seed=3)
        og = open_graph(g, 2, [1.0, 1.3])
        F = pf_operator(og)
        assert F.substochastic
        col = F.matrix.sum(axis=0)
        assert col.max() <= 1.0 + 1e-12
        assert col.min() < 1.0 - 1e-3


class TestPfSpectrum:
    def test_accepts_plain_matrix(self):
        spec = pf_spectrum(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert sorted(np.round(spec.eigenvalues.real, 12)) == [-1.0, 1.0]

    def test_v2_nonmixing(self):
        g = build_complete_graph(2, seed=0)
        spec = pf_spectrum(pf_operator(g))
        assert spec.gap == pytest.approx(0.0, abs=1e-14)
        assert not spec.mixing

    def test_triangle_degenerate_unit_eigenvalue(self):
        # transparent valency-2 vertices make the operator a permutation with
        # two cycles; this must report non-mixing, not raise
        g = build_complete_graph(3, seed=2)
        spec = pf_spectrum(pf_operator(g))
        assert not spec.perron_simple
        assert not spec.mixing
        assert spec.gap == pytest.approx(0.0, abs=1e-12)

    def test_v6_mixes(self):
        g = build_complete_graph(6, seed=4)
        spec = pf_spectrum(pf_operator(g))
        assert spec.mixing and spec.perron_simple
        assert spec.gap > 0.1
        assert spec.perron_value == pytest.approx(1.0, abs=1e-12)
        n = len(spec.perron_vector)
        assert spec.perron_vector == pytest.approx(np.full(n, 1.0 / n))

    def test_masses(self):
        g = build_complete_graph(4, seed=1)
        spec = pf_spectrum(pf_operator(g))
        assert spec.masses == pytest.approx(1.0 - spec.eigenvalues)
        assert abs(spec.masses[0]) < 1e-12


class TestMixingDecay:
    def test_rate_matches_subleading_eigenvalue(self):
        g = build_complete_graph(6, seed=4)
        dec = mixing_decay(pf_operator(g), m_max=60)
        assert dec.converged
        assert dec.fitted_rate == pytest.approx(dec.expected_rate, rel=0.10)

    def test_nonmixing_warns_instead_of_fitting(self):
        g = build_complete_graph(2, seed=0)
        dec = mixing_decay(pf_operator(g), m_max=20)
        assert dec.fitted_rate is None
        assert not dec.converged
        assert dec.warning
        # the swap never relaxes a point mass
        assert dec.distances[-1] == pytest.approx(dec.distances[0])

    def test_custom_initial_density(self):
        g = build_complete_graph(5, seed=9)
        n = g.index.size
        r0 = np.zeros(n)
        r0[3] = 1.0
        dec = mixing_decay(pf_operator(g), r0=r0, m_max=50)
        assert dec.converged

    def test_initial_density_validation(self):
        g = build_complete_graph(4, seed=1)
        op = pf_operator(g)
        n = op.size
        with pytest.raises(ConfigurationError):
            mixing_decay(op, r0=np.ones(n))          # mass n, not 1
        bad = np.zeros(n)
        bad[0], bad[1] = 1.5, -0.5
        with pytest.raises(ConfigurationError):
            mixing_decay(op, r0=bad)                 # negative entry
        with pytest.raises(ConfigurationError):
            mixing_decay(op, r0=np.ones(3) / 3)      # wrong shape


class TestGapScan:
    def test_monotone_family(self):
        scan = gap_scan([4, 6, 8], seeds=11)
        assert np.all(scan["gaps"] > 0)
        assert np.all(scan["mixing"])
        assert np.array_equal(scan["bond_counts"], [6, 15, 28])

    def test_v2_in_scan_reports_zero_gap(self):
        scan = gap_scan([2, 4], seeds=5)
        assert scan["gaps"][0] == pytest.approx(0.0, abs=1e-14)
        assert not scan["mixing"][0]
        assert scan["mixing"][1]

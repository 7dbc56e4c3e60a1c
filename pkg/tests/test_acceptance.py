"""Acceptance gates for the whole package.

Nine end-to-end criteria, one test each. Every test prints a single
``criterion N: PASS/FAIL`` line with its measured numbers so a log scrape
shows the full scorecard. Heavy inputs (the big closed spectrum, the GOE
reference ensembles, the open-system sample grids) are built once in module
fixtures and shared by the tests that need them.

Budgets are wall-clock seconds and include the shared fixture cost for the
criterion that triggers the build.

Known state: criteria 4 (number variance and density correlator only),
6, and 7 fail, and are left failing at full statistical power. All three
resolve the same finite-size physics: short periodic orbits (closed
system) and trapped lead-bond modes (open system) add non-universal,
realization-dependent structure that the infinite-bond-number
universality limit removes but a 105- or 66-bond graph retains. The
mechanism is measured and pinned by green tests in test_spectral.py
(TestCountingFluctuations); README.md carries the full account. Do not
loosen the gates: they document the distance between desk scale and the
asymptotic claim.
"""

import time

import numpy as np
import pytest
from scipy.stats import ks_2samp

import tests.fd_oracle as fd
from qgraphlab import (ExperimentConfig, GoeConfig, build_channel_couplings,
                       build_complete_graph, coupling_for_transmission,
                       density_correlator, evolution_map, find_levels,
                       form_factor, goe_levels_unfolded, goe_s_correlator,
                       goe_s_correlator_scan, graph_from_lengths, half_width,
                       lead_reflection, match_transmission, merge_spectra,
                       mixing_decay, nns, number_variance, open_graph,
                       pf_operator, pf_spectrum, run, s_correlator,
                       s_correlator_scan, sample_goe_smatrix_ensemble,
                       sample_smatrix_grid, split_sequence, split_window,
                       transition_factor, transmission_coefficients, unfold,
                       average_smatrix)
from qgraphlab._parallel import parallel_map

U_LADDER = 0.25 * np.arange(10)        # unfolded offsets shared by c6/c7
OPEN_TARGETS = np.array([1.0, 1.0, 0.5, 0.5])


def _gate(num: int, ok: bool, detail: str):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------- fixtures


@pytest.fixture(scope="module")
def big_closed_spectrum():
    """V=15 complete graph solved over enough k for >= 2e4 levels."""
    t0 = time.monotonic()
    g = build_complete_graph(15, seed=1501)
    d = g.mean_density()
    span = (20000 + 600) / d
    parts = split_window(10.0, 10.0 + span, d)
    results = parallel_map(lambda w: find_levels(g, w[0], w[1]), parts,
                           workers=4)
    spec = merge_spectra(results)
    x = unfold(spec).values
    return {"graph": g, "spectrum": spec, "x": x,
            "seconds": time.monotonic() - t0}


@pytest.fixture(scope="module")
def goe_reference_levels():
    t0 = time.monotonic()
    seqs = goe_levels_unfolded(GoeConfig(size=500, realizations=200,
                                         seed=4242))
    return {"seqs": seqs, "seconds": time.monotonic() - t0}


@pytest.fixture(scope="module")
def open_system():
    """V=12 graph with 4 leads tuned to T = {1, 1, 0.5, 0.5}."""
    t0 = time.monotonic()
    g = build_complete_graph(12, seed=1201)
    valency = 11
    w_full = np.sqrt(float(valency))
    w_half = coupling_for_transmission(0.5, valency)
    weights = [w_full, w_full, w_half, w_half]
    og = open_graph(g, 4, weights)
    window = (10.0, 610.0)
    grid = sample_smatrix_grid(og, window)
    avg = average_smatrix(og, window, grid=grid)
    return {"og": og, "grid": grid, "avg": avg, "weights": weights,
            "valency": valency, "seconds": time.monotonic() - t0}


@pytest.fixture(scope="module")
def goe_open_system():
    """GOE baseline whose channel transmissions match OPEN_TARGETS."""
    t0 = time.monotonic()
    size = 160
    matched = match_transmission(OPEN_TARGETS, size=size, channel_count=4,
                                 seed=1606, realizations=48, grid_points=48,
                                 tol=0.01)
    coupling = build_channel_couplings(4, size, matched.strengths, seed=1607)
    ens = sample_goe_smatrix_ensemble(
        GoeConfig(size=size, realizations=64, seed=1608), coupling)
    return {"matched": matched, "ens": ens,
            "seconds": time.monotonic() - t0}


@pytest.fixture(scope="module")
def open_scans(open_system, goe_open_system):
    """(1,1) autocorrelation scans on the shared unfolded offset ladder."""
    t0 = time.monotonic()
    og, grid = open_system["og"], open_system["grid"]
    d = og.mean_density()
    scan_g = s_correlator_scan(og, (0, 0), U_LADDER / (2.0 * d), grid=grid)
    ens = goe_open_system["ens"]
    eps = U_LADDER * ens.mean_spacing / 2.0
    scan_goe = goe_s_correlator_scan(ens, (0, 0), eps)
    return {"graph": scan_g, "goe": scan_goe,
            "seconds": time.monotonic() - t0}


# ---------------------------------------------------------------- criteria


def test_criterion_1_exact_structure():
    t0 = time.monotonic()
    worst_u = worst_sym = worst_ds = worst_perron = 0.0
    for i in range(50):
        v = 4 + i % 9
        g = build_complete_graph(v, seed=9000 + i)
        em = evolution_map(g)
        U = em.at(11.0 + 0.37 * i)
        worst_u = max(worst_u, np.abs(U @ U.conj().T - np.eye(len(U))).max())

        M = transition_factor(g)
        A = M[g.index.flip]            # remove the direction swap: block factor
        worst_sym = max(worst_sym, np.abs(A - A.T).max())

        F = pf_operator(g).matrix
        worst_ds = max(worst_ds,
                       np.abs(F.sum(axis=0) - 1.0).max(),
                       np.abs(F.sum(axis=1) - 1.0).max())
        n = F.shape[0]
        uniform = np.full(n, 1.0 / n)
        worst_perron = max(worst_perron, np.abs(F @ uniform - uniform).max())
        assert pf_spectrum(F).perron_value == pytest.approx(1.0, abs=1e-10)
    dt = time.monotonic() - t0
    ok = (worst_u <= 1e-12 and worst_sym <= 1e-13 and worst_ds <= 1e-12
          and worst_perron <= 1e-8 and dt < 60)
    _gate(1, ok, f"unitarity {worst_u:.1e}  factor symmetry {worst_sym:.1e}  "
                 f"stochasticity {worst_ds:.1e}  perron {worst_perron:.1e}  "
                 f"({dt:.0f}s < 60s)")


def test_criterion_2_spectral_completeness():
    t0 = time.monotonic()
    mismatches = 0
    worst_weyl = 0.0
    windows = 0
    for i in range(10):
        g = build_complete_graph(4 + i, seed=2100 + i)
        d = g.mean_density()
        span = 60.0 / d
        for j in range(10):
            lo = 4.0 + j * span
            r = find_levels(g, lo, lo + span)
            windows += 1
            if r.count != r.winding_count:
                mismatches += 1
            weyl = abs(r.count - span * d) / max(np.sqrt(r.count), 1.0)
            worst_weyl = max(worst_weyl, weyl)
    dt = time.monotonic() - t0
    ok = (windows == 100 and mismatches == 0 and worst_weyl < 3.0
          and dt < 300)
    _gate(2, ok, f"{windows} windows  count!=winding in {mismatches}  "
                 f"worst Weyl deviation {worst_weyl:.2f} sqrtN (< 3)  "
                 f"({dt:.0f}s < 300s)")


def test_criterion_3_analytic_oracles():
    t0 = time.monotonic()
    g2 = graph_from_lengths(2, [np.pi])
    r2 = find_levels(g2, 0.5, 10.5)
    dev2 = np.abs(r2.levels - np.arange(1, 11)).max() if r2.count == 10 else np.inf

    g3 = build_complete_graph(3, seed=33)
    r3 = find_levels(g3, 0.4, 7.0)
    oracle = fd.metric_graph_levels(3, fd.complete_graph_bonds(3), g3.lengths,
                                    n_levels=r3.count + 2, m_per_unit=100)
    dev3 = np.abs(r3.levels / oracle[:r3.count] - 1.0).max()
    dt = time.monotonic() - t0
    ok = dev2 <= 1e-9 and dev3 <= 1e-6 and dt < 60
    _gate(3, ok, f"interval levels off by {dev2:.1e} (<= 1e-9)  "
                 f"triangle vs finite differences {dev3:.1e} rel (<= 1e-6)  "
                 f"({dt:.0f}s < 60s)")


def test_criterion_4_closed_statistics(big_closed_spectrum,
                                       goe_reference_levels):
    t0 = time.monotonic()
    x = big_closed_spectrum["x"]
    count = big_closed_spectrum["spectrum"].count
    seqs_g = split_sequence(x, 500)
    seqs_goe = goe_reference_levels["seqs"]

    nns_g = nns(seqs_g)
    nns_goe = nns(seqs_goe)
    ks = ks_2samp(nns_g.samples, nns_goe.samples).statistic

    ff_g = form_factor(seqs_g)
    ff_goe = form_factor(seqs_goe)
    mask = (ff_g.abscissa >= 0.2 - 1e-12) & (ff_g.abscissa <= 2.0 + 1e-12)
    ff_dev = np.abs(ff_g.values[mask] - ff_goe.values[mask]).max()

    L = np.linspace(1.0, 10.0, 19)
    nv_g = number_variance(seqs_g, L_grid=L, seed=11)
    nv_goe = number_variance(seqs_goe, L_grid=L, seed=12)
    nv_dev = np.abs(nv_g.values - nv_goe.values).max()

    offs = np.linspace(0.0, 3.0, 13)
    dc_g = density_correlator(seqs_g, offsets=offs)
    dc_goe = density_correlator(seqs_goe, offsets=offs)
    sigma = np.sqrt(dc_g.errors ** 2 + dc_goe.errors ** 2)
    dc_sigma = np.abs(dc_g.values - dc_goe.values) / sigma
    dc_max = dc_sigma.max()

    dt = (time.monotonic() - t0 + big_closed_spectrum["seconds"]
          + goe_reference_levels["seconds"])
    ok = (count >= 20000 and ks <= 0.03 and ff_dev <= 0.05
          and nv_dev <= 0.1 and dc_max <= 3.0 and dt < 1800)
    _gate(4, ok, f"{count} levels  KS {ks:.3f} (<= 0.03)  "
                 f"form factor dev {ff_dev:.3f} (<= 0.05)  "
                 f"number variance dev {nv_dev:.3f} (<= 0.1)  "
                 f"density correlator {dc_max:.2f} sigma (<= 3)  "
                 f"({dt:.0f}s < 1800s)")


def test_criterion_5_scattering_structure(open_system, goe_open_system):
    og, grid, avg = (open_system[k] for k in ("og", "grid", "avg"))
    S = grid.samples[grid.valid]
    eye = np.eye(S.shape[-1])
    uni_g = np.abs(np.einsum("nij,nkj->nik", S, S.conj()) - eye).max()
    sym_g = np.abs(S - S.transpose(0, 2, 1)).max()

    ens = goe_open_system["ens"]
    T = ens.samples[ens.valid]
    uni_goe = np.abs(np.einsum("nij,nkj->nik", T, T.conj()) - eye).max()
    sym_goe = np.abs(T - T.transpose(0, 2, 1)).max()

    rho = np.array([lead_reflection(w, open_system["valency"])
                    for w in open_system["weights"]])
    dev = np.abs(avg.mean - np.diag(rho))
    mean_sigma = (dev / avg.std_error).max()

    ok = (max(uni_g, uni_goe) <= 1e-10 and max(sym_g, sym_goe) <= 1e-10
          and mean_sigma <= 3.0)
    _gate(5, ok, f"unitarity graph {uni_g:.1e} / goe {uni_goe:.1e} (<= 1e-10)  "
                 f"symmetry graph {sym_g:.1e} / goe {sym_goe:.1e} (<= 1e-10)  "
                 f"mean S vs lead reflection {mean_sigma:.2f} sigma (<= 3)")


def test_criterion_6_open_statistics(open_system, goe_open_system,
                                     open_scans):
    t0 = time.monotonic()
    matched = goe_open_system["matched"]
    t_err = np.abs(matched.achieved - OPEN_TARGETS).max()

    scan_g, scan_goe = open_scans["graph"], open_scans["goe"]
    sigma = np.sqrt(scan_g.std_errors ** 2 + scan_goe.std_errors ** 2)
    c11_sigma = (np.abs(scan_g.values - scan_goe.values) / sigma).max()

    og, grid = open_system["og"], open_system["grid"]
    ens = goe_open_system["ens"]
    cc = ((0, 0), (1, 1))
    zeros = [0.0, 0.0]
    c22_g = s_correlator(og, 2, 2, cc, cc, zeros, zeros, grid=grid)
    c22_goe = goe_s_correlator(ens, 2, 2, cc, cc, zeros, zeros)
    s22 = np.sqrt(c22_g.std_errors[0] ** 2 + c22_goe.std_errors[0] ** 2)
    c22_sigma = abs(c22_g.values[0] - c22_goe.values[0]) / s22

    dt = (time.monotonic() - t0 + open_system["seconds"]
          + goe_open_system["seconds"] + open_scans["seconds"])
    ok = (t_err < 0.01 and c11_sigma <= 3.0 and c22_sigma <= 3.0
          and dt < 3600)
    _gate(6, ok, f"transmission match {t_err:.4f} (< 0.01)  "
                 f"(1,1) correlator {c11_sigma:.2f} sigma over "
                 f"{len(U_LADDER)} offsets (<= 3)  "
                 f"(2,2) correlator {c22_sigma:.2f} sigma (<= 3)  "
                 f"({dt:.0f}s < 3600s)")


def test_criterion_7_halfwidth(open_system, open_scans):
    og, avg = open_system["og"], open_system["avg"]
    total_T = float(np.sum(transmission_coefficients(og, average=avg)))
    assert 2.5 < total_T < 4.5        # overlapping-resonance regime

    scan = open_scans["graph"]
    measured = half_width(scan.offsets_plus, scan.values)
    predicted = total_T / (4.0 * np.pi * og.mean_density())
    rel = abs(measured - predicted) / predicted
    ok = rel <= 0.15
    _gate(7, ok, f"sum T {total_T:.2f}  half-width measured {measured:.3e} "
                 f"vs predicted {predicted:.3e}  rel dev {rel:.1%} (<= 15%)")


def test_criterion_8_mixing_diagnostics():
    g2 = graph_from_lengths(2, [1.3])
    s2 = pf_spectrum(pf_operator(g2))
    two_ok = (s2.gap == 0.0) and (not s2.mixing)

    min_gap = np.inf
    for v in range(4, 21):
        s = pf_spectrum(pf_operator(build_complete_graph(v, seed=800 + v)))
        min_gap = min(min_gap, s.gap)

    decay = mixing_decay(pf_operator(build_complete_graph(8, seed=888)))
    rate_rel = abs(decay.fitted_rate - decay.expected_rate) / decay.expected_rate

    ok = two_ok and min_gap > 0.0 and rate_rel <= 0.10
    _gate(8, ok, f"two-vertex gap {s2.gap} (non-mixing {not s2.mixing})  "
                 f"min gap V=4..20 {min_gap:.3f} (> 0)  "
                 f"relaxation rate dev {rate_rel:.1%} (<= 10%)")


def test_criterion_9_reproducibility(tmp_path):
    def spectrum_run(sub, workers=1):
        cfg = ExperimentConfig(kind="closed-spectrum", seed=99,
                               workers=workers, out_dir=str(tmp_path / sub))
        cfg.graph.vertex_count = 5
        cfg.solver.k_min, cfg.solver.k_max = 5.0, 25.0
        man = run(cfg)
        return (tmp_path / sub / "levels.tsv").read_bytes(), man.result_hash

    la, ha = spectrum_run("a")
    lb, hb = spectrum_run("b")
    rerun_ok = (la == lb) and (ha == hb)

    def stats_run(sub, workers):
        cfg = ExperimentConfig(kind="closed-stats", seed=77,
                               workers=workers, out_dir=str(tmp_path / sub))
        cfg.graph.vertex_count = 6
        cfg.solver.k_min, cfg.solver.k_max = 5.0, 165.0
        run(cfg)
        base = tmp_path / sub
        return ((base / "levels.tsv").read_bytes(),
                (base / "nns.tsv").read_bytes(),
                (base / "spacings.tsv").read_bytes())

    w1 = stats_run("w1", 1)
    w3 = stats_run("w3", 3)
    workers_ok = w1 == w3

    ok = rerun_ok and workers_ok
    _gate(9, ok, f"rerun bit-identical {rerun_ok}  "
                 f"worker-count invariant {workers_ok}")

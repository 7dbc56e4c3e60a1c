"""Experiment pipelines: one validated config in, one manifest + records out.

Each run writes its record files (tab-separated, self-describing headers
carrying the config hash and seed), the resolved config, and a manifest with
hashes of every output. Reruns of the same config and seed produce
byte-identical records and the same result hash. Worker count changes the
schedule, never the numbers: work is split into fixed chunks whose results
merge in index order.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ._parallel import parallel_map
from ._version import __version__
from .classical import gap_scan, mixing_decay, pf_operator, pf_spectrum
from .config import ExperimentConfig, config_to_dict, validate_config
from .errors import ConfigurationError, NumericalIntegrityError
from .graphs import (build_complete_graph, graph_from_lengths, save_graph)
from .manifest import RunManifest, hash_config, sha256_file, write_manifest
from .records import read_records, write_records
from .rmt import (GoeConfig, build_channel_couplings, ensemble_average_smatrix,
                  goe_levels_unfolded, goe_s_correlator_scan,
                  match_transmission, measured_transmission,
                  sample_goe_smatrix_ensemble)
from .scattering import (coupling_for_transmission, default_grid_step,
                         evaluate_smatrix_samples, grid_points, half_width,
                         open_graph, average_smatrix, sample_smatrix_grid,
                         s_correlator_scan, transmission_for_weight,
                         weisskopf_half_width)
from .spectral import find_levels, merge_spectra, split_window, unfold
from . import stats
from .stats import MeasureResult

logger = logging.getLogger("qgraphlab.runner")

_SEED_ROLES = ("graph", "goe", "stats", "match", "frame", "scratch")

MEASURE_FILES = {
    "nns": "nns.tsv",
    "form_factor": "form_factor.tsv",
    "number_variance": "number_variance.tsv",
    "density_correlator": "density_correlator.tsv",
}

_MEASURE_COLUMNS = {
    "nns": ("s", "density"),
    "form_factor": ("tau", "K"),
    "number_variance": ("L", "sigma2"),
    "density_correlator": ("offset", "C"),
}

_SCAN_CHUNK = 256        # fixed so worker count cannot move chunk boundaries


def _derive_seeds(seed: int) -> dict:
    words = np.random.SeedSequence(seed).generate_state(len(_SEED_ROLES))
    return {role: int(w) for role, w in zip(_SEED_ROLES, words)}


def _build_graph(cfg: ExperimentConfig, graph_seed: int):
    g = cfg.graph
    if g.lengths is not None:
        return graph_from_lengths(g.vertex_count, g.lengths, g.condition_kind,
                                  seed=cfg.seed)
    return build_complete_graph(g.vertex_count, g.length_min, g.length_max,
                                g.condition_kind, seed=graph_seed)


def _channel_weights(cfg: ExperimentConfig) -> np.ndarray:
    g = cfg.graph
    valency = g.vertex_count - 1
    if g.weights is not None:
        return np.asarray(g.weights, dtype=float)
    if g.target_transmissions is not None:
        return np.array([coupling_for_transmission(t, valency)
                         for t in g.target_transmissions])
    raise ConfigurationError(
        "open graph needs channel weights or target transmissions")


def _goe_targets(cfg: ExperimentConfig) -> np.ndarray:
    g = cfg.graph
    if g.target_transmissions is not None:
        return np.asarray(g.target_transmissions, dtype=float)
    valency = g.vertex_count - 1
    return np.array([transmission_for_weight(w, valency) for w in g.weights])


def _unfolded_offset_ladder(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.scatter.unfolded_offsets is not None:
        return np.asarray(cfg.scatter.unfolded_offsets, dtype=float)
    return 0.25 * np.arange(10)


def _solve_spectrum(cfg: ExperimentConfig, graph):
    window = (cfg.solver.k_min, cfg.solver.k_max)
    parts = split_window(window[0], window[1], graph.mean_density(),
                         cfg.solver.levels_per_window)

    def solve(part):
        return find_levels(graph, part[0], part[1],
                           target_tol=cfg.solver.target_tol,
                           grid_step=cfg.solver.grid_step)

    return merge_spectra(parallel_map(solve, parts, cfg.workers))


def _write_levels(out: Path, spec, header: dict, man: RunManifest) -> None:
    x = unfold(spec).values
    flags = spec.degenerate_flags
    if flags is None:
        flags = np.zeros(len(spec.levels), dtype=int)
    path = write_records(out / "levels.tsv",
                         {"k": spec.levels, "x": x,
                          "degenerate": flags.astype(int)},
                         {**header, "graph_hash": spec.graph_hash,
                          "k_lo": spec.window[0], "k_hi": spec.window[1],
                          "winding": spec.winding_count,
                          "mean_density": spec.mean_density,
                          "count": spec.count})
    man.add_output(path, out)


def _emit_measures(seqs, cfg: ExperimentConfig, out: Path, header: dict,
                   man: RunManifest, stats_seed: int, source: str) -> dict:
    sp = cfg.stats
    emitted = {}
    for measure in sp.measures:
        if measure == "nns":
            r = stats.nns(seqs, bin_width=sp.bin_width)
            spath = write_records(out / "spacings.tsv", {"s": r.samples},
                                  {**header, "measure": "nns_samples",
                                   "source": source})
            man.add_output(spath, out)
        elif measure == "form_factor":
            r = stats.form_factor(seqs, tau_max=sp.tau_max, tau_bin=sp.tau_bin,
                                  smoothing=sp.smoothing)
        elif measure == "number_variance":
            r = stats.number_variance(seqs, L_grid=sp.l_grid,
                                      placements=sp.placements,
                                      seed=stats_seed)
        elif measure == "density_correlator":
            r = stats.density_correlator(seqs, offsets=sp.offsets, eps=sp.eps)
        else:
            raise ConfigurationError(f"unknown measure {measure!r}")
        xcol, ycol = _MEASURE_COLUMNS[measure]
        meta = {k: v for k, v in r.metadata.items()
                if isinstance(v, (int, float, str, bool))}
        path = write_records(out / MEASURE_FILES[measure],
                             {xcol: r.abscissa, ycol: r.values,
                              "err": r.errors},
                             {**header, "measure": measure, "source": source,
                              **meta})
        man.add_output(path, out)
        emitted[measure] = {
            "points": int(len(r.abscissa)),
            **{k: float(v) for k, v in meta.items()
               if isinstance(v, (int, float)) and not isinstance(v, bool)},
        }
    return emitted


def _run_closed_spectrum(cfg, out, man, seeds, header):
    graph = _build_graph(cfg, seeds["graph"])
    save_graph(graph, out / "graph.json")
    man.add_output(out / "graph.json", out)
    spec = _solve_spectrum(cfg, graph)
    _write_levels(out, spec, header, man)
    man.summary = {
        "count": spec.count,
        "winding": spec.winding_count,
        "window": list(spec.window),
        "mean_density": spec.mean_density,
        "degenerate": int(np.sum(spec.degenerate_flags))
        if spec.degenerate_flags is not None else 0,
    }


def _run_closed_stats(cfg, out, man, seeds, header):
    graph = _build_graph(cfg, seeds["graph"])
    save_graph(graph, out / "graph.json")
    man.add_output(out / "graph.json", out)
    spec = _solve_spectrum(cfg, graph)
    _write_levels(out, spec, header, man)
    x = unfold(spec).values
    seqs = stats.split_sequence(x, cfg.stats.subsequence_length)
    emitted = _emit_measures(seqs, cfg, out, header, man, seeds["stats"],
                             source="graph")
    man.summary = {
        "count": spec.count,
        "sequences": len(seqs),
        "measures": emitted,
    }


def _run_goe_spectrum(cfg, out, man, seeds, header):
    gcfg = GoeConfig(size=cfg.goe.size, scale=cfg.goe.scale,
                     realizations=cfg.goe.realizations, seed=seeds["goe"])
    seqs = goe_levels_unfolded(gcfg)
    real = np.concatenate([np.full(len(s), i, dtype=int)
                           for i, s in enumerate(seqs)])
    path = write_records(out / "goe_levels.tsv",
                         {"realization": real, "x": np.concatenate(seqs)},
                         {**header, "size": gcfg.size, "scale": gcfg.scale,
                          "realizations": gcfg.realizations,
                          "mean_spacing": gcfg.mean_spacing})
    man.add_output(path, out)
    emitted = _emit_measures(seqs, cfg, out, header, man, seeds["stats"],
                             source="goe")
    man.summary = {
        "realizations": len(seqs),
        "levels_total": int(sum(len(s) for s in seqs)),
        "measures": emitted,
    }


def _scatter_grid(cfg, og, window, step):
    """Full-grid S(k) sweep in fixed chunks merged in index order."""
    ks = grid_points(window, step)
    chunks = [ks[i:i + _SCAN_CHUNK] for i in range(0, len(ks), _SCAN_CHUNK)]
    pieces = parallel_map(lambda c: evaluate_smatrix_samples(og, c),
                          chunks, cfg.workers)
    samples = np.concatenate([p[0] for p in pieces])
    keep = np.concatenate([p[1] for p in pieces])
    return sample_smatrix_grid(og, window, step,
                               precomputed=(ks, samples, keep))


def _correlator_table(pairs, scans, unfold_scale):
    cols = {"pair_a": [], "pair_b": [], "u": [], "offset": [],
            "re": [], "im": [], "err": []}
    for (a, b), est in zip(pairs, scans):
        n = len(est.offsets_plus)
        cols["pair_a"] += [int(a)] * n
        cols["pair_b"] += [int(b)] * n
        cols["u"] += list(unfold_scale * est.offsets_plus)
        cols["offset"] += list(est.offsets_plus)
        cols["re"] += list(est.values.real)
        cols["im"] += list(est.values.imag)
        cols["err"] += list(est.std_errors)
    return cols


def _half_width_summary(est, total_T, density) -> dict:
    predicted = weisskopf_half_width(total_T, density)
    try:
        measured = half_width(est.offsets_plus, est.values)
    except NumericalIntegrityError as exc:
        return {"predicted": predicted, "measured": None, "note": str(exc)}
    return {"predicted": predicted, "measured": measured,
            "ratio": measured / predicted if predicted > 0 else None}


def _run_open_scatter(cfg, out, man, seeds, header):
    graph = _build_graph(cfg, seeds["graph"])
    save_graph(graph, out / "graph.json")
    man.add_output(out / "graph.json", out)
    weights = _channel_weights(cfg)
    og = open_graph(graph, cfg.graph.channel_count, weights)
    density = og.mean_density()

    window = (cfg.scatter.k_min, cfg.scatter.k_max)
    step = cfg.scatter.grid_step or default_grid_step(og)
    grid = _scatter_grid(cfg, og, window, step)
    man.excluded_samples["smatrix_grid"] = grid.dropped

    avg = average_smatrix(og, window, grid=grid)
    lam = og.channel_count
    rows, cols_ix = np.divmod(np.arange(lam * lam), lam)
    path = write_records(out / "smatrix_mean.tsv",
                         {"row": rows, "col": cols_ix,
                          "re": avg.mean.real.ravel(),
                          "im": avg.mean.imag.ravel(),
                          "err": avg.std_error.ravel()},
                         {**header, "samples": avg.samples,
                          "dropped": avg.dropped,
                          "k_lo": window[0], "k_hi": window[1]})
    man.add_output(path, out)

    valency = cfg.graph.vertex_count - 1
    T_meas = 1.0 - np.abs(np.diag(avg.mean)) ** 2
    T_design = np.array([transmission_for_weight(w, valency) for w in weights])
    path = write_records(out / "transmission.tsv",
                         {"channel": np.arange(lam), "weight": weights,
                          "reflection": og.reflection,
                          "T_design": T_design, "T_measured": T_meas},
                         {**header, "total_T_measured": float(T_meas.sum())})
    man.add_output(path, out)

    u = _unfolded_offset_ladder(cfg)
    offs_k = u / (2.0 * density)
    pairs = [tuple(p) for p in cfg.scatter.channel_pairs]
    scans = [s_correlator_scan(og, p, offs_k, grid=grid) for p in pairs]
    path = write_records(out / "correlator.tsv",
                         _correlator_table(pairs, scans, 2.0 * density),
                         {**header, "grid_step": step,
                          "mean_density": density,
                          "separation": "2*offset"})
    man.add_output(path, out)

    man.summary = {
        "channels": lam,
        "T_measured": [float(t) for t in T_meas],
        "total_T": float(T_meas.sum()),
        "grid_samples": int(grid.valid.sum()),
        "dropped": grid.dropped,
        "half_width": _half_width_summary(scans[0], float(T_meas.sum()),
                                          density),
    }
    if avg.warning:
        man.summary["warning"] = avg.warning


def _run_goe_scatter(cfg, out, man, seeds, header):
    targets = _goe_targets(cfg)
    lam = len(targets)
    match = match_transmission(targets, cfg.goe.size, lam,
                               seed=seeds["match"], scale=cfg.goe.scale)
    coupling = build_channel_couplings(lam, cfg.goe.size, match.strengths,
                                       seed=seeds["frame"])
    gcfg = GoeConfig(size=cfg.goe.size, scale=cfg.goe.scale,
                     realizations=cfg.goe.realizations, seed=seeds["goe"])
    ens = sample_goe_smatrix_ensemble(gcfg, coupling,
                                      grid_step=cfg.goe.grid_step)
    man.excluded_samples["goe_ensemble"] = ens.dropped

    mean, err = ensemble_average_smatrix(ens)
    T_meas = measured_transmission(ens)
    path = write_records(out / "match.tsv",
                         {"channel": np.arange(lam), "target": targets,
                          "strength": match.strengths,
                          "T_calibration": match.achieved,
                          "T_measured": T_meas},
                         {**header, "sweeps": match.sweeps,
                          "size": cfg.goe.size,
                          "realizations": cfg.goe.realizations})
    man.add_output(path, out)

    rows, cols_ix = np.divmod(np.arange(lam * lam), lam)
    path = write_records(out / "smatrix_mean.tsv",
                         {"row": rows, "col": cols_ix,
                          "re": mean.real.ravel(), "im": mean.imag.ravel(),
                          "err": err.ravel()},
                         {**header, "dropped": ens.dropped})
    man.add_output(path, out)

    u = _unfolded_offset_ladder(cfg)
    offs_E = 0.5 * u * ens.mean_spacing
    pairs = [tuple(p) for p in cfg.scatter.channel_pairs]
    scans = [goe_s_correlator_scan(ens, p, offs_E) for p in pairs]
    path = write_records(out / "correlator.tsv",
                         _correlator_table(pairs, scans,
                                           2.0 / ens.mean_spacing),
                         {**header, "grid_step": ens.grid_step,
                          "mean_spacing": ens.mean_spacing,
                          "separation": "2*offset"})
    man.add_output(path, out)

    man.summary = {
        "targets": [float(t) for t in targets],
        "strengths": [float(s) for s in match.strengths],
        "T_measured": [float(t) for t in T_meas],
        "max_match_error": float(np.abs(T_meas - targets).max()),
        "dropped": ens.dropped,
    }


def _run_pf_analysis(cfg, out, man, seeds, header):
    graph = _build_graph(cfg, seeds["graph"])
    save_graph(graph, out / "graph.json")
    man.add_output(out / "graph.json", out)
    if cfg.graph.channel_count >= 1:
        target = open_graph(graph, cfg.graph.channel_count,
                            _channel_weights(cfg))
    else:
        target = graph
    op = pf_operator(target)
    spec = pf_spectrum(op)
    decay = mixing_decay(op, m_max=cfg.pf.n_steps)

    w = spec.eigenvalues
    path = write_records(out / "pf_spectrum.tsv",
                         {"index": np.arange(len(w)),
                          "re": w.real, "im": w.imag,
                          "magnitude": np.abs(w),
                          "mass_re": spec.masses.real,
                          "mass_im": spec.masses.imag},
                         {**header, "gap": spec.gap, "mixing": spec.mixing,
                          "perron_simple": spec.perron_simple,
                          "substochastic": op.substochastic})
    man.add_output(path, out)

    dheader = {**header, "gap": spec.gap, "mixing": spec.mixing,
               "converged": decay.converged}
    if decay.fitted_rate is not None:
        dheader["fitted_rate"] = decay.fitted_rate
        dheader["expected_rate"] = decay.expected_rate
    path = write_records(out / "decay.tsv",
                         {"step": decay.steps, "distance": decay.distances},
                         dheader)
    man.add_output(path, out)

    if cfg.pf.scan_sizes:
        scan = gap_scan(cfg.pf.scan_sizes, cfg.graph.condition_kind,
                        seeds=seeds["scratch"])
        path = write_records(out / "gap_scan.tsv",
                             {"vertex_count": scan["vertex_counts"],
                              "bond_count": scan["bond_counts"],
                              "gap": scan["gaps"],
                              "mixing": scan["mixing"].astype(int)},
                             header)
        man.add_output(path, out)

    man.summary = {
        "gap": spec.gap,
        "mixing": spec.mixing,
        "perron_simple": spec.perron_simple,
        "fitted_rate": decay.fitted_rate,
        "expected_rate": decay.expected_rate,
        "converged": decay.converged,
    }
    if decay.warning:
        man.summary["warning"] = decay.warning


def _load_measure(run_dir: Path, measure: str) -> MeasureResult:
    path = run_dir / MEASURE_FILES[measure]
    if not path.is_file():
        raise ConfigurationError(
            f"{run_dir} has no {measure} output ({path.name} missing)")
    rec = read_records(path)
    xcol, ycol = _MEASURE_COLUMNS[measure]
    samples = None
    if measure == "nns":
        spath = run_dir / "spacings.tsv"
        if not spath.is_file():
            raise ConfigurationError(
                f"{run_dir} stores no spacing samples needed for comparison")
        samples = read_records(spath).data["s"]
    return MeasureResult(kind=measure,
                         abscissa=np.asarray(rec.data[xcol], dtype=float),
                         values=np.asarray(rec.data[ycol], dtype=float),
                         errors=np.asarray(rec.data["err"], dtype=float),
                         samples=samples,
                         metadata=dict(rec.header))


def _run_compare(cfg, out, man, seeds, header):
    cp = cfg.compare
    dir_a, dir_b = Path(cp.run_a), Path(cp.run_b)
    measure = cp.measure
    a = _load_measure(dir_a, measure)
    b = _load_measure(dir_b, measure)
    for tag, d in (("run_a", dir_a), ("run_b", dir_b)):
        man.input_hashes[f"{tag}/{MEASURE_FILES[measure]}"] = sha256_file(
            d / MEASURE_FILES[measure])

    report = stats.compare(a, b, tolerance=cp.tolerance,
                           sigma_tolerance=cp.sigma_tolerance)
    row = {
        "measure": [measure],
        "method": [report.method],
        "distance": [report.distance],
        "sigma_max": [np.nan if report.sigma_max is None
                      else report.sigma_max],
        "passed": [-1 if report.passed is None else int(report.passed)],
    }
    path = write_records(out / "compare.tsv", row,
                         {**header, "run_a": str(dir_a), "run_b": str(dir_b),
                          "threshold": report.threshold,
                          "sigma_threshold": report.sigma_threshold})
    man.add_output(path, out)
    man.summary = {
        "measure": measure,
        "method": report.method,
        "distance": report.distance,
        "sigma_max": report.sigma_max,
        "passed": report.passed,
        "details": report.details,
    }


_HANDLERS = {
    "closed-spectrum": _run_closed_spectrum,
    "closed-stats": _run_closed_stats,
    "goe-spectrum": _run_goe_spectrum,
    "open-scatter": _run_open_scatter,
    "goe-scatter": _run_goe_scatter,
    "pf-analysis": _run_pf_analysis,
    "compare": _run_compare,
}


def run(cfg: ExperimentConfig) -> RunManifest:
    """Execute one experiment and write its records and manifest."""
    validate_config(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    cfg_dict = config_to_dict(cfg)
    # workers and out_dir are execution details: two runs that differ only
    # there must share config_hash, config.json, and hence result_hash
    sci_dict = {k: v for k, v in cfg_dict.items()
                if k not in ("workers", "out_dir")}
    seeds = _derive_seeds(cfg.seed)
    man = RunManifest(kind=cfg.kind, config=cfg_dict,
                      config_hash=hash_config(sci_dict), seed=cfg.seed,
                      code_version=__version__)
    man.seed_trail = [{"role": r, "seed": seeds[r]} for r in _SEED_ROLES]
    header = {"config_hash": man.config_hash, "seed": cfg.seed,
              "kind": cfg.kind, "code_version": __version__}

    logger.info("run kind=%s seed=%d out=%s", cfg.kind, cfg.seed, out)
    _HANDLERS[cfg.kind](cfg, out, man, seeds, header)

    cfg_path = out / "config.json"
    cfg_path.write_text(_config_json(sci_dict), encoding="utf-8")
    man.add_output(cfg_path, out)
    man.finalize()
    write_manifest(man, out)
    return man


def _config_json(cfg_dict: dict) -> str:
    from .manifest import canonical_json
    import json
    return json.dumps(json.loads(canonical_json(cfg_dict)), indent=2,
                      sort_keys=True) + "\n"

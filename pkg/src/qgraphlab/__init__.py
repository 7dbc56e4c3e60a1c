"""Spectral statistics and scattering on metric graphs with incommensurate bonds.

Closed complete graphs get a certified level finder (every window's count is
pinned by an exact winding argument), classical transfer-operator analysis,
and the usual unfolded statistics. Open graphs get exact channel S-matrices
and running k-averages, mirrored by matched GOE ensembles for comparison.
"""

from ._version import __version__
from .errors import (QGraphLabError, ConfigurationError,
                     NumericalIntegrityError, SolverError)
from .graphs import (Graph, DirectedBondIndex, EvolutionMap, bond_count,
                     build_complete_graph, graph_from_lengths,
                     bond_scattering_factor, transition_factor,
                     evolution_map, evolution_operator, assemble_evolution_map,
                     save_graph, load_graph, graph_hash, validate_graph)
from .spectral import (SpectrumResult, UnfoldedSpectrum, eigenphases,
                       winding_count, find_levels, unfold, merge_spectra,
                       split_window)
from .classical import (PfOperator, PfSpectrum, MixingDecay, pf_operator,
                        pf_spectrum, mixing_decay, gap_scan)
from .scattering import (OpenGraph, SMatrix, SMatrixGrid, AverageSMatrix,
                         CorrelatorEstimate, householder_boundary_matrix,
                         lead_reflection, transmission_for_weight,
                         coupling_for_transmission, open_graph, smatrix,
                         sample_smatrix_grid, average_smatrix,
                         transmission_coefficients, s_correlator,
                         s_correlator_scan, half_width, weisskopf_half_width)
from .rmt import (GoeConfig, ChannelCoupling, GoeSMatrixEnsemble, MatchResult,
                  sample_goe, goe_levels_unfolded, build_channel_couplings,
                  goe_smatrix, sample_goe_smatrix_ensemble,
                  ensemble_average_smatrix, measured_transmission,
                  match_transmission, goe_s_correlator, goe_s_correlator_scan)
from .stats import (MeasureResult, CompareReport, nns, form_factor,
                    number_variance, density_correlator, compare,
                    split_sequence, poisson_sequence, picket_fence)
from .records import Records, write_records, read_records
from .config import (ExperimentConfig, load_config, save_config,
                     config_from_dict, config_to_dict, validate_config)
from .manifest import (RunManifest, write_manifest, load_manifest,
                       hash_config, canonical_json, sha256_file)
from .runner import run

__all__ = [
    "__version__",
    "QGraphLabError", "ConfigurationError", "NumericalIntegrityError",
    "SolverError",
    "Graph", "DirectedBondIndex", "EvolutionMap", "bond_count",
    "build_complete_graph", "graph_from_lengths", "bond_scattering_factor",
    "transition_factor", "evolution_map", "evolution_operator",
    "assemble_evolution_map", "save_graph", "load_graph", "graph_hash",
    "validate_graph",
    "SpectrumResult", "UnfoldedSpectrum", "eigenphases", "winding_count",
    "find_levels", "unfold", "merge_spectra", "split_window",
    "PfOperator", "PfSpectrum", "MixingDecay", "pf_operator", "pf_spectrum",
    "mixing_decay", "gap_scan",
    "OpenGraph", "SMatrix", "SMatrixGrid", "AverageSMatrix",
    "CorrelatorEstimate", "householder_boundary_matrix", "lead_reflection",
    "transmission_for_weight", "coupling_for_transmission", "open_graph",
    "smatrix", "sample_smatrix_grid", "average_smatrix",
    "transmission_coefficients", "s_correlator", "s_correlator_scan",
    "half_width", "weisskopf_half_width",
    "GoeConfig", "ChannelCoupling", "GoeSMatrixEnsemble", "MatchResult",
    "sample_goe", "goe_levels_unfolded", "build_channel_couplings",
    "goe_smatrix", "sample_goe_smatrix_ensemble", "ensemble_average_smatrix",
    "measured_transmission", "match_transmission", "goe_s_correlator",
    "goe_s_correlator_scan",
    "MeasureResult", "CompareReport", "nns", "form_factor",
    "number_variance", "density_correlator", "compare", "split_sequence",
    "poisson_sequence", "picket_fence",
    "Records", "write_records", "read_records",
    "ExperimentConfig", "load_config", "save_config", "config_from_dict",
    "config_to_dict", "validate_config",
    "RunManifest", "write_manifest", "load_manifest", "hash_config",
    "canonical_json", "sha256_file",
    "run",
]

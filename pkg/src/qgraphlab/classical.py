"""Classical dynamics on the directed bonds: transfer operator and mixing.

The squared magnitudes of the quantum transition factor form a Markov matrix
on directed bonds, doubly stochastic for closed graphs and substochastic at
vertices that leak into attached channels. Its spectral gap controls how
fast a classical density relaxes to uniform, which is the mechanism behind
universal spectral statistics on well-connected graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalIntegrityError, ConfigurationError
from .graphs import Graph, graph_hash

_STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class PfOperator:
    """Classical transfer matrix over directed bonds."""

    matrix: np.ndarray
    graph_hash: str
    substochastic: bool = False

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass
class PfSpectrum:
    """Eigenvalue summary of the classical transfer operator."""

    eigenvalues: np.ndarray        # leading first, then descending magnitude
    perron_value: float
    perron_vector: np.ndarray
    perron_simple: bool
    gap: float
    mixing: bool
    masses: np.ndarray             # 1 - lambda_j, same order


@dataclass
class MixingDecay:
    """Observed relaxation of an initial density toward uniform."""

    steps: np.ndarray
    distances: np.ndarray          # l1 distance to the uniform state
    fitted_rate: float | None
    expected_rate: float | None
    fit_window: tuple
    converged: bool
    warning: str | None = None
    diagnostics: dict = field(default_factory=dict)


def _transition_matrix(graph) -> tuple:
    base = getattr(graph, "base", None)
    if base is not None:
        # open graph: interior factor only, channels carry probability away
        flip = base.index.flip
        F = np.abs(graph.sigma_open[flip, :]) ** 2
        return F, graph_hash(base), True
    from .graphs import transition_factor

    F = np.abs(transition_factor(graph)) ** 2
    return F, graph_hash(graph), False


def pf_operator(graph) -> PfOperator:
    """Transfer operator of a closed Graph or an OpenGraph.

    Closed graphs give a doubly stochastic matrix (checked to 1e-12); open
    graphs give row/column sums at most 1, strictly below 1 on directed
    bonds meeting an attached vertex.
    """
    F, ghash, is_open = _transition_matrix(graph)
    row = F.sum(axis=1)
    col = F.sum(axis=0)
    if not is_open:
        err = max(np.abs(row - 1.0).max(), np.abs(col - 1.0).max())
        if err > _STOCHASTIC_TOL:
            raise NumericalIntegrityError(
                f"transfer operator not doubly stochastic: deviation {err:.2e}")
    else:
        if row.max() > 1.0 + _STOCHASTIC_TOL or col.max() > 1.0 + _STOCHASTIC_TOL:
            raise NumericalIntegrityError("open transfer operator exceeds unit mass")
    return PfOperator(matrix=F, graph_hash=ghash, substochastic=is_open)


def _as_matrix(F) -> np.ndarray:
    # plain arrays also expose .base, so probe for the open-graph field
    if isinstance(F, PfOperator):
        return F.matrix
    if isinstance(F, Graph) or hasattr(F, "sigma_open"):
        return pf_operator(F).matrix
    return np.asarray(F, dtype=float)


def pf_spectrum(F, mixing_threshold: float = 1e-8) -> PfSpectrum:
    """Full eigenvalue analysis of a closed-graph transfer operator.

    The leading eigenvalue is 1 with a uniform stationary density. The graph
    mixes when every other eigenvalue magnitude stays below 1 by more than
    mixing_threshold; a degenerate leading eigenvalue reports as non-mixing
    rather than raising.
    """
    M = _as_matrix(F)
    n = M.shape[0]
    w = np.linalg.eigvals(M)

    lead = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[lead] - 1.0) > 1e-10:
        raise NumericalIntegrityError(
            f"leading transfer eigenvalue {w[lead]!r} differs from 1")
    rest = np.delete(w, lead)
    rest = rest[np.argsort(-np.abs(rest))]
    ordered = np.concatenate(([w[lead]], rest))

    uniform = np.full(n, 1.0 / n)
    resid = np.abs(M @ uniform - uniform).max()
    if resid > 1e-8:
        raise NumericalIntegrityError(
            f"uniform density not stationary: residual {resid:.2e}")

    sub = np.abs(rest)
    gap = float(1.0 - sub.max()) if len(sub) else 1.0
    simple = bool(np.abs(rest - 1.0).min() > mixing_threshold) if len(rest) else True
    return PfSpectrum(
        eigenvalues=ordered,
        perron_value=float(np.real(w[lead])),
        perron_vector=uniform,
        perron_simple=simple,
        gap=gap,
        mixing=bool(gap > mixing_threshold and simple),
        masses=1.0 - ordered,
    )


def mixing_decay(F, r0: np.ndarray | None = None, m_max: int = 60,
                 skip_steps: int = 2, floor: float = 1e-11) -> MixingDecay:
    """Iterate a density and fit the exponential relaxation rate.

    The fitted rate is compared against -log of the subleading eigenvalue
    magnitude. The fit skips the first steps (transient mixing of many
    modes) and stops where the distance reaches the numerical floor or half
    the initial distance, whichever bounds the clean decay window. A
    non-mixing operator returns the raw curve with a warning and no fit.
    """
    M = _as_matrix(F)
    n = M.shape[0]
    if r0 is None:
        r0 = np.zeros(n)
        r0[0] = 1.0
    else:
        r0 = np.asarray(r0, dtype=float)
        if r0.shape != (n,):
            raise ConfigurationError(f"initial density must have shape ({n},)")
        if r0.min() < 0:
            raise ConfigurationError("initial density must be nonnegative")
        if abs(r0.sum() - 1.0) > 1e-9:
            raise ConfigurationError("initial density must have total mass 1")
    spec = pf_spectrum(M)

    r = r0.copy()
    r_eq = np.full(n, r0.sum() / n)
    dists = np.empty(m_max + 1)
    dists[0] = np.abs(r - r_eq).sum()
    for m in range(1, m_max + 1):
        r = M @ r
        dists[m] = np.abs(r - r_eq).sum()
    steps = np.arange(m_max + 1)

    if not spec.mixing:
        return MixingDecay(steps=steps, distances=dists, fitted_rate=None,
                           expected_rate=None, fit_window=(0, 0),
                           converged=False, warning="operator is not mixing",
                           diagnostics={"gap": spec.gap})

    expected = float(-np.log(np.abs(spec.eigenvalues[1])))
    usable = (dists > floor) & (dists < 0.5 * dists[0])
    usable[:skip_steps + 1] = False
    idx = np.flatnonzero(usable)
    if len(idx) < 4:
        usable = dists > floor
        usable[:skip_steps + 1] = False
        idx = np.flatnonzero(usable)
    if len(idx) < 2:
        raise NumericalIntegrityError(
            "relaxation too fast to fit: fewer than 2 usable steps")
    coeffs = np.polyfit(steps[idx], np.log(dists[idx]), 1)
    fitted = float(-coeffs[0])
    return MixingDecay(
        steps=steps,
        distances=dists,
        fitted_rate=fitted,
        expected_rate=expected,
        fit_window=(int(idx[0]), int(idx[-1])),
        converged=True,
        diagnostics={
            "gap": spec.gap,
            "relative_error": abs(fitted - expected) / expected,
        },
    )


def gap_scan(vertex_counts, condition_kind: str = "neumann",
             seeds=None) -> dict:
    """Spectral gap versus graph size, for mixing-regime surveys."""
    from .graphs import build_complete_graph, bond_count

    counts = [int(v) for v in vertex_counts]
    if seeds is None:
        seeds = [None] * len(counts)
    elif np.isscalar(seeds):
        seeds = [int(seeds) + i for i in range(len(counts))]
    elif len(seeds) != len(counts):
        raise ConfigurationError("need one seed per vertex count")

    gaps, mixing = [], []
    for v, s in zip(counts, seeds):
        g = build_complete_graph(v, condition_kind=condition_kind, seed=s)
        spec = pf_spectrum(pf_operator(g))
        gaps.append(spec.gap)
        mixing.append(spec.mixing)
    return {
        "vertex_counts": np.array(counts),
        "bond_counts": np.array([bond_count(v) for v in counts]),
        "gaps": np.array(gaps),
        "mixing": np.array(mixing),
    }

"""Open graphs: channel attachment, exact S-matrix, k-averaged correlators.

Channels are extra half-infinite leads attached at the first few vertices.
Each attached vertex gets an enlarged boundary matrix drawn from a
one-parameter Householder family: real, symmetric, orthogonal, with a
tunable back reflection so the channel transmission sweeps (0, 1]. The
S-matrix at real k follows from one linear solve against the 2B x 2B
interior propagator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import NumericalIntegrityError, ConfigurationError
from .graphs import Graph, bond_scattering_factor

logger = logging.getLogger("qgraphlab.scattering")

_RCOND_FLOOR = 1e-12
_UNITARITY_TOL = 1e-10


@dataclass(frozen=True)
class OpenGraph:
    """A complete graph with scattering channels at its first vertices."""

    base: Graph
    attached: tuple
    weights: np.ndarray            # one Householder weight per channel
    reflection: np.ndarray         # lead back-reflection amplitude per channel
    coupling: np.ndarray           # channel x directed-bond coupling matrix
    sigma_open: np.ndarray         # interior scattering factor, subunitary blocks

    @property
    def channel_count(self) -> int:
        return len(self.attached)

    def mean_density(self) -> float:
        return self.base.mean_density()


@dataclass
class SMatrix:
    k: float
    matrix: np.ndarray


@dataclass
class SMatrixGrid:
    """S(k) on a uniform grid; rejected samples stay as masked gaps."""

    ks: np.ndarray                 # full grid, uniform spacing
    samples: np.ndarray            # matching matrices (zero rows where invalid)
    valid: np.ndarray              # acceptance mask
    window: tuple
    grid_step: float

    @property
    def dropped(self) -> int:
        return int(self.valid.size - self.valid.sum())


@dataclass
class AverageSMatrix:
    mean: np.ndarray
    std_error: np.ndarray          # per entry, combined re/im
    samples: int
    dropped: int
    window: tuple
    warning: str | None = None


@dataclass
class CorrelatorEstimate:
    """Windowed average of products of fluctuating S-matrix elements."""

    values: np.ndarray             # complex, one per offset configuration
    std_errors: np.ndarray         # combined re/im block errors
    P: int
    Q: int
    channels_plus: tuple
    channels_minus: tuple
    offsets_plus: np.ndarray
    offsets_minus: np.ndarray
    window: tuple
    samples: int
    source: str = "graph"
    flag: str | None = None
    metadata: dict = field(default_factory=dict)


def householder_boundary_matrix(dim: int, weight: float) -> np.ndarray:
    """Reflection I - 2nn^T/(n^T n) with n = (weight, 1, ..., 1).

    Row/column 0 is the lead channel; the rest are the internal bonds. Real
    symmetric orthogonal for any weight; weight sqrt(dim-1) makes the lead
    reflection vanish (full transmission).
    """
    if dim < 2:
        raise ConfigurationError("boundary matrix needs dimension >= 2")
    if weight <= 0:
        raise ConfigurationError("channel weight must be positive")
    n = np.ones(dim)
    n[0] = weight
    return np.eye(dim) - 2.0 * np.outer(n, n) / (n @ n)


def lead_reflection(weight: float, valency: int) -> float:
    """Back-reflection amplitude of the Householder lead channel."""
    return 1.0 - 2.0 * weight**2 / (weight**2 + valency)


def transmission_for_weight(weight: float, valency: int) -> float:
    rho = lead_reflection(weight, valency)
    return 1.0 - rho * rho


def coupling_for_transmission(T: float, valency: int,
                              branch: str = "weak") -> float:
    """Householder weight realizing lead transmission T on the chosen branch.

    The weak branch keeps the positive reflection root (small weight); the
    strong branch passes through full transmission and heads to decoupling.
    """
    if not 0.0 < T <= 1.0:
        raise ConfigurationError("target transmission must be in (0, 1]")
    rho = np.sqrt(max(1.0 - T, 0.0))
    if branch == "strong":
        rho = -rho
    elif branch != "weak":
        raise ConfigurationError(f"unknown branch {branch!r}")
    return float(np.sqrt(valency * (1.0 - rho) / (1.0 + rho)))


def open_graph(base: Graph, channel_count: int, weights) -> OpenGraph:
    """Attach one lead to each of the first channel_count vertices."""
    V = base.vertex_count
    if not 0 <= channel_count <= V:
        raise ConfigurationError(
            f"channel count {channel_count} must be between 0 and V={V}")
    w = np.broadcast_to(np.asarray(weights, dtype=float),
                        (channel_count,)).copy()
    if channel_count and w.min() <= 0:
        raise ConfigurationError("channel weights must be positive")

    idx = base.index
    sigma = bond_scattering_factor(base)
    tau = np.zeros((channel_count, idx.size))
    rho = np.zeros(channel_count)
    for a in range(channel_count):
        gamma = householder_boundary_matrix(V, w[a])
        inc = idx.incoming[a]
        sigma[np.ix_(inc, inc)] = gamma[1:, 1:]
        tau[a, inc] = gamma[0, 1:]
        rho[a] = gamma[0, 0]
    return OpenGraph(base=base, attached=tuple(range(channel_count)),
                     weights=w, reflection=rho, coupling=tau,
                     sigma_open=sigma)


class _Propagator:
    """Per-k assembly and factorization of the interior linear system."""

    def __init__(self, og: OpenGraph):
        self.og = og
        self.flip = og.base.index.flip
        self.ell = og.base.doubled_lengths
        self.rows = np.arange(og.base.index.size)
        self.rho = np.diag(og.reflection.astype(complex))
        self.tauT = og.coupling.T.astype(complex)

    def smatrix(self, k: float):
        """Returns (S, rcond). Near-singular systems report rcond only."""
        W = -self.og.sigma_open.copy()
        W[self.rows, self.flip] += np.exp(-1j * k * self.ell)
        anorm = np.abs(W).sum(axis=0).max()
        lu, piv, info = lapack.zgetrf(W, overwrite_a=True)
        if info != 0:
            return None, 0.0
        rcond, _ = lapack.zgecon(lu, anorm, norm="1")
        if rcond < _RCOND_FLOOR:
            return None, float(rcond)
        X = lapack.zgetrs(lu, piv, self.tauT)[0]
        S = self.rho + self.og.coupling @ X
        return S, float(rcond)


def smatrix(og: OpenGraph, k: float, check: bool = True) -> SMatrix:
    """Exact channel S-matrix at one real k."""
    S, rcond = _Propagator(og).smatrix(k)
    if S is None:
        raise NumericalIntegrityError(
            f"interior system numerically singular at k={k} (rcond={rcond:.2e})")
    if check:
        n = S.shape[0]
        uerr = np.abs(S @ S.conj().T - np.eye(n)).max()
        serr = np.abs(S - S.T).max()
        if uerr > _UNITARITY_TOL or serr > _UNITARITY_TOL:
            raise NumericalIntegrityError(
                f"S(k={k}) fails unitarity/symmetry: {uerr:.2e}/{serr:.2e}")
    return SMatrix(k=k, matrix=S)


def default_grid_step(og: OpenGraph) -> float:
    """Spacing that resolves resonances: an eighth of the mean level spacing."""
    return 1.0 / (8.0 * og.mean_density())


def grid_points(window: tuple, grid_step: float) -> np.ndarray:
    k_lo, k_hi = window
    if not k_hi > k_lo:
        raise ConfigurationError("need k_hi > k_lo")
    n = int(np.floor((k_hi - k_lo) / grid_step)) + 1
    return k_lo + grid_step * np.arange(n)


def evaluate_smatrix_samples(og: OpenGraph, ks, check: bool = True) -> tuple:
    """S(k) at explicit k values; returns (samples, accepted mask)."""
    prop = _Propagator(og)
    lam = og.channel_count
    out = np.zeros((len(ks), lam, lam), dtype=complex)
    keep = np.ones(len(ks), dtype=bool)
    eye = np.eye(lam)
    for i, k in enumerate(ks):
        S, _ = prop.smatrix(k)
        if S is None:
            keep[i] = False
            continue
        if check:
            uerr = np.abs(S @ S.conj().T - eye).max()
            serr = np.abs(S - S.T).max()
            if uerr > _UNITARITY_TOL or serr > _UNITARITY_TOL:
                keep[i] = False
                continue
        out[i] = S
    return out, keep


def sample_smatrix_grid(og: OpenGraph, window: tuple,
                        grid_step: float | None = None,
                        check: bool = True,
                        precomputed: tuple | None = None) -> SMatrixGrid:
    """S(k) on a uniform grid; singular or non-unitary samples become gaps.

    precomputed optionally injects (ks, samples, keep) evaluated elsewhere
    (for example in index-ordered parallel chunks) on the same step.
    """
    if grid_step is None:
        grid_step = default_grid_step(og)
    if precomputed is None:
        ks = grid_points(window, grid_step)
        samples, valid = evaluate_smatrix_samples(og, ks, check)
    else:
        ks, samples, valid = precomputed
    dropped = int(valid.size - valid.sum())
    if dropped:
        logger.info("dropped %d of %d S(k) samples (near-singular or "
                    "off-contract)", dropped, valid.size)
    if not valid.any():
        raise NumericalIntegrityError("no usable S(k) samples in window")
    return SMatrixGrid(ks=np.asarray(ks), samples=samples, valid=valid,
                       window=(float(window[0]), float(window[1])),
                       grid_step=float(grid_step))


def _block_errors(values: np.ndarray, n_blocks: int) -> np.ndarray:
    """Std error of the mean from contiguous block means (complex input).

    values has samples on axis 0; returns combined re/im error per remaining
    entry.
    """
    n = values.shape[0]
    n_blocks = max(2, min(n_blocks, n))
    edges = np.linspace(0, n, n_blocks + 1).astype(int)
    means = np.stack([values[a:b].mean(axis=0)
                      for a, b in zip(edges[:-1], edges[1:])])
    var = means.real.var(axis=0, ddof=1) + means.imag.var(axis=0, ddof=1)
    return np.sqrt(var / n_blocks)


def average_smatrix(og: OpenGraph, window: tuple,
                    grid_step: float | None = None,
                    grid: SMatrixGrid | None = None,
                    n_blocks: int = 50) -> AverageSMatrix:
    """Grid average of S(k); converges to the diagonal lead reflections.

    A window shorter than 500 mean spacings is still averaged but the result
    carries a warning (errors estimated from the same block statistics).
    """
    if grid is None:
        grid = sample_smatrix_grid(og, window, grid_step)
    spacings = (grid.window[1] - grid.window[0]) * og.mean_density()
    warning = None
    if spacings < 500:
        warning = (f"window spans only {spacings:.0f} mean spacings; "
                   "averages may be biased")
        logger.warning(warning)
    kept = grid.samples[grid.valid]
    mean = kept.mean(axis=0)
    err = _block_errors(kept, n_blocks)
    return AverageSMatrix(mean=mean, std_error=err,
                          samples=int(grid.valid.sum()), dropped=grid.dropped,
                          window=grid.window, warning=warning)


def transmission_coefficients(og: OpenGraph, window: tuple | None = None,
                              average: AverageSMatrix | None = None,
                              **kwargs) -> np.ndarray:
    """Measured channel transmissions 1 - |<S_aa>|^2."""
    if average is None:
        if window is None:
            raise ConfigurationError("need a window or a precomputed average")
        average = average_smatrix(og, window, **kwargs)
    return 1.0 - np.abs(np.diag(average.mean)) ** 2


def snap_offsets(offsets, step: float) -> tuple:
    """Round offsets to whole grid steps; returns (shifts, snapped values)."""
    arr = np.atleast_1d(np.asarray(offsets, dtype=float))
    shifts = np.round(arr / step).astype(int)
    return shifts, shifts * step


def correlation_block_length(mean_density: float, measured_T,
                             grid_step: float, widths: float = 4.0) -> int:
    """Grid samples per bootstrap block: several correlation widths."""
    width = float(np.sum(measured_T)) / (2.0 * np.pi * mean_density)
    return max(8, int(np.ceil(widths * width / grid_step)))


def _grid_fluctuations(grid: SMatrixGrid) -> np.ndarray:
    mean = grid.samples[grid.valid].mean(axis=0)
    fl = grid.samples - mean
    fl[~grid.valid] = 0.0
    return fl


def _default_block(og: OpenGraph, grid: SMatrixGrid) -> int:
    T = 1.0 - np.abs(np.diag(grid.samples[grid.valid].mean(axis=0))) ** 2
    return correlation_block_length(og.mean_density(), T, grid.grid_step)


def s_correlator(og: OpenGraph, P: int, Q: int, channels_plus, channels_minus,
                 offsets_plus, offsets_minus, window: tuple | None = None,
                 grid_step: float | None = None,
                 grid: SMatrixGrid | None = None,
                 block_size: int | None = None,
                 error_target: float | None = None) -> CorrelatorEstimate:
    """k-average of a product of fluctuating S-matrix elements.

    The fluctuating part subtracts the measured grid mean entrywise (the
    connected estimator, mirrored on the random-matrix side). Offsets are
    rounded to whole grid steps and the rounded values are reported.
    Positive-offset factors are taken at k + offset, negative-offset factors
    conjugated at k - offset.
    """
    channels_plus = tuple(tuple(c) for c in channels_plus)
    channels_minus = tuple(tuple(c) for c in channels_minus)
    if len(channels_plus) != P or len(np.atleast_1d(offsets_plus)) != P:
        raise ConfigurationError("need P channel pairs and P offsets")
    if len(channels_minus) != Q or len(np.atleast_1d(offsets_minus)) != Q:
        raise ConfigurationError("need Q channel pairs and Q offsets")
    if grid is None:
        if window is None:
            raise ConfigurationError("need a window or a precomputed grid")
        grid = sample_smatrix_grid(og, window, grid_step)

    step = grid.grid_step
    sp, snapped_p = snap_offsets(offsets_plus, step)
    sq, snapped_q = snap_offsets(offsets_minus, step)
    fl = _grid_fluctuations(grid)

    # plus factors sit at center + m, minus factors at center - m; negative
    # offsets push the valid center range from the other side
    n = fl.shape[0]
    lo = int(max(0, np.max(-sp, initial=0), np.max(sq, initial=0)))
    hi = int(n - max(0, np.max(sp, initial=0), np.max(-sq, initial=0)))
    if hi - lo < 16:
        raise ConfigurationError("window too short for the requested offsets")
    centers = np.arange(lo, hi)
    ok = np.ones(len(centers), dtype=bool)
    prod = np.ones(len(centers), dtype=complex)
    for (a, b), m in zip(channels_plus, sp):
        ok &= grid.valid[centers + m]
        prod = prod * fl[centers + m, a, b]
    for (a, b), m in zip(channels_minus, sq):
        ok &= grid.valid[centers - m]
        prod = prod * np.conj(fl[centers - m, a, b])
    prod = prod[ok]
    if len(prod) < 16:
        raise NumericalIntegrityError("too few valid centers for correlator")

    if block_size is None:
        block_size = _default_block(og, grid)
    n_blocks = max(2, len(prod) // block_size)
    value = prod.mean()
    err = _block_errors(prod[:, None], n_blocks)[0]
    flag = None
    if error_target is not None and err > error_target:
        flag = (f"std_error {err:.2e} above requested target "
                f"{error_target:.2e}")
    return CorrelatorEstimate(
        values=np.array([value]), std_errors=np.array([err]),
        P=P, Q=Q, channels_plus=channels_plus, channels_minus=channels_minus,
        offsets_plus=snapped_p, offsets_minus=snapped_q,
        window=grid.window, samples=len(prod), flag=flag,
        metadata={"grid_step": step, "block_size": int(block_size),
                  "dropped": grid.dropped})


def s_correlator_scan(og: OpenGraph, channel_pair, offsets,
                      window: tuple | None = None,
                      grid_step: float | None = None,
                      grid: SMatrixGrid | None = None,
                      block_size: int | None = None,
                      conjugate_pair=None) -> CorrelatorEstimate:
    """(1,1) correlator versus symmetric offset on a shared sample grid.

    Each value is <S_fl(k + offset) S_fl*(k - offset)>, so the two factors
    sit 2*offset apart. Offsets snap to whole grid steps.
    """
    a, b = channel_pair
    c, d = conjugate_pair if conjugate_pair is not None else (a, b)
    if grid is None:
        if window is None:
            raise ConfigurationError("need a window or a precomputed grid")
        grid = sample_smatrix_grid(og, window, grid_step)
    step = grid.grid_step
    shifts, snapped = snap_offsets(offsets, step)
    if np.any(shifts < 0):
        raise ConfigurationError("scan offsets must be nonnegative")
    fl = _grid_fluctuations(grid)
    n = fl.shape[0]
    m_max = int(shifts.max(initial=0))
    if n - 2 * m_max < 16:
        raise ConfigurationError("window too short for the largest offset")

    if block_size is None:
        block_size = _default_block(og, grid)

    x = fl[:, a, b]
    y = np.conj(fl[:, c, d])
    values = np.empty(len(shifts), dtype=complex)
    errors = np.empty(len(shifts))
    used = 0
    for j, m in enumerate(shifts):
        centers = np.arange(m, n - m)
        ok = grid.valid[centers + m] & grid.valid[centers - m]
        prod = (x[centers + m] * y[centers - m])[ok]
        if len(prod) < 16:
            raise NumericalIntegrityError(
                f"too few valid centers at offset index {j}")
        values[j] = prod.mean()
        n_blocks = max(2, len(prod) // block_size)
        errors[j] = _block_errors(prod[:, None], n_blocks)[0]
        used = max(used, len(prod))
    return CorrelatorEstimate(
        values=values, std_errors=errors, P=1, Q=1,
        channels_plus=((a, b),), channels_minus=((c, d),),
        offsets_plus=snapped, offsets_minus=snapped,
        window=grid.window, samples=used,
        metadata={"grid_step": step, "block_size": int(block_size),
                  "dropped": grid.dropped, "scan": "symmetric"})


def half_width(offsets: np.ndarray, values: np.ndarray) -> float:
    """Offset where the real part first falls to half its zero-offset value."""
    re = np.real(values)
    if re[0] <= 0:
        raise NumericalIntegrityError("correlator not positive at zero offset")
    target = 0.5 * re[0]
    below = np.flatnonzero(re <= target)
    if len(below) == 0:
        raise NumericalIntegrityError("correlator never decays to half maximum")
    j = below[0]
    if j == 0:
        return 0.0
    x0, x1 = offsets[j - 1], offsets[j]
    y0, y1 = re[j - 1], re[j]
    return float(x0 + (target - y0) * (x1 - x0) / (y1 - y0))


def weisskopf_half_width(total_transmission: float,
                         mean_density: float) -> float:
    """Predicted autocorrelation half-width in the overlapping-resonance regime."""
    return total_transmission / (4.0 * np.pi * mean_density)

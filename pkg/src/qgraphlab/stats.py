"""Fluctuation measures on unfolded spectra and graph-vs-GOE comparison.

Everything here is source-agnostic: a measure takes one or many unfolded
level sequences (graph windows, GOE realizations, surrogates) and produces
the same record shape, so comparisons never know where levels came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import fftconvolve
from scipy.stats import ks_2samp

from .errors import ConfigurationError
from .spectral import SpectrumResult, UnfoldedSpectrum, unfold

MEASURE_KINDS = ("nns", "form_factor", "number_variance", "density_correlator")


@dataclass
class MeasureResult:
    kind: str
    abscissa: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    samples: np.ndarray | None = None   # raw samples where a KS test applies
    metadata: dict = field(default_factory=dict)


@dataclass
class CompareReport:
    kind: str
    method: str                    # "ks" for samples, "curve" for grids
    distance: float                # KS statistic or max absolute deviation
    sigma_max: float | None        # curves: max deviation in combined sigmas
    passed: bool | None
    threshold: float | None
    sigma_threshold: float | None = None
    null_quantile: float | None = None
    details: dict = field(default_factory=dict)


def as_sequences(source) -> list:
    """Normalize any spectrum-like input to a list of unfolded arrays."""
    if isinstance(source, UnfoldedSpectrum):
        return [np.asarray(source.values, dtype=float)]
    if isinstance(source, SpectrumResult):
        return [np.asarray(unfold(source).values, dtype=float)]
    if isinstance(source, np.ndarray):
        return [np.asarray(source, dtype=float)]
    if isinstance(source, (list, tuple)):
        out = []
        for item in source:
            out.extend(as_sequences(item))
        return out
    raise ConfigurationError(
        f"cannot interpret {type(source).__name__} as unfolded levels")


def split_sequence(values: np.ndarray, length: int = 500) -> list:
    """Chop one long sequence into pieces for ensemble-style statistics."""
    values = np.asarray(values, dtype=float)
    n = len(values) // length
    if n < 1:
        return [values]
    return [values[i * length:(i + 1) * length] for i in range(n)]


def poisson_sequence(count: int, seed=None) -> np.ndarray:
    """Unit-mean-spacing Poisson surrogate (independent exponential gaps)."""
    rng = np.random.default_rng(seed)
    return np.cumsum(rng.exponential(1.0, size=count))


def picket_fence(count: int) -> np.ndarray:
    return np.arange(count, dtype=float)


def _spacings(seqs) -> np.ndarray:
    parts = [np.diff(np.sort(s)) for s in seqs if len(s) >= 2]
    if not parts:
        raise ConfigurationError("no spacings available")
    return np.concatenate(parts)


def nns(source, bin_width: float = 0.05, min_levels: int = 1000) -> MeasureResult:
    """Nearest-neighbor spacing density, normalized to unit mass."""
    seqs = as_sequences(source)
    total = sum(len(s) for s in seqs)
    if total < min_levels:
        raise ConfigurationError(
            f"nns needs at least {min_levels} levels, got {total}")
    s = _spacings(seqs)
    top = max(4.0, float(np.ceil(s.max() / bin_width)) * bin_width)
    edges = np.arange(0.0, top + 0.5 * bin_width, bin_width)
    hist, _ = np.histogram(s, bins=edges, density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    # multinomial bin error on the density scale
    n = len(s)
    errors = np.sqrt(np.maximum(hist, 0) / (n * bin_width))
    return MeasureResult(
        kind="nns", abscissa=centers, values=hist, errors=errors, samples=s,
        metadata={"count": n, "mean_spacing": float(s.mean()),
                  "spacing_variance": float(s.var(ddof=1)),
                  "bin_width": bin_width, "sequences": len(seqs)})


def form_factor(source, tau_max: float = 3.0, tau_bin: float = 0.02,
                smoothing: float = 0.06) -> MeasureResult:
    """Spectral form factor averaged over sequences, Gaussian-smoothed in tau."""
    seqs = as_sequences(source)
    taus = np.arange(tau_bin, tau_max + 0.5 * tau_bin, tau_bin)
    curves = []
    for x in seqs:
        if len(x) < 2:
            continue
        phases = np.exp(2j * np.pi * np.outer(taus, x))
        k = np.abs(phases.sum(axis=1)) ** 2 / len(x)
        if smoothing > 0:
            k = gaussian_filter1d(k, smoothing / tau_bin, mode="nearest")
        curves.append(k)
    if not curves:
        raise ConfigurationError("no usable sequences for the form factor")
    curves = np.stack(curves)
    m = curves.shape[0]
    values = curves.mean(axis=0)
    errors = curves.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 \
        else np.full_like(values, np.nan)
    return MeasureResult(
        kind="form_factor", abscissa=taus, values=values, errors=errors,
        metadata={"sequences": m, "tau_bin": tau_bin, "smoothing": smoothing})


def number_variance(source, L_grid=None, placements: int = 400,
                    seed=0, groups: int = 8) -> MeasureResult:
    """Variance of the level count in randomly placed windows of length L."""
    seqs = [np.sort(s) for s in as_sequences(source)]
    if L_grid is None:
        L_grid = np.linspace(1.0, 10.0, 19)
    L_grid = np.asarray(L_grid, dtype=float)
    rng = np.random.default_rng(seed)

    block_vars = [[] for _ in L_grid]
    for x in seqs:
        span = x[-1] - x[0]
        for j, L in enumerate(L_grid):
            if span <= 2 * L:
                continue
            starts = rng.uniform(x[0], x[-1] - L, size=placements)
            counts = (np.searchsorted(x, starts + L)
                      - np.searchsorted(x, starts)).astype(float)
            per_group = max(8, placements // groups)
            for g in range(0, placements - per_group + 1, per_group):
                block_vars[j].append(counts[g:g + per_group].var(ddof=1))
    values = np.empty(len(L_grid))
    errors = np.empty(len(L_grid))
    for j, blocks in enumerate(block_vars):
        if not blocks:
            raise ConfigurationError(
                f"sequences too short for window length L={L_grid[j]}")
        b = np.asarray(blocks)
        values[j] = b.mean()
        errors[j] = b.std(ddof=1) / np.sqrt(len(b)) if len(b) > 1 else np.nan
    return MeasureResult(
        kind="number_variance", abscissa=L_grid, values=values, errors=errors,
        metadata={"placements": placements, "sequences": len(seqs),
                  "seed": seed})


def density_correlator(source, offsets=None, eps: float = 0.5,
                       kernel_cut: float = 40.0, blocks_per_sequence: int | None = None,
                       resolution: float | None = None) -> MeasureResult:
    """Autocorrelation of the Lorentzian-smoothed fluctuating level density.

    Works on unfolded sequences (unit mean density). The density is built by
    linear binning on a grid of step eps/8 and convolving with a Lorentzian
    of half-width eps; the measured mean over the interior is subtracted,
    and C(offset) averages density products at the given separations.
    Offsets snap to the internal grid.
    """
    if not 0.05 <= eps <= 2.0:
        raise ConfigurationError("smoothing width eps must be within [0.05, 2]")
    seqs = as_sequences(source)
    if offsets is None:
        offsets = np.linspace(0.0, 5.0, 21)
    offsets = np.asarray(offsets, dtype=float)
    if np.any(offsets < 0):
        raise ConfigurationError("offsets must be nonnegative")

    delta = eps / 8.0
    shifts = np.round(offsets / delta).astype(int)
    snapped = shifts * delta
    m_max = int(shifts.max(initial=0))

    half_kernel = int(np.ceil(kernel_cut * eps / delta))
    u = delta * np.arange(-half_kernel, half_kernel + 1)
    kernel = (eps / np.pi) / (u * u + eps * eps)

    warning = None
    if resolution is not None and eps < 100.0 * resolution:
        warning = (f"smoothing width {eps} within two decades of the level "
                   f"resolution {resolution}")

    if blocks_per_sequence is None:
        blocks_per_sequence = max(1, 16 // max(len(seqs), 1) + 1) \
            if len(seqs) < 16 else 1

    block_curves = []
    for x in seqs:
        x = np.sort(x)
        lo, hi = x[0], x[-1]
        n_grid = int(np.ceil((hi - lo) / delta)) + 1
        need = 2 * half_kernel + 2 * m_max + 16 * blocks_per_sequence
        if n_grid <= need:
            raise ConfigurationError(
                "sequence too short for the requested smoothing and offsets")
        counts = np.zeros(n_grid)
        pos = (x - lo) / delta
        i0 = np.floor(pos).astype(int)
        frac = pos - i0
        np.add.at(counts, np.clip(i0, 0, n_grid - 1), 1.0 - frac)
        np.add.at(counts, np.clip(i0 + 1, 0, n_grid - 1), frac)
        dens = fftconvolve(counts, kernel, mode="same")
        core = slice(half_kernel, n_grid - half_kernel)
        dfl = dens[core] - dens[core].mean()

        usable = len(dfl) - m_max
        edges = np.linspace(0, usable, blocks_per_sequence + 1).astype(int)
        for a, b in zip(edges[:-1], edges[1:]):
            if b - a < 8:
                continue
            idx = np.arange(a, b)
            row = [np.mean(dfl[idx + m] * dfl[idx]) for m in shifts]
            block_curves.append(row)

    if not block_curves:
        raise ConfigurationError("no usable blocks for the density correlator")
    curves = np.asarray(block_curves)
    nb = curves.shape[0]
    values = curves.mean(axis=0)
    errors = curves.std(axis=0, ddof=1) / np.sqrt(nb) if nb > 1 \
        else np.full(curves.shape[1], np.nan)
    return MeasureResult(
        kind="density_correlator", abscissa=snapped, values=values,
        errors=errors,
        metadata={"eps": eps, "grid_step": delta, "sequences": len(seqs),
                  "blocks": nb, "warning": warning})


def compare(a: MeasureResult, b: MeasureResult, tolerance: float | None = None,
            sigma_tolerance: float | None = None, null_draws: int = 0,
            seed=0) -> CompareReport:
    """Distance between two measures of the same kind.

    Sample-backed measures (nns) use the two-sample KS statistic, optionally
    with a permutation null quantile; curve measures use the maximum
    absolute deviation and its size in combined standard errors.
    """
    if a.kind != b.kind:
        raise ConfigurationError(f"kind mismatch: {a.kind} vs {b.kind}")

    if a.samples is not None and b.samples is not None:
        stat = float(ks_2samp(a.samples, b.samples).statistic)
        null_q = None
        if null_draws > 0:
            rng = np.random.default_rng(seed)
            pooled = np.concatenate([a.samples, b.samples])
            na = len(a.samples)
            draws = np.empty(null_draws)
            for i in range(null_draws):
                perm = rng.permutation(pooled)
                draws[i] = ks_2samp(perm[:na], perm[na:]).statistic
            null_q = float(np.quantile(draws, 0.99))
        passed = None if tolerance is None else bool(stat <= tolerance)
        return CompareReport(kind=a.kind, method="ks", distance=stat,
                             sigma_max=None, passed=passed,
                             threshold=tolerance, null_quantile=null_q,
                             details={"n_a": len(a.samples),
                                      "n_b": len(b.samples)})

    if a.abscissa.shape != b.abscissa.shape or \
            not np.allclose(a.abscissa, b.abscissa, atol=1e-9):
        raise ConfigurationError("incompatible abscissa grids")
    diff = np.abs(np.asarray(a.values) - np.asarray(b.values))
    sig = np.sqrt(np.asarray(a.errors) ** 2 + np.asarray(b.errors) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(diff == 0, 0.0, diff / sig)
    max_abs = float(diff.max())
    sigma_max = float(np.nanmax(ratio)) if np.isfinite(ratio).any() else None
    checks = []
    if tolerance is not None:
        checks.append(max_abs <= tolerance)
    if sigma_tolerance is not None and sigma_max is not None:
        checks.append(sigma_max <= sigma_tolerance)
    passed = bool(all(checks)) if checks else None
    return CompareReport(kind=a.kind, method="curve", distance=max_abs,
                         sigma_max=sigma_max, passed=passed,
                         threshold=tolerance, sigma_threshold=sigma_tolerance,
                         details={"points": len(diff)})

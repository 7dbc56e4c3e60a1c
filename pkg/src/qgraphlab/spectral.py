"""Closed-graph spectrum: eigenphases, certified level finding, unfolding.

A level is a k with det(1 - U(k)) = 0. All 2B eigenphases of U(k) move
upward monotonically with k (velocity between the shortest and longest bond
length), and the total phase of det U(k) is exactly linear in k. Together
these give an exact integer count of the levels in any window from two
endpoint diagonalizations: the winding certificate. Between certified
counts, levels are located cheaply on the rescaled secular determinant,
a real function of k whose sign flips at each simple level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .errors import NumericalIntegrityError, SolverError, ConfigurationError
from .graphs import Graph, EvolutionMap, evolution_map, graph_hash

_TWO_PI = 2.0 * np.pi


@dataclass
class SpectrumResult:
    """Levels of a closed graph in one k window, with completeness certificate."""

    levels: np.ndarray
    window: tuple
    winding_count: int
    mean_density: float
    graph_hash: str = ""
    degenerate_flags: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.levels)


@dataclass
class UnfoldedSpectrum:
    """Levels mapped to unit mean spacing, x = k * mean_density."""

    values: np.ndarray
    mean_density: float
    source: str = "graph"
    window: tuple | None = None


def eigenphases(graph: Graph, k: float, unitarity_tol: float = 1e-8) -> np.ndarray:
    """Sorted eigenphases of U(k) in [0, 2pi).

    Rejects a non-unitary evolution map (residual above unitarity_tol), which
    signals corrupted vertex conditions rather than roundoff.
    """
    em = evolution_map(graph)
    U = em.at(k)
    resid = np.abs(U @ U.conj().T - np.eye(U.shape[0])).max()
    if resid > unitarity_tol:
        raise NumericalIntegrityError(
            f"evolution map not unitary at k={k}: residual {resid:.2e}")
    return np.sort(np.mod(np.angle(np.linalg.eigvals(U)), _TWO_PI))


def _phase_sum(em: EvolutionMap, k: float) -> float:
    U = em.at(k)
    return float(np.mod(np.angle(np.linalg.eigvals(U)), _TWO_PI).sum())


def _winding(em: EvolutionMap, k_lo: float, k_hi: float,
             sum_lo: float, sum_hi: float) -> int:
    """Exact number of levels in (k_lo, k_hi] from endpoint phase sums."""
    raw = (em.trace_length * (k_hi - k_lo) + sum_lo - sum_hi) / _TWO_PI
    count = int(round(raw))
    if abs(raw - count) > 1e-6:
        raise NumericalIntegrityError(
            f"winding certificate non-integer: {raw!r} over "
            f"[{k_lo}, {k_hi}]")
    return count


def winding_count(graph: Graph, k_lo: float, k_hi: float) -> int:
    """Certified level count for the window, from two diagonalizations."""
    em = evolution_map(graph)
    return _winding(em, k_lo, k_hi, _phase_sum(em, k_lo), _phase_sum(em, k_hi))


class _Secular:
    """Rescaled secular determinant: a real function vanishing at levels.

    det(1 - U(k)) times e^{-i(k tr L + arg det factor)/2} is real (unitarity
    of U plus the exactly linear total phase of det U); its sign flips at
    every simple level. Evaluated via LU so a sweep costs far less than an
    eigendecomposition. Returns (sign, log|value|).
    """

    def __init__(self, em: EvolutionMap):
        self.em = em
        self.n = em.factor.shape[0]
        self._eye = np.eye(self.n, dtype=complex)
        self.evals = 0

    def __call__(self, k: float):
        self.evals += 1
        A = self._eye - self.em.at(k)
        lu, piv = sla.lu_factor(A, overwrite_a=True, check_finite=False)
        diag = np.diagonal(lu)
        mags = np.abs(diag)
        if np.any(mags == 0.0):
            return 0.0, -np.inf
        swaps = int(np.count_nonzero(piv != np.arange(self.n)))
        ang = float(np.angle(diag).sum()) + np.pi * swaps
        half = ang - 0.5 * (k * self.em.trace_length + self.em.factor_phase)
        c = np.cos(half)
        sign = 1.0 if c >= 0 else -1.0
        return sign, float(np.log(mags).sum() + np.log(max(abs(c), 1e-300)))


def _bracket_root(sec: _Secular, a: float, b: float, fa, fb,
                  xtol: float) -> float:
    """Root of the secular function in a sign-change bracket."""
    ref = max(fa[1], fb[1])
    if not np.isfinite(ref):
        ref = 0.0

    def f(k):
        s, lm = sec(k)
        return s * np.exp(min(lm - ref, 50.0))

    va = fa[0] * np.exp(min(fa[1] - ref, 50.0))
    vb = fb[0] * np.exp(min(fb[1] - ref, 50.0))
    if va == 0.0:
        return a
    if vb == 0.0:
        return b
    return brentq(f, a, b, xtol=xtol, rtol=1e-15)


def find_levels(graph: Graph, k_lo: float, k_hi: float,
                target_tol: float = 1e-10, grid_step: float | None = None,
                collision_floor: float = 1e-10,
                max_depth: int = 80) -> SpectrumResult:
    """All levels in (k_lo, k_hi], certified complete by the winding count.

    Parameters
    ----------
    target_tol : absolute localization tolerance for each level.
    grid_step : initial scan step; defaults to a quarter mean spacing,
        capped so the per-step motion of any eigenphase stays below pi/2.
    collision_floor : levels that cannot be separated above this distance
        are reported as repeated values with a degeneracy flag.
    """
    if not (k_hi > k_lo):
        raise ConfigurationError("need k_hi > k_lo")
    em = evolution_map(graph)
    d_mean = graph.mean_density()
    L_max = float(graph.doubled_lengths.max())
    step_cap = 0.45 * np.pi / L_max
    if grid_step is None:
        grid_step = min(1.0 / (4.0 * d_mean), step_cap)
    else:
        grid_step = min(grid_step, step_cap)

    n_pts = int(np.ceil((k_hi - k_lo) / grid_step)) + 1
    ks = np.linspace(k_lo, k_hi, max(n_pts, 2))
    sec = _Secular(em)
    vals = [sec(k) for k in ks]

    sum_lo = _phase_sum(em, k_lo)
    sum_hi = _phase_sum(em, k_hi)
    eig_evals = 2
    total = _winding(em, k_lo, k_hi, sum_lo, sum_hi)

    roots: list[float] = []
    flags: list[int] = []
    for i in range(len(ks) - 1):
        sa, sb = vals[i][0], vals[i + 1][0]
        if sa == 0.0:
            if not roots or abs(roots[-1] - ks[i]) > target_tol:
                roots.append(float(ks[i]))
                flags.append(0)
            continue
        if sb == 0.0:
            continue  # claimed by the next interval's left endpoint
        if sa * sb < 0:
            roots.append(_bracket_root(sec, ks[i], ks[i + 1], vals[i],
                                       vals[i + 1], target_tol))
            flags.append(0)

    if len(roots) != total:
        roots, flags, extra_eigs = _recover(
            em, sec, ks, vals, roots, flags, total, sum_lo, sum_hi,
            target_tol, collision_floor, max_depth)
        eig_evals += extra_eigs

    if len(roots) != total:
        raise SolverError(
            f"located {len(roots)} levels but certificate says {total} in "
            f"[{k_lo}, {k_hi}]")

    order = np.argsort(roots)
    levels = np.asarray(roots, dtype=float)[order]
    flag_arr = np.asarray(flags, dtype=int)[order]
    # adjacent collisions below the floor get flagged even when located
    close = np.flatnonzero(np.diff(levels) < collision_floor)
    for i in close:
        flag_arr[i] = flag_arr[i + 1] = 1
    return SpectrumResult(
        levels=levels,
        window=(k_lo, k_hi),
        winding_count=total,
        mean_density=d_mean,
        graph_hash=graph_hash(graph),
        degenerate_flags=flag_arr,
        diagnostics={
            "grid_step": float(grid_step),
            "secular_evals": sec.evals,
            "eig_evals": eig_evals,
            "degenerate_count": int(flag_arr.sum()),
        },
    )


def _recover(em, sec, ks, vals, roots, flags, total, sum_lo, sum_hi,
             target_tol, collision_floor, max_depth):
    """Resolve levels invisible to sign scanning (even-multiplicity roots).

    Drills down with exact phase-sum counts, probing the cheap secular sign
    at each midpoint first so nearly-degenerate pairs split back into
    ordinary brackets as soon as the interval is narrow enough.
    """
    eig_evals = 0
    found = sorted(roots)
    found_flags = {k: f for k, f in zip(roots, flags)}

    def count_found(a, b):
        lo = np.searchsorted(found, a, side="right")
        hi = np.searchsorted(found, b, side="right")
        return hi - lo

    def add_root(k, flag):
        idx = np.searchsorted(found, k)
        found.insert(idx, k)
        found_flags[k] = flag

    def drill(a, b, Sa, Sb, va, vb, depth):
        nonlocal eig_evals
        missing = _winding(em, a, b, Sa, Sb) - count_found(a, b)
        if missing <= 0:
            return
        if depth > max_depth:
            raise SolverError(
                f"refinement depth exhausted on [{a}, {b}] "
                f"with {missing} unresolved levels")
        if (b - a) <= max(collision_floor, 2.0 * target_tol):
            mid = 0.5 * (a + b)
            for _ in range(missing):
                add_root(mid, 1)
            return
        mid = 0.5 * (a + b)
        vm = sec(mid)
        if va[0] != 0.0 and vm[0] != 0.0 and va[0] * vm[0] < 0 \
                and count_found(a, mid) == 0:
            add_root(_bracket_root(sec, a, mid, va, vm, target_tol), 0)
        if vm[0] != 0.0 and vb[0] != 0.0 and vm[0] * vb[0] < 0 \
                and count_found(mid, b) == 0:
            add_root(_bracket_root(sec, mid, b, vm, vb, target_tol), 0)
        if _winding(em, a, b, Sa, Sb) == count_found(a, b):
            return
        Sm = _phase_sum(em, mid)
        eig_evals += 1
        drill(a, mid, Sa, Sm, va, vm, depth + 1)
        drill(mid, b, Sm, Sb, vm, vb, depth + 1)

    drill(float(ks[0]), float(ks[-1]), sum_lo, sum_hi, vals[0], vals[-1], 0)
    out_flags = [found_flags[k] for k in found]
    return found, out_flags, eig_evals


def unfold(result: SpectrumResult | np.ndarray,
           mean_density: float | None = None,
           source: str = "graph") -> UnfoldedSpectrum:
    """Rescale levels to unit mean spacing."""
    if isinstance(result, SpectrumResult):
        levels = result.levels
        density = result.mean_density
        window = result.window
    else:
        levels = np.asarray(result, dtype=float)
        if mean_density is None:
            raise ConfigurationError("mean_density required for raw level arrays")
        density = float(mean_density)
        window = None
    return UnfoldedSpectrum(values=levels * density, mean_density=density,
                            source=source, window=window)


def merge_spectra(parts: list[SpectrumResult]) -> SpectrumResult:
    """Concatenate adjacent subwindow results into one certified result.

    The winding certificate telescopes exactly across shared boundaries, so
    the merged count is the sum; a level within target tolerance of a shared
    boundary could be claimed by both sides, in which case the surplus
    duplicate is dropped.
    """
    if not parts:
        raise ConfigurationError("nothing to merge")
    parts = sorted(parts, key=lambda r: r.window[0])
    for left, right in zip(parts, parts[1:]):
        if abs(left.window[1] - right.window[0]) > 1e-12:
            raise ConfigurationError("subwindows do not tile the window")
    total = sum(p.winding_count for p in parts)
    levels = np.concatenate([p.levels for p in parts])
    flags = np.concatenate([
        p.degenerate_flags if p.degenerate_flags is not None
        else np.zeros(p.count, dtype=int)
        for p in parts])
    order = np.argsort(levels)
    levels, flags = levels[order], flags[order]
    if len(levels) > total:
        surplus = len(levels) - total
        gaps = np.diff(levels)
        drop = np.argsort(gaps)[:surplus]
        if np.any(gaps[drop] > 1e-9):
            raise SolverError("merged spectra disagree with summed certificate")
        keep = np.ones(len(levels), dtype=bool)
        keep[drop + 1] = False
        levels, flags = levels[keep], flags[keep]
    if len(levels) != total:
        raise SolverError(
            f"merged count {len(levels)} != summed certificate {total}")
    diag = {"parts": len(parts)}
    return SpectrumResult(
        levels=levels,
        window=(parts[0].window[0], parts[-1].window[1]),
        winding_count=total,
        mean_density=parts[0].mean_density,
        graph_hash=parts[0].graph_hash,
        degenerate_flags=flags,
        diagnostics=diag,
    )


def split_window(k_lo: float, k_hi: float, mean_density: float,
                 levels_per_part: float = 48.0) -> list[tuple]:
    """Tile a window into subwindows sized for roughly equal level counts."""
    span = k_hi - k_lo
    n = max(1, int(np.ceil(span * mean_density / levels_per_part)))
    edges = np.linspace(k_lo, k_hi, n + 1)
    return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]

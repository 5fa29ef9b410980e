"""Full-spectrum diagnostics for band ensembles.

Density of states against the semicircle, nearest-neighbour spacings against
Poisson and the GUE Wigner surmise, pair rates in short intervals,
eigenvector correlators, level simplicity and block-level Wegner tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import special, stats

from .ensemble import (BandMatrixSpec, BlockBandMatrix, Symmetry, bulk_row_variance, dense_batch,
                       sample_batch, to_dense)
from .moments import DecayFit, weighted_log_fit
from .rng import TAG_SHIFT, map_chunks, substream

__all__ = [
    "EIGEN_CAP",
    "InsufficientStatistics",
    "SpectrumSample",
    "PointProcessWindow",
    "eigen_decompose",
    "sample_spectra",
    "semicircle_density",
    "semicircle_cdf",
    "DosHistogram",
    "dos_histogram",
    "rescale_near",
    "poisson_cdf",
    "surmise_cdf",
    "surmise_pdf",
    "unfold",
    "SpacingResult",
    "spacing_distribution",
    "MinamiResult",
    "minami_pair_rate",
    "CorrelatorResult",
    "eigenvector_correlator",
    "SimplicityReport",
    "simplicity_check",
    "WegnerCurve",
    "wegner_block_tail",
]

EIGEN_CAP = 4096


class InsufficientStatistics(ValueError):
    """Too few events or spacings for the requested statistic."""


@dataclass(frozen=True, eq=False)
class SpectrumSample:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    spec: Optional[BandMatrixSpec] = None
    seed_index: Optional[int] = None

    @property
    def N(self) -> int:
        return self.eigenvalues.shape[0]


def _as_dense(M) -> np.ndarray:
    return to_dense(M) if isinstance(M, BlockBandMatrix) else np.asarray(M)


def eigen_decompose(M, want_vectors: bool = False, cap: int = EIGEN_CAP, seed_index=None) -> SpectrumSample:
    """Full spectrum (ascending) of a Hermitian matrix, with eigenvectors as columns on request."""
    X = _as_dense(M)
    if X.shape[0] > cap:
        raise ValueError(f"dense eigensolve limited to N <= {cap}, got {X.shape[0]}")
    spec = M.spec if isinstance(M, BlockBandMatrix) else None
    if want_vectors:
        w, v = np.linalg.eigh(X)
        return SpectrumSample(w, v, spec, seed_index)
    return SpectrumSample(np.linalg.eigvalsh(X), None, spec, seed_index)


def _eig_chunk_size(spec: BandMatrixSpec) -> int:
    return int(max(1, min(1024, 2**22 // spec.N**2)))


def _eigvals_chunk(start: int, stop: int, spec: BandMatrixSpec) -> np.ndarray:
    V, T = sample_batch(spec, start, stop)
    return np.linalg.eigvalsh(dense_batch(V, T))


def sample_spectra(spec: BandMatrixSpec, samples: int, workers: int = 1) -> np.ndarray:
    """Eigenvalues of ``samples`` draws, shape ``(samples, N)``, each row ascending."""
    if spec.N > EIGEN_CAP:
        raise ValueError(f"dense eigensolve limited to N <= {EIGEN_CAP}")
    parts = map_chunks(_eigvals_chunk, samples, workers, chunk=_eig_chunk_size(spec), spec=spec)
    return np.concatenate(parts) if parts else np.empty((0, spec.N))


# ---------------------------------------------------------------------------
# density of states
# ---------------------------------------------------------------------------

def semicircle_density(x, sigma: float = 1.0):
    """``sqrt(4 sigma^2 - x^2) / (2 pi sigma^2)`` on ``[-2 sigma, 2 sigma]``, zero outside."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.clip(4 * sigma**2 - x**2, 0.0, None)) / (2 * math.pi * sigma**2)


def semicircle_cdf(x, sigma: float = 1.0):
    u = np.clip(np.asarray(x, dtype=float) / (2 * sigma), -1.0, 1.0)
    return 0.5 + (u * np.sqrt(1 - u**2) + np.arcsin(u)) / math.pi


@dataclass(frozen=True)
class DosHistogram:
    edges: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    reference: np.ndarray
    sigma: float
    sup_deviation: float
    l1_deviation: float
    samples: int


def dos_histogram(spec: BandMatrixSpec, samples: int, bins: int = 32, workers: int = 1,
                  lim: float | None = None, sigma: float | None = None) -> DosHistogram:
    """Pooled eigenvalue density in units of ``sigma`` against the semicircle.

    ``sigma^2`` defaults to the bulk row variance of the ensemble, so the
    reference is supported on ``[-2, 2]``.  Bins are equal-width on
    ``[-lim, lim]`` (default ``2.05``).  Densities are normalized by the
    total eigenvalue count, and the reference is the semicircle mass of each
    bin divided by its width.
    """
    sigma = math.sqrt(bulk_row_variance(spec)) if sigma is None else float(sigma)
    lim = 2.05 if lim is None else float(lim)
    edges = np.linspace(-lim, lim, bins + 1)
    ev = sample_spectra(spec, samples, workers) / sigma
    width = np.diff(edges)
    per_draw = np.stack([np.histogram(row, edges)[0] for row in ev]) / (spec.N * width)
    density = per_draw.mean(axis=0)
    se = per_draw.std(axis=0, ddof=1) / math.sqrt(samples) if samples > 1 else np.zeros(bins)
    ref = np.diff(semicircle_cdf(edges)) / width
    dev = np.abs(density - ref)
    return DosHistogram(edges, density, se, ref, sigma, float(dev.max()), float(np.sum(dev * width)), samples)


# ---------------------------------------------------------------------------
# local statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointProcessWindow:
    lambda0: float
    rescaled: np.ndarray
    halfwidth: float


def rescale_near(sample, lambda0: float, window: float = math.inf) -> PointProcessWindow:
    """Points ``N (lambda_j - lambda0)`` with ``|.| <= window``."""
    ev = np.asarray(sample.eigenvalues if isinstance(sample, SpectrumSample) else sample, dtype=float)
    r = ev.size * (ev - lambda0)
    return PointProcessWindow(float(lambda0), r[np.abs(r) <= window], float(window))


def poisson_cdf(s):
    return 1.0 - np.exp(-np.asarray(s, dtype=float))


def surmise_pdf(s):
    """GUE Wigner surmise ``(32/pi^2) s^2 exp(-4 s^2/pi)``."""
    s = np.asarray(s, dtype=float)
    return 32.0 / math.pi**2 * s**2 * np.exp(-4.0 * s**2 / math.pi)


def surmise_cdf(s):
    s = np.asarray(s, dtype=float)
    return special.erf(2.0 * s / math.sqrt(math.pi)) - 4.0 * s / math.pi * np.exp(-4.0 * s**2 / math.pi)


def unfold(spectra: Sequence[np.ndarray], method: str = "empirical", sigma: float | None = None) -> list:
    """Map eigenvalues to unit mean spacing.

    ``"empirical"`` uses, for each spectrum, the linearly interpolated pooled
    staircase of the *other* spectra (divided by their number); a lone
    spectrum uses its own staircase.  ``"semicircle"`` uses ``N F(lambda/sigma)``
    with the semicircle distribution function ``F``.
    """
    spectra = [np.sort(np.asarray(s, dtype=float)) for s in spectra]
    if method == "semicircle":
        if sigma is None:
            raise ValueError("semicircle unfolding needs sigma")
        return [s.size * semicircle_cdf(s / sigma) for s in spectra]
    if method != "empirical":
        raise ValueError(f"unknown unfolding {method!r}")
    K = len(spectra)
    if K == 1:
        s = spectra[0]
        return [np.interp(s, s, np.arange(1, s.size + 1, dtype=float))]
    pooled = np.sort(np.concatenate(spectra))
    out = []
    for s in spectra:
        # remove this spectrum from the pooled staircase
        keep = np.ones(pooled.size, dtype=bool)
        pos = np.searchsorted(pooled, s)
        # equal values: step forward to an unused slot
        for i, p in enumerate(pos):
            while not keep[p]:
                p += 1
            keep[p] = False
        others = pooled[keep]
        out.append(np.interp(s, others, np.arange(1, others.size + 1, dtype=float)) / (K - 1))
    return out


@dataclass(frozen=True)
class SpacingResult:
    spacings: np.ndarray
    edges: np.ndarray
    density: np.ndarray
    ks_poisson: float
    ks_surmise: float
    mean_spacing: float
    window: tuple


def spacing_distribution(spectra, lambda0: float = 0.0, window: float | None = None,
                         unfolding: str = "empirical", sigma: float | None = None,
                         min_spacings: int = 1000, bin_width: float = 0.1) -> SpacingResult:
    """Nearest-neighbour spacings of unfolded eigenvalues in ``[lambda0 - window, lambda0 + window]``.

    ``window`` defaults to the central half of the pooled spectrum about
    ``lambda0``.  Kolmogorov-Smirnov distances to the Poisson law and to the
    GUE surmise are reported.
    """
    spectra = [np.sort(np.asarray(s.eigenvalues if isinstance(s, SpectrumSample) else s, dtype=float))
               for s in spectra]
    if window is None:
        pooled = np.concatenate(spectra)
        window = float(np.quantile(np.abs(pooled - lambda0), 0.5))
    lo, hi = lambda0 - window, lambda0 + window
    unfolded = unfold(spectra, unfolding, sigma)
    sp = []
    for raw, u in zip(spectra, unfolded):
        inside = (raw >= lo) & (raw <= hi)
        if inside.sum() >= 2:
            sp.append(np.diff(u[inside]))
    spacings = np.concatenate(sp) if sp else np.empty(0)
    if spacings.size < min_spacings:
        raise InsufficientStatistics(f"{spacings.size} pooled spacings, need at least {min_spacings}")
    top = max(4.0, float(spacings.max()))
    edges = np.arange(0.0, top + bin_width, bin_width)
    counts, edges = np.histogram(spacings, edges)
    density = counts / (spacings.size * np.diff(edges))
    ks_p = float(stats.kstest(spacings, poisson_cdf).statistic)
    ks_s = float(stats.kstest(spacings, surmise_cdf).statistic)
    return SpacingResult(spacings, edges, density, ks_p, ks_s, float(spacings.mean()), (lo, hi))


@dataclass(frozen=True)
class MinamiResult:
    lengths: np.ndarray
    rate: np.ndarray  # P[# >= 2] / N^2
    stderr: np.ndarray
    single_rate: np.ndarray  # P[# >= 1] / N
    pair_events: np.ndarray
    slope: Optional[float]
    slope_se: Optional[float]
    fit_range: Optional[tuple]
    samples: int


def minami_pair_rate(spec: BandMatrixSpec, interval_lengths, lambda0: float = 0.0, samples: int = 10_000,
                     workers: int = 1, fit_range: tuple | None = None, spectra: np.ndarray | None = None) -> MinamiResult:
    """Empirical ``P[#{lambda_j in I} >= 2] / N^2`` for intervals ``I`` centered at ``lambda0``.

    The log-log slope is a weighted fit over lengths inside ``fit_range``
    (default: all lengths with at least one pair event).
    """
    L = np.asarray(interval_lengths, dtype=float)
    if L.ndim != 1 or np.any(L < 0):
        raise ValueError("interval lengths must be non-negative")
    ev = sample_spectra(spec, samples, workers) if spectra is None else np.asarray(spectra)
    S, N = ev.shape
    lo = lambda0 - L / 2.0
    hi = lambda0 + L / 2.0
    counts = np.empty((S, L.size), dtype=np.int64)
    for k in range(S):
        # closed intervals; a zero-length interval holds no mass
        c = np.searchsorted(ev[k], hi, side="right") - np.searchsorted(ev[k], lo, side="left")
        counts[k] = np.where(L > 0, c, 0)
    pairs = (counts >= 2).sum(axis=0)
    singles = (counts >= 1).sum(axis=0)
    p = pairs / S
    rate = p / N**2
    se = np.sqrt(p * (1 - p) / S) / N**2
    positive = np.flatnonzero(L > 0)
    if positive.size and pairs[positive[np.argmin(L[positive])]] == 0 and fit_range is None:
        raise InsufficientStatistics("no pair events at the smallest interval length")
    mask = (pairs > 0) & (L > 0)
    if fit_range is not None:
        mask &= (L >= fit_range[0]) & (L <= fit_range[1])
    slope = slope_se = None
    used = None
    if mask.sum() >= 2:
        x = np.log(L[mask])
        y = np.log(p[mask])
        w = pairs[mask].astype(float)  # relative variance of p is ~ 1/events
        coef = np.polyfit(x, y, 1, w=np.sqrt(w))
        slope = float(coef[0])
        xb = np.sum(w * x) / np.sum(w)
        resid = y - np.polyval(coef, x)
        dof = max(mask.sum() - 2, 1)
        scale = max(1.0, float(np.sum(w * resid**2)) / dof)
        slope_se = math.sqrt(scale / float(np.sum(w * (x - xb) ** 2)))
        used = (float(L[mask].min()), float(L[mask].max()))
    return MinamiResult(L, rate, se, singles / S / N, pairs, slope, slope_se, used, S)


# ---------------------------------------------------------------------------
# eigenvectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelatorResult:
    pairs: tuple
    values: np.ndarray
    stderr: np.ndarray
    empty_draws: int
    samples: int
    fit: Optional[DecayFit]
    fit_window: int


def _correlator_chunk(start, stop, spec, r, ii, jj):
    V, T = sample_batch(spec, start, stop)
    w, v = np.linalg.eigh(dense_batch(V, T))
    inside = np.abs(w) <= r  # (S, N)
    prod = np.abs(v[:, ii, :] * v[:, jj, :])  # (S, P, N)
    prod = np.where(inside[:, None, :], prod, 0.0)
    # sup over an empty window is 0
    return prod.max(axis=2), (~inside.any(axis=1)).sum()


def eigenvector_correlator(spec: BandMatrixSpec, r: float, site_pairs: Sequence[tuple] | None = None,
                           samples: int = 1000, workers: int = 1, fit_window: int | None = None,
                           x0: int = 1) -> CorrelatorResult:
    """``E sup_{|lambda_k| <= r} |v_k(i) v_k(j)|`` for 1-based site pairs.

    Draws with no eigenvalue in ``[-r, r]`` contribute 0 and are counted in
    ``empty_draws``.  The decay fit (in ``|i - j|``) uses distances above
    ``fit_window`` (default ``3W``).  Default pairs are ``(x0, x0 + d)`` for
    every ``d``.
    """
    if site_pairs is None:
        site_pairs = [(x0, x0 + d) for d in range(0, spec.N - x0 + 1)]
    site_pairs = tuple((int(i), int(j)) for i, j in site_pairs)
    ii = np.array([i - 1 for i, _ in site_pairs])
    jj = np.array([j - 1 for _, j in site_pairs])
    if np.any(ii < 0) or np.any(jj < 0) or np.any(ii >= spec.N) or np.any(jj >= spec.N):
        raise IndexError(f"site indices must lie in 1..{spec.N}")
    fit_window = 3 * spec.W if fit_window is None else int(fit_window)
    if fit_window < 3 * spec.W:
        raise ValueError(f"fit_window must be at least 3W = {3 * spec.W}")
    parts = map_chunks(_correlator_chunk, samples, workers, chunk=max(1, _eig_chunk_size(spec) // 4),
                       spec=spec, r=float(r), ii=ii, jj=jj)
    vals = np.concatenate([p[0] for p in parts])
    empty = int(sum(p[1] for p in parts))
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(samples) if samples > 1 else np.zeros_like(mean)
    dist = np.abs(ii - jj)
    use = (dist > fit_window) & (mean > 0) & (se > 0)
    fit = None
    if use.sum() >= 3:
        fit = weighted_log_fit(dist[use], mean[use], se[use])
    return CorrelatorResult(site_pairs, mean, se, empty, samples, fit, fit_window)


# ---------------------------------------------------------------------------
# simplicity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimplicityReport:
    min_gaps: np.ndarray
    threshold: float
    below: int


def simplicity_check(spectra, threshold: float = 1e-10) -> SimplicityReport:
    """Minimal eigenvalue gap per spectrum and the number below ``threshold``."""
    gaps = []
    for s in spectra:
        ev = np.sort(np.asarray(s.eigenvalues if isinstance(s, SpectrumSample) else s, dtype=float))
        gaps.append(float(np.diff(ev).min()) if ev.size > 1 else math.inf)
    gaps = np.array(gaps)
    return SimplicityReport(gaps, float(threshold), int((gaps < threshold).sum()))


# ---------------------------------------------------------------------------
# Wegner tails
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WegnerCurve:
    t: np.ndarray
    prob: np.ndarray
    stderr: np.ndarray
    reference: np.ndarray  # kappa / t, or 2 kappa / t for two blocks
    trace_bound: np.ndarray  # (2/tau^2) E tr[(V - A)^2 + tau^{-2}]^{-1}, tau = t W^{3/2}
    kappa: float
    samples: int


def _wegner_chunk(start, stop, law, W, sym, A, B, C, seed, t_scaled):
    out_min = np.empty(stop - start)
    trace = np.empty((stop - start, t_scaled.size))
    eps2 = 1.0 / t_scaled**2
    for k in range(stop - start):
        rng = substream(seed, start + k, tag=TAG_SHIFT)
        V1 = law.draw(rng, W, sym, 1)[0]
        if C is None:
            H = V1 - A
        else:
            V2 = law.draw(rng, W, sym, 1)[0]
            H = np.block([[V1 - A, C], [np.conj(C.T), V2 - B]])
        mu = np.linalg.eigvalsh(H)
        out_min[k] = np.abs(mu).min()
        trace[k] = np.sum(1.0 / (mu[:, None] ** 2 + eps2[None, :]), axis=0)
    return out_min, trace


def wegner_block_tail(diag_law, W: int, shift_A, t_grid, samples: int = 10_000, seed: int = 0,
                      workers: int = 1, symmetry="complex", shift_B=None, coupling_C=None) -> WegnerCurve:
    """Survival curve ``P(||(V - A)^{-1}|| > t W^{3/2})`` against ``kappa / t``.

    ``kappa = 2 pi sup h``.  With ``coupling_C`` the two-block matrix
    ``[[V1 - A, C], [C^†, V2 - B]]`` is used instead and the reference is
    ``2 kappa / t``.  ``trace_bound`` is the intermediate upper bound
    ``(2/tau^2) E tr[(H)^2 + tau^{-2}]^{-1}`` at ``tau = t W^{3/2}``, which
    dominates the empirical probability sample by sample.
    """
    sym = Symmetry.parse(symmetry)
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or np.any(t <= 0):
        raise ValueError("t_grid must be positive")
    A = np.atleast_2d(np.asarray(shift_A, dtype=sym.dtype))
    if A.shape != (W, W):
        raise ValueError("shift_A must be W x W")
    if not np.allclose(A, np.conj(A.T)):
        raise ValueError("shift_A must be Hermitian")
    C = B = None
    if coupling_C is not None:
        C = np.atleast_2d(np.asarray(coupling_C, dtype=sym.dtype))
        B = A if shift_B is None else np.atleast_2d(np.asarray(shift_B, dtype=sym.dtype))
    tau = t * W**1.5
    parts = map_chunks(_wegner_chunk, samples, workers, chunk=4096, law=diag_law, W=W, sym=sym,
                       A=A, B=B, C=C, seed=seed, t_scaled=tau)
    mins = np.concatenate([p[0] for p in parts])
    tr = np.concatenate([p[1] for p in parts])
    # ||H^{-1}|| > tau  iff  min |mu| < 1/tau
    prob = (mins[:, None] < 1.0 / tau[None, :]).mean(axis=0)
    se = np.sqrt(prob * (1 - prob) / samples)
    kappa = 2.0 * math.pi * diag_law.sup_h(sym)
    factor = 1.0 if C is None else 2.0
    ref = factor * kappa / t
    trace_bound = 2.0 / tau**2 * tr.mean(axis=0)
    return WegnerCurve(t, prob, se, ref, trace_bound, kappa, samples)

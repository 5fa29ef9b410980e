"""Monte Carlo estimators for resolvent tails, fractional moments and decay.

All estimators draw sample ``k`` from its own random stream, so results do
not depend on the number of workers.  Point estimates use median-of-means
over 16 groups, with sample ``k`` in group ``k % 16``.

Also here: the Hölder-gap identity for ``Phi(q) = ln E exp(qX)`` and a
simulator for the conditional domination bound
``E exp(-sum U_j) <= exp(-(1 - e^{-delta}) p0 n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ensemble import BandMatrixSpec, Deterministic, sample_batch
from .resolvent import COND_LIMIT, batched_chains, batched_column
from .rng import TAG_SCALAR, map_chunks, substream

__all__ = [
    "GROUPS",
    "MAX_ATTEMPTS",
    "MomentEstimate",
    "TailCurve",
    "DecayFit",
    "DecayProfile",
    "FitDegenerate",
    "ScanRow",
    "ScanResult",
    "HolderGapReport",
    "DominationResult",
    "median_of_means",
    "resolvent_columns",
    "fractional_moment",
    "tail_probability",
    "layer_cake_moment",
    "decay_profile",
    "localization_length_scan",
    "moment_sup_over_lambda",
    "holder_gap",
    "conditional_domination_check",
]

GROUPS = 16
MAX_ATTEMPTS = 64
REJECT_LIMIT = 0.05
SPREAD_LIMIT = 0.25
S_MAX = 0.9


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    stderr: float
    groups: int
    samples: int
    rejected: int
    s: float
    unreliable: bool = False

    @property
    def rejection_rate(self) -> float:
        return self.rejected / self.samples if self.samples else 0.0


def median_of_means(values: np.ndarray, groups: int = GROUPS) -> tuple[float, float]:
    """Median of group means (sample ``k`` in group ``k % groups``) and its standard error.

    The error is ``sqrt(pi/2) * sd(group means) / sqrt(groups)``, the
    asymptotic efficiency factor of a median over normal group means.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n < groups:
        raise ValueError(f"need at least {groups} samples for median-of-means, got {n}")
    idx = np.arange(n) % groups
    sums = np.bincount(idx, weights=values, minlength=groups)
    counts = np.bincount(idx, minlength=groups)
    means = sums / counts
    value = float(np.median(means))
    se = math.sqrt(math.pi / 2.0) * float(np.std(means, ddof=1)) / math.sqrt(groups)
    return value, se


def _estimate(values: np.ndarray, s: float, rejected: int) -> MomentEstimate:
    value, se = median_of_means(values)
    n = values.shape[0]
    unreliable = rejected / n >= REJECT_LIMIT or (value > 0 and se / value > SPREAD_LIMIT)
    return MomentEstimate(value=max(value, 0.0), stderr=se, groups=GROUPS, samples=n,
                          rejected=int(rejected), s=float(s), unreliable=bool(unreliable))


def _check_s(s: float):
    if not 0.0 < s < 1.0:
        raise ValueError(f"fractional exponent s must lie in (0, 1), got {s}")
    if s > S_MAX:
        raise ValueError(f"fractional exponent s is capped at {S_MAX}, got {s}")


# ---------------------------------------------------------------------------
# resolvent sampling
# ---------------------------------------------------------------------------

def _column_chunk_size(spec: BandMatrixSpec) -> int:
    return int(max(16, min(256, 2**21 // (spec.N * spec.W))))


def _columns_chunk(start: int, stop: int, spec: BandMatrixSpec, lam: float, x: int):
    """``|G(y, x)|`` for all ``y`` and every sample in ``[start, stop)``, resampling singular draws."""
    S = stop - start
    attempts = np.zeros(S, dtype=np.int64)
    V, T = sample_batch(spec, start, stop)
    out = np.empty((S, spec.N))
    todo = np.arange(S)
    rejected = 0
    while todo.size:
        ch = batched_chains(V, T, lam, COND_LIMIT)
        col = np.abs(batched_column(ch, x))
        good = ch.ok & np.isfinite(col).all(axis=1)
        out[todo[good]] = col[good]
        bad = todo[~good]
        if bad.size == 0:
            break
        rejected += bad.size
        attempts[bad] += 1
        if attempts[bad].max() >= MAX_ATTEMPTS:
            raise RuntimeError(f"sample {start + int(bad[0])} singular after {MAX_ATTEMPTS} redraws at lambda={lam}")
        V = np.empty((bad.size,) + V.shape[1:], dtype=V.dtype)
        T = np.empty((bad.size,) + T.shape[1:], dtype=T.dtype)
        for k, b in enumerate(bad):
            V[k:k + 1], T[k:k + 1] = sample_batch(spec, start + int(b), start + int(b) + 1, attempts=[attempts[b]])
        todo = bad
    return out, rejected


def resolvent_columns(spec: BandMatrixSpec, lam: float, x: int, samples: int, workers: int = 1):
    """Absolute resolvent column ``|G(., x)|`` for ``samples`` draws.

    Returns an array of shape ``(samples, N)`` and the number of rejected draws.
    """
    if not 1 <= x <= spec.N:
        raise IndexError(f"site {x} outside 1..{spec.N}")
    parts = map_chunks(_columns_chunk, samples, workers, chunk=_column_chunk_size(spec),
                       spec=spec, lam=float(lam), x=int(x))
    if not parts:
        return np.empty((0, spec.N)), 0
    return np.concatenate([p[0] for p in parts]), int(sum(p[1] for p in parts))


def fractional_moment(spec: BandMatrixSpec, lam: float, x: int, y: int, s: float = 0.5,
                      samples: int = 10_000, workers: int = 1) -> MomentEstimate:
    """Median-of-means estimate of ``E |G(x, y)|^s``."""
    _check_s(s)
    if not 1 <= y <= spec.N:
        raise IndexError(f"site {y} outside 1..{spec.N}")
    cols, rejected = resolvent_columns(spec, lam, x, samples, workers)
    return _estimate(cols[:, y - 1] ** s, s, rejected)


@dataclass(frozen=True)
class TailCurve:
    t: np.ndarray
    prob: np.ndarray
    stderr: np.ndarray
    reference: Optional[np.ndarray]
    samples: int
    rejected: int

    def binomial_se(self, p) -> np.ndarray:
        """Binomial standard error at a hypothesized probability ``p``."""
        p = np.asarray(p, dtype=float)
        return np.sqrt(p * (1.0 - p) / self.samples)


def tail_probability(spec: BandMatrixSpec, lam: float, x: int, y: int, t_grid: Sequence[float],
                     samples: int = 10_000, workers: int = 1, kappa: float | None = None,
                     sigma: float | None = None) -> TailCurve:
    """Empirical survival function ``P(|G(x, y)| > t)`` with binomial errors.

    With ``kappa`` and ``sigma`` the reference curve ``kappa W^sigma / t`` is attached.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be positive and strictly increasing")
    cols, rejected = resolvent_columns(spec, lam, x, samples, workers)
    g = np.sort(cols[:, y - 1])
    exceed = g.size - np.searchsorted(g, t, side="right")
    p = exceed / g.size
    se = np.sqrt(p * (1.0 - p) / g.size)
    ref = None
    if kappa is not None:
        ref = kappa * spec.W ** (sigma or 0.0) / t
    return TailCurve(t, p, se, ref, int(g.size), rejected)


def layer_cake_moment(curve: TailCurve, s: float) -> float:
    """``E|G|^s = s int_0^inf P(|G| > t) t^{s-1} dt`` from a survival curve.

    Integrates in ``u = t^s`` by the trapezoid rule with ``P = 1`` at ``t = 0``,
    and closes the tail with a ``1/t`` extrapolation of the last grid point.
    """
    u = np.concatenate([[0.0], curve.t ** s])
    p = np.concatenate([[1.0], curve.prob])
    body = float(np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(u)))
    c = p[-1] * curve.t[-1]
    tail = c * u[-1] ** (1.0 - 1.0 / s) / (1.0 / s - 1.0) if c > 0 else 0.0
    return body + tail


# ---------------------------------------------------------------------------
# spatial decay
# ---------------------------------------------------------------------------

class FitDegenerate(ValueError):
    """Too few usable points, or a non-negative slope, in a decay fit."""

    def __init__(self, message: str, profile=None):
        super().__init__(message)
        self.profile = profile


@dataclass(frozen=True)
class DecayFit:
    slope: float
    slope_se: float
    intercept: float
    r_squared: float
    points: int

    @property
    def xi(self) -> float:
        return -1.0 / self.slope if self.slope < 0 else math.nan


@dataclass(frozen=True)
class DecayProfile:
    lam: float
    s: float
    x0: int
    points: tuple
    fit: Optional[DecayFit]
    fit_window: int

    @property
    def distances(self) -> np.ndarray:
        return np.array([d for d, _ in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for _, e in self.points])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([e.stderr for _, e in self.points])

    @property
    def xi(self) -> float:
        return self.fit.xi if self.fit else math.nan


def weighted_log_fit(d: np.ndarray, value: np.ndarray, se: np.ndarray) -> DecayFit:
    """Weighted least squares of ``ln value`` on ``d`` with weights ``(value/se)^2``.

    The slope error is inflated by ``sqrt(chi2/dof)`` when the scatter exceeds
    the error bars.  ``r_squared`` is the weighted coefficient of determination.
    """
    d = np.asarray(d, dtype=float)
    y = np.log(value)
    rel = np.asarray(se, dtype=float) / value
    floor = max(float(rel[rel > 0].min()) if np.any(rel > 0) else 1.0, 1e-12)
    w = 1.0 / np.maximum(rel, floor) ** 2
    A = np.stack([np.ones_like(d), d], axis=1)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    b0, b1 = coef
    resid = y - (b0 + b1 * d)
    ybar = np.sum(w * y) / np.sum(w)
    ss_res = float(np.sum(w * resid**2))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    dof = max(d.size - 2, 1)
    dbar = np.sum(w * d) / np.sum(w)
    var_b1 = 1.0 / float(np.sum(w * (d - dbar) ** 2))
    scale = max(1.0, ss_res / dof)
    return DecayFit(slope=float(b1), slope_se=math.sqrt(var_b1 * scale), intercept=float(b0),
                    r_squared=float(r2), points=int(d.size))


def decay_profile(spec: BandMatrixSpec, lam: float, s: float = 0.5, x0: int = 1,
                  distances: Sequence[int] | None = None, samples: int = 10_000,
                  workers: int = 1, fit_window: int | None = None, strict: bool = True) -> DecayProfile:
    """``E |G(x0, x0 + d)|^s`` against ``d`` with an exponential fit over ``d > fit_window``.

    All distances are evaluated on the same draws.  ``fit_window`` defaults
    to ``3W`` and may not be smaller.  With ``strict`` a degenerate fit raises
    :class:`FitDegenerate` (carrying the profile); otherwise ``fit`` is None.
    """
    _check_s(s)
    W = spec.W
    fit_window = 3 * W if fit_window is None else int(fit_window)
    if fit_window < 3 * W:
        raise ValueError(f"fit_window must be at least 3W = {3 * W}")
    if distances is None:
        distances = range(1, spec.N - x0 + 1)
    distances = [int(d) for d in distances]
    if any(d < 0 or not 1 <= x0 + d <= spec.N for d in distances):
        raise ValueError("distances must keep x0 + d inside the matrix")
    cols, rejected = resolvent_columns(spec, lam, x0, samples, workers)
    points = []
    for d in distances:
        points.append((d, _estimate(cols[:, x0 + d - 1] ** s, s, rejected)))
    profile = DecayProfile(float(lam), float(s), int(x0), tuple(points), None, fit_window)

    usable = [(d, e) for d, e in points if d > fit_window and e.value > 0 and np.isfinite(e.value)]
    if len(usable) < 3:
        if strict:
            raise FitDegenerate(f"only {len(usable)} usable points beyond distance {fit_window}", profile)
        return profile
    fit = weighted_log_fit(np.array([d for d, _ in usable]), np.array([e.value for _, e in usable]),
                           np.array([e.stderr for _, e in usable]))
    profile = DecayProfile(profile.lam, profile.s, profile.x0, profile.points, fit, fit_window)
    if not fit.slope < 0:
        if strict:
            raise FitDegenerate(f"non-negative decay slope {fit.slope:.3g}", profile)
        return DecayProfile(profile.lam, profile.s, profile.x0, profile.points, None, fit_window)
    return profile


@dataclass(frozen=True)
class ScanRow:
    W: int
    N: int
    xi: float
    status: str  # "ok", "decoupled" or "degenerate"
    profile: Optional[DecayProfile] = field(repr=False, default=None)


@dataclass(frozen=True)
class ScanResult:
    rows: tuple
    loglog_slope: Optional[float]

    @property
    def widths(self) -> np.ndarray:
        return np.array([r.W for r in self.rows])

    @property
    def xis(self) -> np.ndarray:
        return np.array([r.xi for r in self.rows])


def localization_length_scan(specs: Sequence[BandMatrixSpec], lam: float = 0.0, s: float = 0.5,
                             samples: int = 10_000, workers: int = 1, x0: int = 1) -> ScanResult:
    """Localization length ``xi(W) = -1/slope`` for a family of specs.

    A spec whose off-diagonal moments all vanish exactly (no coupling between
    sites, e.g. the ``W = 1`` Gaussian band ensemble) has ``xi = 0`` and status
    ``"decoupled"``.  Failed fits have ``xi = nan`` and status ``"degenerate"``.
    The log-log slope of ``xi`` on ``W`` uses the rows with ``xi > 0`` and is
    None when fewer than two exist.
    """
    specs = list(specs)
    if len({(type(sp.diag_law), type(sp.offdiag_law), sp.symmetry) for sp in specs}) > 1:
        raise ValueError("all specs in a scan must share their laws and symmetry class")
    rows = []
    for sp in specs:
        try:
            prof = decay_profile(sp, lam, s, x0, samples=samples, workers=workers)
            rows.append(ScanRow(sp.W, sp.N, prof.xi, "ok", prof))
        except FitDegenerate as exc:
            prof = exc.profile
            off = prof.values if prof is not None else np.array([1.0])
            if prof is not None and off.size and np.all(off == 0):
                rows.append(ScanRow(sp.W, sp.N, 0.0, "decoupled", prof))
            else:
                rows.append(ScanRow(sp.W, sp.N, math.nan, "degenerate", prof))
    good = [(r.W, r.xi) for r in rows if r.status == "ok" and r.xi > 0]
    slope = None
    if len({w for w, _ in good}) >= 2:
        lw = np.log([w for w, _ in good])
        lx = np.log([x for _, x in good])
        slope = float(np.polyfit(lw, lx, 1)[0])
    return ScanResult(tuple(rows), slope)


def moment_sup_over_lambda(spec: BandMatrixSpec, r: float, x: int, y: int, s: float = 0.5,
                           samples: int = 10_000, points: int = 21, workers: int = 1):
    """Fractional moments on an equispaced grid of ``points`` values in ``[-r, r]``.

    Returns the grid, the estimates and the index of the largest estimate.
    """
    grid = np.linspace(-r, r, points)
    est = [fractional_moment(spec, lam, x, y, s, samples, workers) for lam in grid]
    k = int(np.argmax([e.value for e in est]))
    return grid, est, k


# ---------------------------------------------------------------------------
# Hölder gap
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolderGapReport:
    r: float
    s: float
    h_direct: float
    h_integral: float
    stderr: float
    q_grid: np.ndarray
    var_profile: np.ndarray


def _log_mgf(xc: np.ndarray, q: float) -> float:
    # ln mean exp(q xc) for xc <= 0 after the shift, so exp never overflows
    return float(np.log(np.mean(np.exp(q * xc))))


def _h_direct(xc: np.ndarray, r: float, s: float) -> float:
    return (r / s) * _log_mgf(xc, s) - _log_mgf(xc, r)


def _tilted_variance(xc: np.ndarray, q: float) -> float:
    w = np.exp(q * xc)
    w /= w.sum()
    m = float(np.dot(w, xc))
    return max(float(np.dot(w, (xc - m) ** 2)), 0.0)


def holder_gap(samples_of_X, r: float = 0.25, s: float = 0.5, q_grid=None) -> HolderGapReport:
    """Hölder gap ``h(r, s) = (r/s) Phi(s) - Phi(r)`` with ``Phi(q) = ln E e^{qX}``.

    ``h_integral`` evaluates ``(1/s) int_0^s min(r,q)(s - max(r,q)) Var_q(X) dq``
    by the trapezoid rule, ``Var_q`` being the variance under the tilted
    weights ``e^{qX}/E e^{qX}``.  Both quantities are invariant under shifts
    of ``X``; the samples are shifted by their maximum before exponentiating.
    """
    if not 0.0 < r < s:
        raise ValueError("need 0 < r < s")
    X = np.asarray(samples_of_X, dtype=float).ravel()
    if X.size == 0:
        raise ValueError("no samples")
    if not np.isfinite(X).all():
        raise OverflowError("non-finite samples of X")
    xc = X - X.max()
    if q_grid is None:
        q_grid = np.linspace(0.0, s, 64)
    q_grid = np.asarray(q_grid, dtype=float)
    if q_grid[0] != 0.0 or not math.isclose(q_grid[-1], s) or np.any(np.diff(q_grid) <= 0):
        raise ValueError("q_grid must increase from 0 to s")
    var = np.array([_tilted_variance(xc, q) for q in q_grid])
    kern = np.minimum(r, q_grid) * (s - np.maximum(r, q_grid))
    h_int = float(np.trapezoid(kern * var, q_grid)) / s
    h_dir = _h_direct(xc, r, s)
    if X.size >= 2 * GROUPS:
        idx = np.arange(X.size) % GROUPS
        gh = []
        for g in range(GROUPS):
            xg = X[idx == g]
            gh.append(_h_direct(xg - xg.max(), r, s))
        se = float(np.std(gh, ddof=1)) / math.sqrt(GROUPS)
    else:
        se = math.nan
    return HolderGapReport(float(r), float(s), h_dir, h_int, se, q_grid, var)


# ---------------------------------------------------------------------------
# conditional domination
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DominationResult:
    model: str
    n: int
    delta: float
    p0: float
    empirical: float
    stderr: float
    bound: float
    exact: Optional[float]
    samples: int

    @property
    def holds(self) -> bool:
        """``empirical <= bound (1 + 3 SE)``."""
        return self.empirical <= self.bound * (1.0 + 3.0 * self.stderr)


_DOM_CHUNK = 4096


def _domination_chunk(start, stop, model, nvars, delta, p0, params, seed):
    n = nvars
    rng = substream(seed, start // _DOM_CHUNK, tag=TAG_SCALAR)
    S = stop - start
    if model == "constant":
        U = np.full((S, n), delta)
    elif model == "iid":
        U = delta * (rng.random((S, n)) < p0)
    else:
        stay, p_lo, p_hi, a = params
        M = np.empty((S, n), dtype=np.int8)
        M[:, 0] = rng.random(S) < 0.5
        flips = rng.random((S, n)) >= stay
        for j in range(1, n):
            M[:, j] = np.where(flips[:, j], 1 - M[:, j - 1], M[:, j - 1])
        p = np.where(M == 1, p_hi, p_lo)
        B = rng.random((S, n)) < p
        U = delta * B + a * M
    return np.exp(-U.sum(axis=1))


def conditional_domination_check(n: int, delta: float, p0: float, model: str = "iid",
                                 samples: int = 100_000, seed: int = 0, workers: int = 1,
                                 stay: float = 0.9, p_low: float | None = None,
                                 p_high: float | None = None, coupling: float = 0.5) -> DominationResult:
    """Simulate ``E exp(-sum_j U_j)`` against ``exp(-(1 - e^{-delta}) p0 n)``.

    Models
    ------
    ``"constant"``
        ``U_j = delta``; requires ``p0 <= 1``.
    ``"iid"``
        ``U_j = delta * Bernoulli(p0)``; the exact value is
        ``((1 - p0) + p0 e^{-delta})^n``.
    ``"markov"``
        A sticky two-state chain ``M_j`` (stay probability ``stay``) modulates
        ``U_j = delta B_j + coupling M_j`` with ``B_j ~ Bernoulli(p(M_j))``
        conditionally independent given ``M``.  Every ``p(M) >= p0``, so
        ``P(U_j >= delta | past) >= p0`` holds by construction.
    """
    if n < 1 or delta <= 0 or not 0 < p0 <= 1:
        raise ValueError("need n >= 1, delta > 0 and 0 < p0 <= 1")
    params = None
    exact = None
    if model == "constant":
        exact = math.exp(-delta * n)
    elif model == "iid":
        exact = ((1.0 - p0) + p0 * math.exp(-delta)) ** n
    elif model == "markov":
        p_lo = p0 if p_low is None else p_low
        p_hi = min(1.0, max(p_lo, 0.5 * (1 + p0))) if p_high is None else p_high
        if p_lo < p0 or p_hi < p0 or p_lo > 1 or p_hi > 1:
            raise ValueError("markov model violates P(U_j >= delta | past) >= p0")
        if coupling < 0 or not 0 <= stay <= 1:
            raise ValueError("markov model needs coupling >= 0 and 0 <= stay <= 1")
        params = (float(stay), float(p_lo), float(p_hi), float(coupling))
    else:
        raise ValueError(f"unknown dependency model {model!r}")
    parts = map_chunks(_domination_chunk, samples, workers, chunk=_DOM_CHUNK, model=model, nvars=int(n),
                       delta=float(delta), p0=float(p0), params=params, seed=int(seed))
    vals = np.concatenate(parts)
    emp = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    bound = math.exp(-(1.0 - math.exp(-delta)) * p0 * n)
    return DominationResult(model, int(n), float(delta), float(p0), emp, se, bound, exact, int(vals.size))

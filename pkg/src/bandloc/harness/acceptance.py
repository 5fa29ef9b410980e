"""The acceptance suite: twelve numerical checks with fixed sizes and tolerances.

Each check returns a :class:`CriterionResult` whose tables hold every
measured number, so two runs can be compared byte for byte.  Timings are
kept out of the tables on purpose.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import ensemble as ens
from .. import moments as mom
from .. import resolvent as res
from .. import spectra as spc
from ..rng import TAG_SCALAR, substream
from .runner import Table, holder_samples, minami_lengths, summary_table

__all__ = ["CriterionResult", "CRITERIA", "run_suite", "run_criteria", "compare_tables"]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    tables: list = field(default_factory=list)
    elapsed: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.name}: {self.detail} ({self.elapsed:.1f}s)"


def _g(x: float) -> str:
    return format(float(x), ".6g")


# ---------------------------------------------------------------------------
# 1. chain vs dense oracle
# ---------------------------------------------------------------------------

_DIAG_CHOICES = ("gaussian", "holder", "box", "gaussian_trace")
_OFF_CHOICES = ("gaussian_triangular", "uniform_triangular", "identity")


def _instance(seed: int, i: int) -> tuple[ens.BandMatrixSpec, float]:
    rng = substream(seed, i, tag=TAG_SCALAR)
    W = (1, 2, 4, 8)[i % 4]
    n = int(rng.integers(1, 17))
    lam = (-1.5, 0.0, 0.7)[i % 3]
    sym = ("real", "complex")[(i // 4) % 2]
    if W == 1 and i % 8 == 0:
        diag = ens.ScalarDensity(("gaussian", "cauchy", "uniform")[(i // 8) % 3])
    else:
        kind = _DIAG_CHOICES[(i // 2) % 4]
        diag = {"gaussian": ens.GaussianWigner(), "holder": ens.HolderWigner(0.5),
                "box": ens.BoxWigner(1.0, 1.0), "gaussian_trace": ens.GaussianWigner("trace")}[kind]
    off = _OFF_CHOICES[(i // 3) % 3]
    offlaw = {"gaussian_triangular": ens.GaussianTriangular(), "uniform_triangular": ens.UniformTriangular(1.0),
              "identity": ens.Deterministic.identity(W)}[off]
    return ens.BandMatrixSpec(W=W, n=n, symmetry=sym, diag_law=diag, offdiag_law=offlaw, seed=seed), lam


def _relative_errors(chain: np.ndarray, oracle: np.ndarray) -> np.ndarray:
    err = np.abs(chain - oracle)
    den = np.abs(oracle)
    out = np.where(den > 0, err / np.where(den > 0, den, 1.0), np.where(err == 0, 0.0, np.inf))
    return out


def criterion_1(seed: int, workers: int) -> CriterionResult:
    rows = []
    worst = 0.0
    for i in range(200):
        spec, lam = _instance(seed, i)
        M = ens.sample_block_band(spec, i)
        try:
            G = res.dense_resolvent_oracle(M, lam)
            R = res.Resolvent(M, lam).dense()
        except (res.SingularBlock, res.SingularShift) as exc:
            rows.append((i, spec.W, spec.n, spec.symmetry.name.lower(), spec.diag_law.kind,
                         spec.offdiag_law.kind, lam, None, type(exc).__name__))
            worst = math.inf
            continue
        r = float(_relative_errors(R, G).max())
        worst = max(worst, r)
        rows.append((i, spec.W, spec.n, spec.symmetry.name.lower(), spec.diag_law.kind,
                     spec.offdiag_law.kind, lam, r, "ok"))
    passed = worst <= 1e-8
    tab = Table("c01_resolvent", ("instance", "W", "n", "symmetry", "diag_law", "offdiag_law", "lambda",
                                  "max_rel_err", "status"), rows)
    return CriterionResult(1, "resolvent oracle equivalence", passed,
                           f"200 instances, max relative error {_g(worst)} (limit 1e-08)", [tab])


# ---------------------------------------------------------------------------
# 2-3. scalar exact cases
# ---------------------------------------------------------------------------

def _scalar_spec(name: str, seed: int) -> ens.BandMatrixSpec:
    return ens.BandMatrixSpec(W=1, n=1, symmetry="real", diag_law=ens.ScalarDensity(name),
                              offdiag_law=ens.Deterministic(np.eye(1)), seed=seed)


def criterion_2(seed: int, workers: int) -> CriterionResult:
    t = np.array([1, 2, 4, 8, 16, 32, 64], dtype=float)
    c = mom.tail_probability(_scalar_spec("uniform", seed), 0.0, 1, 1, t, 100_000, workers)
    truth = 1.0 / t
    se = c.binomial_se(truth)
    ok = np.abs(c.prob - truth) <= 3 * se
    rows = [(ti, p, tr, s, bool(o)) for ti, p, tr, s, o in zip(t, c.prob, truth, se, ok)]
    z = np.where(se > 0, np.abs(c.prob - truth) / np.where(se > 0, se, 1), np.where(c.prob == truth, 0, np.inf))
    return CriterionResult(2, "Wegner 1/t tail (uniform scalar)", bool(ok.all()),
                           f"max |p - 1/t| = {_g(z.max())} binomial SE (limit 3)",
                           [Table("c02_tail", ("t", "prob", "truth", "binomial_se", "within"), rows)])


def criterion_3(seed: int, workers: int) -> CriterionResult:
    e = mom.fractional_moment(_scalar_spec("cauchy", seed), 0.0, 1, 1, 0.5, 100_000, workers)
    truth = math.sqrt(2.0)
    z = abs(e.value - truth) / e.stderr
    tab = summary_table("c03_cauchy", {"value": e.value, "stderr": e.stderr, "truth": truth, "z": z,
                                       "samples": e.samples, "rejected": e.rejected})
    return CriterionResult(3, "Cauchy fractional moment", bool(z <= 3),
                           f"estimate {_g(e.value)} +- {_g(e.stderr)}, {_g(z)} SE from sqrt(2)", [tab])


# ---------------------------------------------------------------------------
# 4. Hölder gap
# ---------------------------------------------------------------------------

def criterion_4(seed: int, workers: int) -> CriterionResult:
    r, s = 0.25, 0.5
    cases = [("gaussian", 0.0), ("gaussian", 5.0), ("uniform", 0.0), ("two_point", 0.0)]
    rows = []
    ok = True
    worst_gap = 0.0
    for k, (law, mean) in enumerate(cases):
        X = holder_samples(law, mean, 1_000_000, seed + k)
        h = mom.holder_gap(X, r, s)
        gap = abs(h.h_direct - h.h_integral)
        worst_gap = max(worst_gap, gap)
        ref = 1.0 / 32.0 if law == "gaussian" else None
        if law == "two_point":
            phi = lambda q: math.log((1 + math.exp(q)) / 2)
            ref = (r / s) * phi(s) - phi(r)
        z = abs(h.h_direct - ref) / h.stderr if ref is not None else None
        good = gap <= 1e-3 and (law != "gaussian" or z <= 3)
        ok &= good
        rows.append((law, mean, h.h_direct, h.h_integral, gap, h.stderr, ref, z, good))
    tab = Table("c04_holder", ("law", "mean", "h_direct", "h_integral", "abs_gap", "stderr", "reference",
                               "z", "passed"), rows)
    zg = max(row[7] for row in rows if row[0] == "gaussian")
    return CriterionResult(4, "Holder-gap identity", bool(ok),
                           f"max |h_direct - h_integral| = {_g(worst_gap)}, Gaussian within {_g(zg)} SE of 1/32",
                           [tab])


# ---------------------------------------------------------------------------
# 5. decay and localization length
# ---------------------------------------------------------------------------

def criterion_5(seed: int, workers: int) -> CriterionResult:
    specs = [ens.gaussian_band_spec(W, 100 * W, seed=seed) for W in (1, 2, 4)]
    scan = mom.localization_length_scan(specs, 0.0, 0.5, 10_000, workers)
    prof = scan.rows[1].profile
    fit = prof.fit
    decay_ok = fit is not None and fit.slope + 3 * fit.slope_se < 0 and fit.r_squared > 0.9
    xis = scan.xis
    mono = bool(np.all(np.isfinite(xis)) and np.all(np.diff(xis) > 0))
    rows = [(r.W, r.N, r.xi, r.status,
             r.profile.fit.slope if r.profile is not None and r.profile.fit else None,
             r.profile.fit.slope_se if r.profile is not None and r.profile.fit else None,
             r.profile.fit.r_squared if r.profile is not None and r.profile.fit else None) for r in scan.rows]
    prof_rows = [("decay_profile", 0.0, prof.x0, prof.x0 + d, d, e.s, e.value, e.stderr, e.samples, e.rejected)
                 for d, e in prof.points]
    tabs = [Table("c05_scan", ("W", "N", "xi", "status", "slope", "slope_se", "r_squared"), rows),
            Table("c05_profile", ("estimator", "lambda", "x", "y", "dist", "s", "value", "stderr", "n", "rejected"),
                  prof_rows)]
    detail = (f"W=2 slope {_g(fit.slope)} +- {_g(fit.slope_se)}, R^2 {_g(fit.r_squared)}; "
              f"xi(1,2,4) = {', '.join(_g(x) for x in xis)}") if fit else "W=2 fit degenerate"
    return CriterionResult(5, "exponential decay and xi(W)", bool(decay_ok and mono), detail, tabs)


# ---------------------------------------------------------------------------
# 6-8, 10-11. spectra
# ---------------------------------------------------------------------------

def criterion_6(seed: int, workers: int) -> CriterionResult:
    h = spc.dos_histogram(ens.gaussian_band_spec(16, 1024, seed=seed), 50, bins=32, workers=workers, lim=1.8)
    rows = list(zip(h.edges[:-1], h.edges[1:], h.density, h.stderr, h.reference))
    tab = Table("c06_dos", ("bin_left", "bin_right", "density", "stderr", "reference"), rows)
    return CriterionResult(6, "semicircle density of states", h.sup_deviation <= 0.05,
                           f"sup deviation {_g(h.sup_deviation)} (limit 0.05)", [tab])


def criterion_7(seed: int, workers: int) -> CriterionResult:
    ev_a = spc.sample_spectra(ens.gaussian_band_spec(1, 1000, seed=seed), 20, workers)
    a = spc.spacing_distribution(ev_a)
    ev_b = spc.sample_spectra(ens.gaussian_band_spec(200, 200, seed=seed), 50, workers)
    b = spc.spacing_distribution(ev_b)
    ok_a = a.ks_poisson <= 0.05
    ok_b = b.ks_surmise < b.ks_poisson
    tab = Table("c07_spacing", ("case", "spacings", "mean_spacing", "ks_poisson", "ks_surmise"),
                [("W=1,N=1000", a.spacings.size, a.mean_spacing, a.ks_poisson, a.ks_surmise),
                 ("W=N=200", b.spacings.size, b.mean_spacing, b.ks_poisson, b.ks_surmise)])
    return CriterionResult(7, "Poisson to GUE spacing crossover", bool(ok_a and ok_b),
                           f"W=1 KS(Poisson) {_g(a.ks_poisson)}; W=N KS(surmise) {_g(b.ks_surmise)} "
                           f"vs KS(Poisson) {_g(b.ks_poisson)}", [tab])


def criterion_8(seed: int, workers: int) -> CriterionResult:
    spec = ens.gaussian_band_spec(2, 128, seed=seed)
    L = minami_lengths(spec, 0.05, 11)
    r = spc.minami_pair_rate(spec, L, 0.0, 10_000, workers)
    ok = r.slope is not None and 1.8 <= r.slope <= 2.2
    rows = list(zip(r.lengths, r.rate, r.stderr, r.single_rate, r.pair_events))
    tabs = [Table("c08_minami", ("length", "rate", "stderr", "single_rate", "pair_events"), rows),
            summary_table("c08_minami_fit", {"slope": r.slope, "slope_se": r.slope_se})]
    return CriterionResult(8, "Minami quadratic pair scaling", bool(ok),
                           f"log-log slope {_g(r.slope)} +- {_g(r.slope_se)} over |I| in "
                           f"[{_g(L[0])}, {_g(L[-1])}]", tabs)


def criterion_9(seed: int, workers: int) -> CriterionResult:
    rows = []
    ok = True
    for n in (10, 30):
        d = mom.conditional_domination_check(n, 1.0, 0.5, "iid", 100_000, seed + n, workers)
        z = abs(d.empirical - d.exact) / d.stderr
        good = z <= 3 and d.holds
        ok &= good
        rows.append(("iid", n, d.empirical, d.stderr, d.exact, d.bound, z, good))
        m = mom.conditional_domination_check(n, 1.0, 0.5, "markov", 100_000, seed + 1000 + n, workers)
        ok &= m.holds
        rows.append(("markov", n, m.empirical, m.stderr, None, m.bound, None, m.holds))
    tab = Table("c09_domination", ("model", "n", "empirical", "stderr", "exact", "bound", "z", "passed"), rows)
    zmax = max(r[6] for r in rows if r[0] == "iid")
    return CriterionResult(9, "conditional domination bound", bool(ok),
                           f"iid within {_g(zmax)} SE of the exact product; Markov model below the bound", [tab])


def criterion_10(seed: int, workers: int) -> CriterionResult:
    law = ens.GaussianWigner()
    summ = ens.operator_norm_statistic(law, 512, 20, seed=seed, symmetry="complex", workers=workers)
    sigma = math.sqrt(law.second_moments(ens.Symmetry.COMPLEX)[1])
    ratio = summ.mean / sigma
    ok = 1.9 <= ratio <= 2.1
    tab = Table("c10_norm", ("draw", "norm"), list(enumerate(summ.norms)))
    return CriterionResult(10, "Bai-Yin operator norm", bool(ok), f"mean ||V|| = {_g(ratio)} sigma", [tab])


def criterion_11(seed: int, workers: int) -> CriterionResult:
    ev = spc.sample_spectra(ens.gaussian_band_spec(4, 64, seed=seed), 10_000, workers)
    rep = spc.simplicity_check(ev)
    q = np.quantile(rep.min_gaps, [0.0, 0.01, 0.5])
    tab = summary_table("c11_simplicity", {"draws": rep.min_gaps.size, "below_1e-10": rep.below,
                                           "min_gap": q[0], "q01_gap": q[1], "median_gap": q[2]})
    return CriterionResult(11, "simple spectrum", rep.below == 0,
                           f"{rep.below} gaps below 1e-10 in {rep.min_gaps.size} draws (smallest {_g(q[0])})", [tab])


CRITERIA: dict[int, Callable[[int, int], CriterionResult]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
}


def run_criteria(seed: int = 0, workers: int = 1, only=None) -> list[CriterionResult]:
    out = []
    for k, fn in CRITERIA.items():
        if only is not None and k not in only:
            continue
        t0 = time.perf_counter()
        r = fn(seed, workers)
        r.elapsed = time.perf_counter() - t0
        out.append(r)
    return out


def compare_tables(a: list[CriterionResult], b: list[CriterionResult]) -> list[str]:
    """Statistic names whose rendered CSV text differs between two runs."""
    ta = {t.statistic: t.render() for r in a for t in r.tables}
    tb = {t.statistic: t.render() for r in b for t in r.tables}
    return sorted(k for k in ta.keys() | tb.keys() if ta.get(k) != tb.get(k))


def run_suite(seed: int = 0, workers: int = 1, determinism: bool = False) -> list[CriterionResult]:
    """Criteria 1-11; with ``determinism`` also rerun with another worker count and compare (criterion 12)."""
    results = run_criteria(seed, workers)
    if determinism:
        t0 = time.perf_counter()
        other = 8 if workers != 8 else 1
        diff = compare_tables(results, run_criteria(seed, other))
        detail = (f"workers {workers} vs {other}: identical CSV bytes" if not diff
                  else f"workers {workers} vs {other}: differing outputs {', '.join(diff)}")
        results.append(CriterionResult(12, "determinism across worker counts", not diff, detail, [],
                                       time.perf_counter() - t0))
    return results

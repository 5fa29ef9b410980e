"""Execute an experiment config and persist CSV outputs plus a run manifest.

Outputs are written to temporary files and renamed into place; the manifest
is written last, so a directory holding a manifest always holds every file it
lists.  A failed run removes whatever it had already written.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from typing import Any, Callable

import numpy as np

from .. import ensemble as ens
from .. import moments as mom
from .. import resolvent as res
from .. import spectra as spc
from ..rng import TAG_SCALAR, partition, substream
from .config import ExperimentConfig, config_hash

__all__ = ["Table", "RunManifest", "run", "format_value", "write_csv", "ESTIMATOR_FUNCS"]

MOMENT_COLUMNS = ("estimator", "lambda", "x", "y", "dist", "s", "value", "stderr", "n", "rejected")


def format_value(v: Any) -> str:
    """CSV cell text: floats with 17 significant digits, None as empty."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    s = str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


@dataclass
class Table:
    statistic: str
    columns: tuple
    rows: list

    def render(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(format_value(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def summary_table(statistic: str, items: dict) -> Table:
    return Table(statistic, ("quantity", "value"), [(k, v) for k, v in items.items()])


def _atomic_write(path: str, text: str):
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, table: Table):
    _atomic_write(path, table.render())


@dataclass
class RunManifest:
    name: str
    estimator: str
    config_hash: str
    code_version: str
    wall_time: float
    workers: int
    worker_ranges: list
    failures: dict
    outputs: list
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str)


def _code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# ---------------------------------------------------------------------------
# estimators: each returns (tables, failures)
# ---------------------------------------------------------------------------

def _moment_row(name, lam, x, y, dist, e: mom.MomentEstimate):
    return (name, lam, x, y, dist, e.s, e.value, e.stderr, e.samples, e.rejected)


def _est_sample(cfg: ExperimentConfig, p: dict):
    spec = cfg.spec()
    M = ens.sample_block_band(spec, p["index"])
    rows = []
    for kind, blocks in (("V", M.V), ("T", M.T)):
        for b, B in enumerate(blocks, start=1):
            for i in range(spec.W):
                for j in range(spec.W):
                    z = complex(B[i, j])
                    rows.append((kind, b, i + 1, j + 1, z.real, z.imag))
    return [Table("blocks", ("block_kind", "block", "row", "col", "re", "im"), rows)], {}


def _est_resolvent(cfg, p):
    spec = cfg.spec()
    M = ens.sample_block_band(spec, p["index"])
    R = res.Resolvent(M, p["lambda"])
    ys = [p["y"]] if p["y"] is not None else range(1, spec.N + 1)
    G = res.dense_resolvent_oracle(M, p["lambda"]) if p["oracle"] and spec.N <= res.DENSE_CAP else None
    rows = []
    for y in ys:
        e = R.entry(p["x"], y)
        z = complex(e.value)
        err = abs(z - G[p["x"] - 1, y - 1]) if G is not None else None
        rows.append((p["x"], y, p["lambda"], z.real, z.imag, abs(z), e.max_cond, err))
    cols = ("x", "y", "lambda", "re", "im", "abs", "max_cond", "oracle_abs_err")
    return [Table("entries", cols, rows)], {}


def _est_moments(cfg, p):
    spec = cfg.spec()
    e = mom.fractional_moment(spec, p["lambda"], p["x"], p["y"], p["s"], cfg.samples, cfg.workers)
    tables = [Table("moments", MOMENT_COLUMNS,
                    [_moment_row("fractional_moment", p["lambda"], p["x"], p["y"], abs(p["y"] - p["x"]), e)])]
    if p["t_grid"] is not None:
        c = mom.tail_probability(spec, p["lambda"], p["x"], p["y"], p["t_grid"], cfg.samples, cfg.workers)
        rows = [(t, pr, se) for t, pr, se in zip(c.t, c.prob, c.stderr)]
        tables.append(Table("tail", ("t", "prob", "stderr"), rows))
    return tables, {"rejected": e.rejected}


def _est_decay(cfg, p):
    spec = cfg.spec()
    prof = mom.decay_profile(spec, p["lambda"], p["s"], p["x0"], p["distances"], cfg.samples, cfg.workers,
                             p["fit_window"], strict=False)
    rows = [_moment_row("decay_profile", p["lambda"], prof.x0, prof.x0 + d, d, e) for d, e in prof.points]
    f = prof.fit
    summ = {"fit_window": prof.fit_window, "status": "ok" if f else "degenerate",
            "slope": f.slope if f else None, "slope_se": f.slope_se if f else None,
            "intercept": f.intercept if f else None, "r_squared": f.r_squared if f else None,
            "xi": prof.xi, "fit_points": f.points if f else 0}
    rej = prof.points[0][1].rejected if prof.points else 0
    return [Table("moments", MOMENT_COLUMNS, rows), summary_table("fit", summ)], {"rejected": rej}


def _scan_specs(cfg, p):
    base = dict(cfg.ensemble)
    out = []
    for W in p["widths"]:
        d = {k: v for k, v in base.items() if k not in ("n", "N")}
        d.update(W=W, n=p["blocks"], seed=cfg.seed)
        out.append(ens.BandMatrixSpec.from_dict(d))
    return out


def _est_scan(cfg, p):
    scan = mom.localization_length_scan(_scan_specs(cfg, p), p["lambda"], p["s"], cfg.samples, cfg.workers, p["x0"])
    rows = []
    for r in scan.rows:
        f = r.profile.fit if r.profile is not None else None
        rows.append((r.W, r.N, r.xi, r.status, f.slope if f else None, f.slope_se if f else None,
                     f.r_squared if f else None))
    return [Table("scan", ("W", "N", "xi", "status", "slope", "slope_se", "r_squared"), rows),
            summary_table("summary", {"loglog_slope": scan.loglog_slope})], {}


def _est_dos(cfg, p):
    h = spc.dos_histogram(cfg.spec(), cfg.samples, p["bins"], cfg.workers, p["lim"])
    rows = [(a, b, d, se, r) for a, b, d, se, r in zip(h.edges[:-1], h.edges[1:], h.density, h.stderr, h.reference)]
    return [Table("histogram", ("bin_left", "bin_right", "density", "stderr", "reference"), rows),
            summary_table("summary", {"sigma": h.sigma, "sup_deviation": h.sup_deviation,
                                      "l1_deviation": h.l1_deviation, "samples": h.samples})], {}


def _est_spacing(cfg, p):
    spec = cfg.spec()
    ev = spc.sample_spectra(spec, cfg.samples, cfg.workers)
    sigma = float(np.sqrt(ens.bulk_row_variance(spec)))
    r = spc.spacing_distribution(ev, p["lambda0"], p["window"], p["unfolding"], sigma)
    rows = [(a, b, d, None) for a, b, d in zip(r.edges[:-1], r.edges[1:], r.density)]
    return [Table("histogram", ("bin_left", "bin_right", "density", "stderr"), rows),
            summary_table("summary", {"spacings": r.spacings.size, "mean_spacing": r.mean_spacing,
                                      "ks_poisson": r.ks_poisson, "ks_surmise": r.ks_surmise,
                                      "window_low": r.window[0], "window_high": r.window[1]})], {}


def minami_lengths(spec: ens.BandMatrixSpec, decade: float, points: int) -> np.ndarray:
    """One decade of interval lengths starting at ``decade`` times the semicircle mean spacing at 0."""
    spacing = np.pi * np.sqrt(ens.bulk_row_variance(spec)) / spec.N
    return np.geomspace(decade * spacing, 10 * decade * spacing, points)


def _est_minami(cfg, p):
    spec = cfg.spec()
    L = np.asarray(p["lengths"], dtype=float) if p["lengths"] is not None else minami_lengths(spec, p["decade"], p["points"])
    r = spc.minami_pair_rate(spec, L, p["lambda0"], cfg.samples, cfg.workers)
    rows = [(l, rt, se, sr, pe) for l, rt, se, sr, pe in zip(r.lengths, r.rate, r.stderr, r.single_rate, r.pair_events)]
    return [Table("pairs", ("length", "rate", "stderr", "single_rate", "pair_events"), rows),
            summary_table("summary", {"slope": r.slope, "slope_se": r.slope_se,
                                      "fit_low": r.fit_range[0] if r.fit_range else None,
                                      "fit_high": r.fit_range[1] if r.fit_range else None})], {}


def _est_eigvec(cfg, p):
    spec = cfg.spec()
    c = spc.eigenvector_correlator(spec, p["r"], None, cfg.samples, cfg.workers, p["fit_window"], p["x0"])
    rows = [(i, j, abs(i - j), v, se) for (i, j), v, se in zip(c.pairs, c.values, c.stderr)]
    f = c.fit
    return [Table("correlator", ("i", "j", "dist", "value", "stderr"), rows),
            summary_table("fit", {"slope": f.slope if f else None, "slope_se": f.slope_se if f else None,
                                  "r_squared": f.r_squared if f else None, "empty_draws": c.empty_draws})], \
        {"empty_draws": c.empty_draws}


def _est_wegner(cfg, p):
    spec = cfg.spec()
    W, sym = spec.W, spec.symmetry
    A = np.zeros((W, W), dtype=sym.dtype)
    C = None
    if p["shift"] == "random":
        # a fixed Hermitian shift drawn once from the unit Gaussian block law
        A = ens.GaussianWigner().draw(substream(cfg.seed, 0, tag=TAG_SCALAR), W, sym, 1)[0]
    if p["two_block"]:
        C = spec.offdiag_law.draw(substream(cfg.seed, 1, tag=TAG_SCALAR), W, sym, 1)[0]
    c = spc.wegner_block_tail(spec.diag_law, W, A, p["t_grid"], cfg.samples, cfg.seed, cfg.workers, sym,
                              coupling_C=C)
    rows = [(t, pr, se, ref, tb) for t, pr, se, ref, tb in zip(c.t, c.prob, c.stderr, c.reference, c.trace_bound)]
    return [Table("tail", ("t", "prob", "stderr", "reference", "trace_bound"), rows),
            summary_table("summary", {"kappa": c.kappa, "samples": c.samples})], {}


def holder_samples(law: str, mean: float, samples: int, seed: int) -> np.ndarray:
    rng = substream(seed, 0, tag=TAG_SCALAR)
    if law == "gaussian":
        return mean + rng.standard_normal(samples)
    if law == "uniform":
        return mean + rng.random(samples)
    return mean + (rng.random(samples) < 0.5).astype(float)


def _est_holder(cfg, p):
    X = holder_samples(p["law"], p["mean"], cfg.samples, cfg.seed)
    h = mom.holder_gap(X, p["r"], p["s"])
    rows = [(q, v) for q, v in zip(h.q_grid, h.var_profile)]
    return [Table("var_profile", ("q", "variance"), rows),
            summary_table("summary", {"r": h.r, "s": h.s, "h_direct": h.h_direct, "h_integral": h.h_integral,
                                      "stderr": h.stderr})], {}


def _est_domination(cfg, p):
    d = mom.conditional_domination_check(p["n"], p["delta"], p["p0"], p["model"], cfg.samples, cfg.seed, cfg.workers)
    return [summary_table("summary", {"model": d.model, "n": d.n, "delta": d.delta, "p0": d.p0,
                                      "empirical": d.empirical, "stderr": d.stderr, "bound": d.bound,
                                      "exact": d.exact, "holds": d.holds, "samples": d.samples})], {}


def _est_acceptance(cfg, p):
    from .acceptance import run_suite

    results = run_suite(seed=cfg.seed, workers=cfg.workers, determinism=p["determinism"])
    tables = []
    for r in results:
        tables.extend(r.tables)
    rows = [(r.number, r.name, r.passed, r.detail) for r in results]
    tables.append(Table("summary", ("criterion", "name", "passed", "detail"), rows))
    failures = {"failed_criteria": [r.number for r in results if not r.passed]}
    return tables, failures


ESTIMATOR_FUNCS: dict[str, Callable] = {
    "sample": _est_sample,
    "resolvent": _est_resolvent,
    "moments": _est_moments,
    "decay": _est_decay,
    "scan": _est_scan,
    "dos": _est_dos,
    "spacing": _est_spacing,
    "minami": _est_minami,
    "eigvec": _est_eigvec,
    "wegner": _est_wegner,
    "holder": _est_holder,
    "domination": _est_domination,
    "acceptance": _est_acceptance,
}


def run(config: ExperimentConfig) -> RunManifest:
    """Run ``config`` and write ``{name}.{statistic}.csv`` files plus ``{name}.manifest.json``."""
    t0 = time.perf_counter()
    params = config.resolved_params()
    os.makedirs(config.output_dir, exist_ok=True)
    manifest_path = os.path.join(config.output_dir, f"{config.name}.manifest.json")
    if os.path.exists(manifest_path):
        os.unlink(manifest_path)
    written: list[str] = []
    try:
        tables, failures = ESTIMATOR_FUNCS[config.estimator](config, params)
        for tab in tables:
            fname = f"{config.name}.{tab.statistic}.csv"
            if fname in written:
                raise RuntimeError(f"duplicate output {fname}")
            write_csv(os.path.join(config.output_dir, fname), tab)
            written.append(fname)
    except BaseException:
        for fname in written:
            path = os.path.join(config.output_dir, fname)
            if os.path.exists(path):
                os.unlink(path)
        raise
    ranges = [[list(r) for r in rs] for rs in partition(config.samples, config.workers)]
    manifest = RunManifest(
        name=config.name,
        estimator=config.estimator,
        config_hash=config_hash(config),
        code_version=_code_version(),
        wall_time=time.perf_counter() - t0,
        workers=config.workers,
        worker_ranges=ranges,
        failures=failures,
        outputs=written,
    )
    _atomic_write(manifest_path, manifest.to_json())
    return manifest

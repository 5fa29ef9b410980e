"""Acceptance criteria 1-11 at their stated tolerances, plus determinism (12).

The suite runs once through the experiment runner with one worker and once
with eight; criterion 12 compares every CSV output byte for byte.
"""

import csv
import os

import pytest

from bandloc.harness import load_config, run

from conftest import ACCEPTANCE_LINES

SEED = 0
NAMES = {
    1: "resolvent chain matches dense oracle",
    2: "scalar resolvent tail is 1/t",
    3: "Cauchy fractional moment",
    4: "Holder gap identity",
    5: "exponential decay and growing localization length",
    6: "density of states follows the semicircle",
    7: "spacing statistics cross over from Poisson to GUE",
    8: "Minami pair rate is quadratic",
    9: "conditional domination bound",
    10: "block operator norm near 2",
    11: "spectra are simple",
    12: "determinism across worker counts",
}


def _run(out_dir, workers):
    cfg = load_config({"name": "acceptance", "estimator": "acceptance", "seed": SEED, "workers": workers,
                       "output_dir": str(out_dir), "params": {"determinism": False}})
    manifest = run(cfg)
    with open(os.path.join(out_dir, "acceptance.summary.csv"), newline="", encoding="utf-8") as fh:
        rows = {int(r["criterion"]): r for r in csv.DictReader(fh)}
    return manifest, rows


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    d1 = tmp_path_factory.mktemp("workers1")
    d8 = tmp_path_factory.mktemp("workers8")
    m1, rows = _run(d1, 1)
    m8, _ = _run(d8, 8)
    differing = []
    for fname in sorted(set(m1.outputs) | set(m8.outputs)):
        a, b = os.path.join(d1, fname), os.path.join(d8, fname)
        if not (os.path.exists(a) and os.path.exists(b)):
            differing.append(fname)
            continue
        with open(a, "rb") as fa, open(b, "rb") as fb:
            if fa.read() != fb.read():
                differing.append(fname)
    results = {}
    for k in range(1, 12):
        r = rows[k]
        results[k] = (r["passed"] == "true", r["detail"])
    detail = "workers 1 vs 8: identical CSV bytes" if not differing else f"differing outputs: {differing}"
    results[12] = (not differing, detail)
    for k in range(1, 13):
        ok, det = results[k]
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d} {NAMES[k]}: {det}")
    return results


@pytest.mark.parametrize("number", range(1, 13), ids=[f"c{k:02d}-{NAMES[k].replace(' ', '-')}" for k in range(1, 13)])
def test_criterion(suite, number):
    ok, detail = suite[number]
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {NAMES[number]}: {detail}")
    assert ok, detail

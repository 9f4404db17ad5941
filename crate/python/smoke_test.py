"""Smoke test for the pyquasispec extension.

Build and install first:
    pip install maturin && maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/pyquasispec-*.whl
"""

import json
import math
import pathlib
import sys

import pyquasispec as qs

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load(name, **edits):
    data = json.loads((ROOT / "configs" / name).read_text())
    for path, value in edits.items():
        node = data
        keys = path.split(".")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return qs.Config.from_json(json.dumps(data))


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    return cond


def main():
    results = []
    sample = load("sample.json")
    free = load("free.json")
    v = sample.potential

    results.append(check(abs(v.alpha - math.sqrt(2)) < 1e-15, "alpha is sqrt 2"))
    results.append(check(abs(v(0.3, -1.2).imag) < 1e-15, "real potential evaluates to a real value"))

    idx, h = v.matrix((2.1, 0.4), 1, 1)
    n = len(idx)
    hermitian = all(h[i][j] == h[j][i].conjugate() for i in range(n) for j in range(n))
    results.append(check(n == 81 and hermitian, "level-1 matrix is 81x81 and Hermitian"))

    d, arg = v.min_shift(2, 2)
    results.append(check(d > 0 and arg != (0, 0, 0, 0), f"min shift {d:.6f} at {arg}"))

    rows = qs.converge(free, (-2.31, 0.97), 3)
    kk = 2.31**2 + 0.97**2
    results.append(check(all(r[1] == kk**2 and r[2] == 0.0 for r in rows), "free chain is exact"))

    rows = qs.converge(sample, (3.1, -1.7), 2)
    results.append(check(len(rows) == 2 and rows[1][2] < rows[0][2], "perturbed chain converges"))

    try:
        qs.converge(free, (0.5, 0.3), 1)
        results.append(check(False, "degenerate momentum raises ResonantError"))
    except qs.ResonantError:
        results.append(check(True, "degenerate momentum raises ResonantError"))

    p = qs.pair(sample, (3.1, -1.7), 1)
    norm = sum(abs(c) ** 2 for _, c in p.coefficients())
    results.append(check(abs(norm - 1) < 1e-12 and abs(p(0.0, 0.0)) > 0, f"{p!r} is normalised"))

    sets = qs.cheese(load("free.json", **{"thresholds.delta1": 0.0}), 81.0, 1)
    results.append(check(sets == [[(0.0, 2 * math.pi)]], "free cheese with delta1 = 0 is the full circle"))

    curve = qs.isocurve(free, 81.0, 1)
    results.append(check(all(abs(s[1] - 3.0) < 1e-12 and s[2] == 0.0 for s in curve), "free isocurve is the circle"))

    bad = json.loads((ROOT / "configs" / "sample.json").read_text())
    bad["thresholds"]["rho"] = -1
    keys = [k for k, _ in qs.Config.check(json.dumps(bad))]
    results.append(check(keys == ["thresholds.rho"], "violations name their key"))
    try:
        qs.Config.from_json(json.dumps(bad))
        results.append(check(False, "invalid config raises ValueError"))
    except ValueError:
        results.append(check(True, "invalid config raises ValueError"))

    frac = qs.fraction(load("sample.json", **{"grids.fraction_samples": 1000}), 3.0, 1)
    results.append(check(0.0 <= frac[1] <= frac[0] <= frac[2] <= 1.0, f"non-resonant fraction {frac[0]:.3f}"))

    print(f"{sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())

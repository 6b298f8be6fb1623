#!/usr/bin/env python3
"""Smoke test for the mixshift_py extension module.

Builds nothing itself: run `cargo build -p mixshift-py` (or --release)
first, then `python3 python/smoke_test.py`. The script copies the built
cdylib into a temp directory under the importable module name.
"""

import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def import_module():
    candidates = [
        ROOT / "target" / "release" / "libmixshift_py.so",
        ROOT / "target" / "debug" / "libmixshift_py.so",
        ROOT / "target" / "release" / "libmixshift_py.dylib",
        ROOT / "target" / "debug" / "libmixshift_py.dylib",
    ]
    built = next((c for c in candidates if c.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p mixshift-py")
    tmp = pathlib.Path(tempfile.mkdtemp(prefix="mixshift_py_"))
    suffix = ".so" if built.suffix == ".so" else ".so"
    shutil.copy2(built, tmp / f"mixshift_py{suffix}")
    sys.path.insert(0, str(tmp))
    import mixshift_py

    return mixshift_py


def check(name, ok, detail=""):
    status = "ok" if ok else "FAIL"
    print(f"  [{status}] {name}" + (f" ({detail})" if detail else ""))
    if not ok:
        sys.exit(1)


def main():
    mx = import_module()
    print("mixshift_py smoke test")

    catalog = mx.dgp_catalog()
    check("catalog has six DGPs", len(catalog) == 6, ", ".join(n for n, _ in catalog))

    ds = mx.Dataset.simulate("single_time_linear", 800, seed=7)
    check("simulated dataset shape", ds.n == 800 and ds.times == 1)
    check("exposure names", ds.exposure_names == ["a1", "a2"])

    sp = ds.spearman(0)
    check("spearman diagonal", sp[0][0] == 1.0 and abs(sp[0][1]) < 1.0)

    hull = ds.hull(0)
    row = ds.exposures(0)[0]
    check("observed row is in the hull", hull.membership_raw(row))
    point, dist = hull.project([5.0] * hull.dim)
    check("far point projects outside", dist > 0.5, f"distance {dist:.3f}")

    reduce_policy = mx.Policy.from_toml(
        """
        name = "reduce_a1"
        [[shifts]]
        [shifts.components.a1]
        kind = "multiplicative"
        value = 0.8
        """
    )
    report = mx.extrapolation_report(ds, reduce_policy, 0)
    check(
        "extrapolation ratios in [0,1]",
        all(0.0 <= r <= 1.0 for r in report["r_ratio"]),
        f"fraction outside {report['fraction_outside']:.3f}",
    )
    identity_report = mx.extrapolation_report(ds, mx.Policy.identity(), 0)
    check("identity shift never extrapolates", identity_report["fraction_outside"] == 0.0)

    roster = ["mean", "linear"]
    est = mx.tmle(ds, reduce_policy, seed=5, folds=5, roster=roster)
    con = mx.contrast(est, ds, seed=5, folds=5, roster=roster)
    stat, se, lo, hi, p = con.wald()
    # E[a1] = 0 in this DGP, so the multiplicative contrast is centered at 0.
    check("contrast near its analytic value", abs(stat) < 4 * se, f"{stat:.4f} +- {se:.4f}")

    ident_est = mx.tmle(ds, mx.Policy.identity(), seed=5, folds=5, roster=roster)
    obs = mx.mean_observed(ds, seed=5, folds=5, roster=roster)
    diff = ident_est - obs
    check("identity policy collapses to the mean", abs(diff.value) < 1e-6, f"{diff.value:.2e}")

    s_est = mx.sdr(ds, reduce_policy, seed=5, folds=5, roster=roster)
    check(
        "tmle and sdr agree within joint noise",
        abs(s_est.value - est.value) < 4 * max(est.se, s_est.se),
    )

    stat, se, lo, hi, p, reject = mx.interaction(ident_est, ident_est, ident_est, obs)
    check("identity interaction is not rejected", not reject, f"p={p:.3f}")

    flags = mx.low_density_flags(ds, 0, "a1", "a2", quantile=0.05)
    frac = sum(flags) / len(flags)
    check("about 5% of points flagged low-density", 0.02 <= frac <= 0.08, f"{frac:.3f}")

    truth, mc_se = mx.counterfactual_mean("single_time_linear", mx.Policy.identity(), draws=200_000, seed=1)
    check("identity truth is finite", math.isfinite(truth), f"{truth:.4f} ({mc_se:.4f})")

    shifted, applied = mx.shift_exposures(ds, reduce_policy, 0)
    check("shift applied to every row", all(applied) and len(shifted) == ds.n)
    check(
        "shift arithmetic",
        abs(shifted[0][0] - 0.8 * row[0]) < 1e-12 and shifted[0][1] == row[1],
    )

    print("all smoke checks passed")


if __name__ == "__main__":
    main()

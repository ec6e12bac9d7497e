"""Time the hot kernels with numba on and off.

Each mode runs in its own interpreter because BLCIRK_NUMBA is read at
import.  The child prints JSON (best-of timings plus a checksum so the two
paths can be compared); the parent prints a table.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _child(repeat, quick):
    import numpy as np

    from blcirk import NUMBA_ENABLED, gravity, prolate, xprec
    from blcirk.xprec import DD

    rng = np.random.default_rng(1)
    n = 40 if quick else 80
    A = DD(rng.standard_normal((n, n)), rng.standard_normal((n, n)) * 1e-17)
    B = DD(rng.standard_normal((n, n)), np.zeros((n, n)))
    b = DD(rng.standard_normal(n))
    coeffs = rng.standard_normal((16, 200)) / (1 + np.arange(200)) ** 2
    x = np.linspace(-1, 1, 2000)
    model = gravity.synthetic_model(8)
    pts = rng.standard_normal((200, 3))
    pts *= 7000.0 / np.linalg.norm(pts, axis=1)[:, None]
    h, u, v = xprec.hessenberg(A, b, b)
    nb = 64 if quick else 256
    alpha = np.zeros((nb, 4)); alpha[:, 0] = 1.0
    beta = np.zeros((nb, 4)); beta[:, 2] = np.linspace(-0.3, 0.3, nb)
    rhs = np.zeros((nb, n, 4)); rhs[:, :, 0] = u.hi; rhs[:, :, 1] = u.lo

    cases = {
        "dd_matmul": lambda: xprec.matmul(A, B).hi.sum(),
        "dd_solve": lambda: xprec.solve(A, b).hi.sum(),
        "dd_hessenberg": lambda: xprec.hessenberg(A, b, b)[0].hi.sum(),
        "dd_hess_solve_batch": lambda: xprec.hess_solve_batch(h, alpha, beta, rhs)[..., 0].sum(),
        "legendre_clenshaw": lambda: prolate.legendre_clenshaw(coeffs, x).sum(),
        "gravity_accel_deg8": lambda: sum(gravity.acceleration(model, p, 8).sum() for p in pts),
    }
    out = {"numba": NUMBA_ENABLED, "results": {}}
    for name, fn in cases.items():
        t0 = time.perf_counter()
        check = float(fn())                # includes compilation / cache load
        first = time.perf_counter() - t0
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out["results"][name] = {"first": first, "best": best, "check": check}
    print(json.dumps(out))


def _run(flag, repeat, quick):
    env = dict(os.environ, BLCIRK_NUMBA=flag)
    cmd = [sys.executable, __file__, "--child", "--repeat", str(repeat)]
    if quick:
        cmd.append("--quick")
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        _child(args.repeat, args.quick)
        return 0
    jit = _run("1", args.repeat, args.quick)
    ref = _run("0", args.repeat, args.quick)
    print(f"{'kernel':24s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}  agree")
    ok = True
    for name, r in jit["results"].items():
        p = ref["results"][name]
        same = abs(r["check"] - p["check"]) <= 1e-12 * max(1.0, abs(p["check"]))
        ok &= same
        print(f"{name:24s} {1e3 * r['best']:11.3f} {1e3 * p['best']:11.3f} "
              f"{p['best'] / r['best']:8.1f}  {'yes' if same else 'NO'}")
    if not jit["numba"]:
        print("note: numba was not importable; both columns use the fallback")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

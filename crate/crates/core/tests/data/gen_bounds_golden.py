"""Extended-precision reference values for the bound calculators.

Regenerate with `python3 gen_bounds_golden.py > bounds_golden.json`.
"""
import itertools
import json

from mpmath import mp, mpf, sqrt, log

mp.dps = 50


def g(k, d, H, delta, lam, beta):
    k, d, H = mpf(k), mpf(d), mpf(H)
    return H * beta * sqrt(2 * d * k * log(1 + k / lam)) + 2 * H**2 * sqrt(k * log(2 * H * k / delta))


def branches(d, H, delta, dmin, lp, c1, c2, p, q):
    d, H = mpf(d), mpf(H)
    growth = 48 * c1**2 * H**4 * d**p / lp**2 * log(32 * c1**2 * H**5 * d ** (p + 1) / (lp**2 * delta))
    gap = 432 * c2**2 * H**4 * d**q / (dmin**2 * lp**3) * log(
        288 * d ** (q + 1) * H**5 * c2**2 / (dmin**2 * lp**3 * delta))
    return growth, gap


def const_regret(d, H, delta, dmin, kb):
    d, H = mpf(d), mpf(H)
    lsvi = d**3 * H**5 / dmin * log(d * H**2 * kb / delta)
    tau = H * kb
    ele = H ** mpf(1.5) * d * sqrt(tau * log(tau / delta))
    return lsvi, ele


rows = []
grid = itertools.product([1, 2, 5], [2, 4], [mpf("0.05"), mpf("0.001")], [mpf(3) / 32, mpf("0.4")])
lp_f = (13 - 3 * sqrt(17)) / 32
for i, (d, H, delta, dmin) in enumerate(grid):
    if len(rows) == 20:
        break
    lp = lp_f if i % 2 == 0 else mpf("0.25")
    c1, c2 = (mpf(8), mpf(1)) if i % 3 else (mpf(10), mpf("0.5"))
    beta = mpf("0.2") * d * H * sqrt(log(d * 30000))
    k = [1, 30000, 10**6][i % 3]
    gl, ql = branches(d, H, delta, dmin, lp, c1, c2, 3, 2)
    ge, qe = branches(d, H, delta, dmin, lp, c1, c2, 2, 1)
    kl = max(gl, ql)
    cr = const_regret(d, H, delta, dmin, kl)
    rows.append({
        "d": d, "horizon": H, "delta": float(delta), "delta_min": float(dmin),
        "lambda_plus": float(lp), "c1": float(c1), "c2": float(c2),
        "k": k, "beta_k": float(beta),
        "g": mp.nstr(g(k, d, H, delta, 1, beta), 30),
        "kappa_lsvi": mp.nstr(kl, 30), "kappa_lsvi_binding": "gap" if ql > gl else "growth",
        "kappa_eleanor": mp.nstr(max(ge, qe), 30),
        "const_lsvi": mp.nstr(cr[0], 30), "const_eleanor": mp.nstr(cr[1], 30),
    })
print(json.dumps(rows, indent=1))

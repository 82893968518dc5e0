"""Self-check suites behind ``modesim validate``.

Each check recomputes a quantity along an independent route (adaptive
quadrature, Monte Carlo, analytic law) and compares at a fixed tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .channel import ScenarioConfig, correlation_from_doppler
from .closed_form import avg_snr_bf_qd, r_zf_lower_bound, r_zf_qd_approx_sum
from .codebook import (
    cell_approx_interference_sample,
    expected_sq_distortion,
    generate_rvq,
    quantization_delta,
    quantize,
)
from .mode_switch import find_switching_points
from .numerics import (
    RngStream,
    expint_en,
    integral_i1,
    integral_i2,
    integral_i3,
    quad_integrate,
    sample_gamma,
    scaled_expint,
)

TABLE2_CALC_DB = {0.03: 41.6, 0.04: 32.9, 0.05: 26.1}


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _check(name: str, measured: float, limit: float, detail: str) -> Check:
    return Check(name=name, passed=bool(measured <= limit), detail=detail)


# ---------------------------------------------------------------------------

def _suite_numerics(trials, seed, n_threads) -> list:
    checks = []

    worst = 0.0
    for n in range(1, 9):
        for x in (0.1, 1.0, 10.0):
            en = expint_en(n, x)
            resid = abs(n * expint_en(n + 1, x) - (math.exp(-x) - x * en))
            worst = max(worst, resid / (1e-10 * en))
    checks.append(_check("numerics.en_recurrence", worst, 1.0,
                         f"max residual {worst:.3g} of the 1e-10*En budget"))

    def rel(a, b):
        return abs(a - b) / abs(b)

    worst = 0.0
    for a in (0.1, 1.0, 10.0):
        for b in (0.3, 2.0, 5.0):
            for m in (1, 2, 3):
                q1 = quad_integrate(lambda x: x ** m * math.exp(-a * x) / (x + b), 0, np.inf)
                q2 = quad_integrate(lambda x: math.exp(-a * x) / (x + b) ** m, 0, np.inf)
                q3 = quad_integrate(
                    lambda x: math.exp(-a * x) / ((x + b) ** m * (x + 1)), 0, np.inf)
                worst = max(worst, rel(integral_i1(a, b, m), q1),
                            rel(integral_i2(a, b, m), q2), rel(integral_i3(a, b, m), q3))
    checks.append(_check("numerics.integrals_vs_quadrature", worst, 1e-6,
                         f"max rel err {worst:.3g} (tol 1e-06)"))

    got = scaled_expint(1, 1e4)
    err = abs(got - 1.0 / (1e4 + 1.0)) / got
    checks.append(_check("numerics.scaled_e1_asymptote", err, 1e-6,
                         f"e^x E1(x) at x=1e4: rel dev {err:.3g} from 1/(x+1) (tol 1e-06)"))
    return checks


def _suite_distributions(trials, seed, n_threads) -> list:
    checks = []
    n_tx, bits = 4, 10
    delta = quantization_delta(n_tx, bits)
    gen = RngStream(seed, 0).generator()

    samples = cell_approx_interference_sample(n_tx, bits, gen, count=trials)
    ks = stats.kstest(samples, lambda z: 1.0 - np.exp(-z / delta)).statistic
    checks.append(_check("distributions.lemma1_ks", ks, 0.015,
                         f"KS {ks:.4f} vs Exp(delta) at (Nt,B)=({n_tx},{bits}) (tol 0.015)"))

    direct = gen.exponential(delta, size=trials)
    ks2 = stats.ks_2samp(samples, direct).statistic
    checks.append(_check("distributions.product_vs_exponential", ks2, 0.015,
                         f"two-sample KS {ks2:.4f} (tol 0.015)"))

    for nt, b in ((2, 4), (4, 8)):
        emp = _rvq_distortion_mc(nt, b, min(trials, 100_000), RngStream(seed, 1))
        exact, _ = expected_sq_distortion(nt, b)
        dev = abs(emp.mean - exact) / emp.std_error if emp.std_error else 0.0
        checks.append(_check(f"distributions.rvq_distortion_nt{nt}_b{b}", dev, 3.0,
                             f"empirical {emp.mean:.5f} vs exact {exact:.5f} "
                             f"({dev:.2f} standard errors, tol 3)"))
    return checks


@dataclass
class _McMoment:
    mean: float
    std_error: float


def _rvq_distortion_mc(n_tx, bits, trials, stream) -> _McMoment:
    gen = stream.generator()
    out = np.empty(trials)
    chunk = max(1, (1 << 20) // (1 << bits))
    done = 0
    while done < trials:
        c = min(chunk, trials - done)
        h = gen.standard_normal((c, n_tx)) + 1j * gen.standard_normal((c, n_tx))
        h /= np.linalg.norm(h, axis=1, keepdims=True)
        cb = gen.standard_normal((c, 1 << bits, n_tx)) + 1j * gen.standard_normal((c, 1 << bits, n_tx))
        cb /= np.linalg.norm(cb, axis=2, keepdims=True)
        best = np.max(np.abs(np.einsum("cln,cn->cl", cb, h.conj())) ** 2, axis=1)
        out[done:done + c] = 1.0 - np.minimum(best, 1.0)
        done += c
    return _McMoment(mean=float(out.mean()), std_error=float(out.std(ddof=1) / math.sqrt(trials)))


def _suite_bounds(trials, seed, n_threads) -> list:
    checks = []

    ok = True
    for nt in range(2, 9):
        for b in range(21):
            exact, (lower, upper) = expected_sq_distortion(nt, b)
            ok = ok and lower - 1e-12 <= exact <= upper + 1e-12
    checks.append(Check("bounds.distortion_sandwich", ok,
                        "lower <= exact <= upper on (Nt,B) in {2..8}x{0..20}"))

    cfg = ScenarioConfig(n_tx=4, n_users=4, snr_db=10.0, feedback_bits=8, doppler_ts=0.04)
    bound = avg_snr_bf_qd(cfg)
    mc = _bf_qd_snr_mc(cfg, min(trials, 100_000), RngStream(seed, 2))
    gap = (bound - mc) / bound
    checks.append(Check("bounds.bf_mean_snr_upper", bool(0.0 <= gap <= 0.03),
                        f"bound {bound:.3f} vs MC {mc:.3f} (gap {100 * gap:.2f}%, "
                        "must be an upper bound within 3%)"))

    ok = True
    worst = -np.inf
    for snr_db in (0.0, 10.0, 20.0, 30.0):
        c = ScenarioConfig(n_tx=4, n_users=4, snr_db=snr_db, feedback_bits=10, doppler_ts=0.037)
        margin = r_zf_qd_approx_sum(c) - r_zf_lower_bound(c)
        worst = max(worst, -margin)
        ok = ok and margin >= 0.0
    checks.append(Check("bounds.zf_lower_bound_loose", ok,
                        "rate-loss lower bound never exceeds the achievable-rate "
                        "approximation on the B=10, fdTs=0.037 grid"))
    return checks


def _bf_qd_snr_mc(cfg, trials, stream) -> float:
    gen = stream.generator()
    p, nt, bits = cfg.snr_linear, cfg.n_tx, cfg.feedback_bits
    rho, eps = cfg.rho, math.sqrt(cfg.eps_sq)
    total = 0.0
    chunk = max(1, (1 << 20) // (1 << bits))
    done = 0
    while done < trials:
        c = min(chunk, trials - done)
        hp = (gen.standard_normal((c, nt)) + 1j * gen.standard_normal((c, nt))) / math.sqrt(2)
        e = eps * (gen.standard_normal((c, nt)) + 1j * gen.standard_normal((c, nt))) / math.sqrt(2)
        hn = rho * hp + e
        cb = gen.standard_normal((c, 1 << bits, nt)) + 1j * gen.standard_normal((c, 1 << bits, nt))
        cb /= np.linalg.norm(cb, axis=2, keepdims=True)
        hdir = hp / np.linalg.norm(hp, axis=1, keepdims=True)
        idx = np.argmax(np.abs(np.einsum("cln,cn->cl", cb, hdir.conj())), axis=1)
        qdir = np.take_along_axis(cb, idx[:, None, None], axis=1)[:, 0, :]
        total += float(np.sum(p * np.abs(np.sum(hn.conj() * qdir, axis=1)) ** 2))
        done += c
    return total / trials


def _suite_paper(trials, seed, n_threads) -> list:
    checks = []
    for fdts, expected in TABLE2_CALC_DB.items():
        cfg = ScenarioConfig(n_tx=4, n_users=4, snr_db=0.0, doppler_ts=fdts)
        report = find_switching_points(cfg, (5.0, 60.0))
        got = report.crossings_db[-1] if report.crossings_db else math.nan
        err = abs(got - expected)
        checks.append(_check(f"paper.table2_calc_fdts{fdts}", err, 0.3,
                             f"upper crossing {got:.2f} dB vs {expected} dB (tol 0.3 dB)"))
    return checks


_SUITES = {
    "numerics": _suite_numerics,
    "distributions": _suite_distributions,
    "bounds": _suite_bounds,
    "paper": _suite_paper,
}


def run_suite(name: str, trials: int = 100_000, seed: int = 0,
              n_threads: int | None = None) -> list:
    try:
        suite = _SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; expected one of {sorted(_SUITES)}") from None
    return suite(trials, seed, n_threads)

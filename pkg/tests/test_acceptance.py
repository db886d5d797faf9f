"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line in ``RESULTS``; the lines are printed in
the pytest terminal summary and when this file is run as a script.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy import linalg

from conftest import bandlimited_truth
from twinmarket.banlim import (
    BandLimitedExtension,
    BandSpec,
    SampledSignal,
    evaluate,
    gram_matrix,
    interpolate_bandlimited,
    projection_error,
)
from twinmarket.errors import NotWithinEpsilon
from twinmarket.harness import (
    GOLDEN_SPEC,
    IncompleteModelSpec,
    indistinguishability_experiment,
    simulate_incomplete,
)
from twinmarket.market import PriceSeries, build_twin, decompose, default_omega_grid, discount
from twinmarket.replicate import (
    Claim,
    PredictableMagnitudes,
    price,
    replicate,
    sign_paths,
    terminal_prices,
    verify_replication,
)

pytestmark = pytest.mark.acceptance

PI = math.pi
RESULTS = {}

# double precision resolves a Gram solve to about cond * 2.2e-16; 1e8 keeps that near 2e-8
WELL_POSED_COND = 1e8


def record(n, ok, detail):
    RESULTS[n] = f"{'PASS' if ok else 'FAIL'}  criterion {n}: {detail}"
    print(RESULTS[n])
    return ok


def smooth_signal(t):
    t = np.asarray(t, dtype=float)
    return np.cos(0.3 * t) + 0.5 * np.cos(2.0 * t + 0.4) + 0.3 * np.cos(2.8 * t)


def test_criterion_1_twin_closeness():
    eps = 0.01
    passed, slow, bad_failures, worst = 0, [], [], 0.0
    for seed in range(20):
        spec = IncompleteModelSpec(0.005, 0.05, 64, seed, 1.0, 100.0)
        prices = simulate_incomplete(spec)
        t0 = time.perf_counter()
        twin = build_twin(prices, eps, omega_grid=default_omega_grid())
        dt = time.perf_counter() - t0
        worst = max(worst, dt)
        if dt >= 5.0:
            slow.append(seed)
        if twin.within_epsilon:
            assert twin.combined_error < eps
            passed += 1
        elif not (isinstance(twin.failure, NotWithinEpsilon) and twin.failure.best_error < 0.05):
            bad_failures.append(seed)
    ok = passed >= 18 and not slow and not bad_failures
    record(1, ok, f"{passed}/20 seeds within eps=0.01; slowest run {worst:.3f}s; "
                  f"improper failures {bad_failures}")
    assert ok


def test_criterion_2_projection_convergence():
    t = np.arange(-127, 1)
    x = SampledSignal(t, smooth_signal(t))
    omegas = [0.5, 0.7, 0.9, 0.99]
    errs = [projection_error(x, interpolate_bandlimited(x, BandSpec(k * PI), tol=None)) for k in omegas]
    monotone = all(b <= a for a, b in zip(errs, errs[1:]))
    ratio = errs[-1] / errs[0]
    ok = monotone and ratio <= 0.1
    record(2, ok, "L2 errors " + ", ".join(f"{k}pi:{e:.3g}" for k, e in zip(omegas, errs))
           + f"; ratio {ratio:.2g}")
    assert ok


def _cholesky_extension(x, spec):
    G = gram_matrix(spec, x.times)
    c = linalg.cho_solve(linalg.cho_factor(G), x.values)
    return BandLimitedExtension(spec, x.times, c)


def test_criterion_3_uniqueness_and_witness():
    future = np.arange(1, 6)
    cases = [("golden", decompose(discount(simulate_incomplete(GOLDEN_SPEC)))[1])]
    for seed in range(10):
        f = bandlimited_truth(seed)
        for n in (64, 256):
            t = np.arange(-n + 1, 1)
            cases.append((f"truth{seed}/N{n}", SampledSignal(t, f(t))))

    worst, checked, skipped = 0.0, 0, 0
    for _, x in cases:
        for om in default_omega_grid():
            spec = BandSpec(om)
            if np.linalg.cond(gram_matrix(spec, x.times)) > WELL_POSED_COND:
                skipped += 1
                continue
            e1 = interpolate_bandlimited(x, spec)
            # re-solve from the extension's own past, and by an independent factorisation
            e2 = interpolate_bandlimited(SampledSignal(x.times, evaluate(e1, x.times)), spec)
            e3 = _cholesky_extension(x, spec)
            ref = evaluate(e1, future)
            for other in (e2, e3):
                worst = max(worst, float(np.max(np.abs(evaluate(other, future) - ref))))
            checked += 1
    unique_ok = checked > 0 and worst <= 1e-6

    s = SampledSignal.from_mapping({-2: 1.0, -1: 0.0, 0: 0.0})
    spec = BandSpec(0.9 * PI)
    a = interpolate_bandlimited(s, spec, extra_anchor=(-3, 0.0))
    b = interpolate_bandlimited(s, spec, extra_anchor=(-3, 1.0))
    on_set = float(np.max(np.abs(evaluate(a, s.times) - evaluate(b, s.times))))
    off_set = abs(evaluate(a, -3) - evaluate(b, -3))
    witness_ok = on_set <= 1e-8 and off_set >= 0.1

    ok = unique_ok and witness_ok
    record(3, ok, f"max future disagreement {worst:.2g} over {checked} well-posed solves "
                  f"({skipped} with cond > {WELL_POSED_COND:g} excluded); witness on-set {on_set:.2g}, "
                  f"off-set {off_set:.3g}")
    assert ok


def test_criterion_4_replication_exactness():
    t0 = time.perf_counter()
    worst_ratio = 0.0
    for depth in range(1, 13):
        rng = np.random.default_rng(1000 + depth)
        for _ in range(100):
            a = rng.uniform(0.005, 0.95, depth)
            mags = PredictableMagnitudes(0, depth, a)
            s0 = rng.uniform(1.0, 200.0)
            rho = rng.uniform(1.0, 1.05)
            bb = rng.uniform(0.5, 2.0)
            kind = rng.integers(3)
            if kind == 0:
                claim = Claim.call(s0 * rng.uniform(0.8, 1.2))
            elif kind == 1:
                claim = Claim.put(s0 * rng.uniform(0.8, 1.2))
            else:
                claim = Claim.table(rng.normal(scale=rng.uniform(0.1, 100), size=2**depth))
            plan = replicate(claim, mags, s0, bb, rho)
            res = verify_replication(plan, claim, mags, s0, bb, rho)
            psi = claim.values(sign_paths(depth), terminal_prices(mags, s0))
            worst_ratio = max(worst_ratio, res / (1e-9 * (1 + np.max(np.abs(psi)))))
    elapsed = time.perf_counter() - t0
    ok = worst_ratio <= 1.0 and elapsed < 60.0
    record(4, ok, f"1200 claims, worst residual / bound {worst_ratio:.2g}; {elapsed:.2f}s")
    assert ok


def _exhaustive_average(payoff, a, s0, by_index):
    vals = []
    for idx, signs in enumerate(itertools.product((-1, 1), repeat=len(a))):
        s = s0
        for z, ak in zip(signs, a):
            s *= 1 + z * ak
        vals.append(payoff(idx) if by_index else payoff(s))
    return math.fsum(vals) / len(vals)


def test_criterion_5_pricing_oracle():
    worst = 0.0
    worst_fwd = 0.0
    for depth in range(0, 13):
        rng = np.random.default_rng(2000 + depth)
        a = rng.uniform(0.005, 0.95, depth)
        mags = PredictableMagnitudes(0, depth, a)
        s0 = float(rng.uniform(10.0, 200.0))
        table = rng.uniform(0.0, 10.0, 2**depth)
        cases = [
            (Claim.call(s0), lambda s: max(s - s0, 0.0), False),
            (Claim.put(s0 * 1.1), lambda s: max(s0 * 1.1 - s, 0.0), False),
            (Claim.table(table), lambda i: table[i], True),
        ]
        for claim, f, by_index in cases:
            oracle = _exhaustive_average(f, a, s0, by_index)
            got = price(claim, mags, s0)
            if oracle == 0:
                assert got == 0
            else:
                worst = max(worst, abs(got - oracle) / abs(oracle))
        fwd = price(Claim.forward(), mags, s0)
        worst_fwd = max(worst_fwd, abs(fwd - s0) / s0)
    ok = worst <= 1e-12 and worst_fwd <= 1e-12
    record(5, ok, f"depths 0..12, worst relative gap to path average {worst:.2g}; "
                  f"forward {worst_fwd:.2g}")
    assert ok


def _extrapolation_errors(n):
    spec = BandSpec(0.85 * PI)
    t = np.arange(-n + 1, 1)
    errs = []
    for seed in range(10):
        f = bandlimited_truth(seed, omega0=0.8 * PI)
        ext = interpolate_bandlimited(SampledSignal(t, f(t)), spec, tol=None)
        truth = f(1)[0]
        errs.append(abs(evaluate(ext, 1) - truth) / abs(truth))
    return np.array(errs)


def test_criterion_6_predictability():
    e256 = _extrapolation_errors(256)
    e128 = _extrapolation_errors(128)
    accurate = bool(np.all(e256 < 1e-2))
    med128, med256 = float(np.median(e128)), float(np.median(e256))
    improving = med256 <= med128
    ok = accurate and improving
    record(6, ok, f"t=1 relative errors at N=256: max {e256.max():.3g}, "
                  f"{int(np.sum(e256 < 1e-2))}/10 below 1e-2; median 128 -> 256: "
                  f"{med128:.3g} -> {med256:.3g}")
    assert accurate, "extrapolation at t=1 misses 1e-2 relative"
    assert improving, "median extrapolation error grew with the window"


def test_criterion_7_rounding():
    rep = indistinguishability_experiment(GOLDEN_SPEC, 0.004, 0.01)
    gaps_ok = all(g <= 1 for g in rep.per_time_rounded_gap.values())
    ok = gaps_ok and rep.h_a_rejectable is False
    record(7, ok, f"max rounded gap {rep.max_gap_ticks} tick(s), "
                  f"h_a_rejectable={rep.h_a_rejectable}, sup price error {rep.sup_price_error:.3g}")
    assert ok


def _with_zero_returns(idx):
    base = discount(simulate_incomplete(GOLDEN_SPEC))
    xi = base.xi.copy()
    xi[idx] = 0.0
    return PriceSeries(base.reference_price * np.concatenate(([1.0], np.cumprod(1 + xi))))


def test_criterion_8_validity_surfacing():
    ok, lows = True, []
    for idx in ([21, 41], list(range(30, 36))):
        prices = _with_zero_returns(idx)
        r = discount(prices)
        zero_times = [int(t) for t in r.times[r.xi == 0.0]]
        assert len(zero_times) == len(idx)
        twin = build_twin(prices, 0.01)
        flagged = dict(twin.violations)
        xhat = evaluate(twin.extension, twin.times)
        unclamped = np.array_equal(twin.a_eps, twin.weights.weight(twin.times) * xhat)
        all_flagged = all(t in flagged for t in zero_times)
        low = min(flagged.values()) if flagged else math.nan
        lows.append(low)
        ok = ok and all_flagged and unclamped and not twin.valid and low <= 0
    record(8, ok, "zero-return inputs (2 isolated, run of 6): every zero time flagged, "
                  f"lowest reported a_eps {lows[0]:.3g} and {lows[1]:.3g}, values unclamped")
    assert ok


if __name__ == "__main__":
    import sys

    rc = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                rc = 1
    sys.exit(rc)

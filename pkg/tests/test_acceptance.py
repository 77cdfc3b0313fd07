"""Acceptance criteria 1-11, each recorded as one PASS/FAIL line in the summary."""
import datetime
import time

import numpy as np
import pytest

from sgkink import analysis as an
from sgkink import closedform as cf
from sgkink import dynamics as dyn
from sgkink import transforms as tr
from sgkink.grid import make_grid


@pytest.fixture(scope="module")
def g():
    return make_grid(4096, 40.0 * np.pi)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_criterion_01_factorization(g, record_acceptance):
    reps, secs = _timed(lambda: tr.verify_factorization(g, n_fields=50))
    worst = max(r.residual_sup for r in reps)
    ok = worst < 1e-9 and secs < 5.0
    record_acceptance(1, ok, f"max residual {worst:.2e} (< 1e-9), {secs:.2f} s (< 5 s)")
    assert ok


def test_criterion_02_nonresonance(g, record_acceptance):
    reps, secs = _timed(lambda: {r.name: r for r in cf.nonresonance_reports(g)})
    zero = reps["alpha1_hat_at_sqrt3"].residual_sup
    agree = reps["alpha1_hat_closed_vs_fft"].residual_sup
    ok = zero < 1e-9 and agree < 1e-10 and secs < 2.0
    record_acceptance(2, ok, f"|a1^(+-sqrt3)| {zero:.2e}, closed vs FFT {agree:.2e}, {secs:.2f} s")
    assert ok


def test_criterion_03_fourier_suite(g, record_acceptance):
    def run():
        return cf.fourier_closed_form_reports(g) + cf.convolution_identities()

    reps, secs = _timed(run)
    slope = next(r for r in reps if r.name == "pv_exclusion_slope").residual_sup
    quad = [r for r in reps if r.name != "pv_exclusion_slope" and not r.name.startswith("fft_")]
    worst = max(r.residual_sup for r in quad)
    ok = worst < 1e-8 and 1.8 <= slope <= 2.2 and secs < 30.0
    record_acceptance(3, ok, f"max identity residual {worst:.2e}, PV slope {slope:.3f}, {secs:.1f} s")
    assert ok


def test_criterion_04_breather(g, record_acceptance):
    err, secs = _timed(lambda: dyn.breather_error(g, 0.5, 0.005))
    ok = err < 1e-6
    record_acceptance(4, ok, f"breather L2 error {err:.2e} (< 1e-6)")
    assert ok


def test_criterion_04_energy(record_acceptance):
    cfg = dyn.SimConfig(n_points=4096, half_length=40 * np.pi, dt=0.005, t_final=100.0,
                        snapshot_times=[100], diagnostics_every=1.0)
    sink = dyn.Sink()
    _, secs = _timed(lambda: dyn.simulate(cfg, sink))
    e = np.array([r["energy"] for r in sink.rows])
    drift = float(np.max(np.abs(e - e[0])) / e[0])
    ok = drift < 1e-8
    record_acceptance(4, ok, f"energy drift {drift:.1e} over t = 100 (< 1e-8)")
    assert ok


def test_criterion_04_convergence(g, record_acceptance):
    (e1, e2), secs = _timed(lambda: (dyn.breather_error(g, 0.5, 0.01),
                                     dyn.breather_error(g, 0.5, 0.005)))
    ratio = e1 / e2
    ok = 3.6 <= ratio <= 4.4
    record_acceptance(4, ok, f"dt-halving ratio {ratio:.3f} in [3.6, 4.4]")
    assert ok


def test_criterion_05_headline_decay(headline, record_acceptance):
    fit = headline.load("decay_fit.json")
    m = headline.manifest
    wall = (datetime.datetime.fromisoformat(m["end_time"])
            - datetime.datetime.fromisoformat(m["start_time"])).total_seconds()
    e = fit["exponent"]
    ok = -0.55 <= e <= -0.45 and wall < 1800
    record_acceptance(5, ok, f"sup|u| exponent {e:.4f} over t in [50, 250], run {wall:.0f} s")
    assert ok


def test_criterion_06_modified_scattering(headline, record_acceptance):
    ms = headline.load("modified_scattering.json")
    s = ms["stabilization_exponent"]
    ratios = np.array(ms["psi_ratio"])
    ok = s <= -0.15 and bool(np.all((ratios >= 0.8) & (ratios <= 1.2)))
    record_acceptance(6, ok, f"stabilization exponent {s:.3f} (<= -0.15), psi ratios "
                             + ", ".join(f"{r:.3f}" for r in ratios))
    assert ok


def test_criterion_07_profile_ode(headline, record_acceptance):
    import csv

    with open(f"{headline.dir}/ode_residual.csv") as fh:
        rows = [r for r in csv.DictReader(fh) if 50.0 <= float(r["t"]) <= 250.0]
    t = np.array([float(r["t"]) for r in rows])
    scaled = np.array([float(r["residual_scaled"]) for r in rows])
    trend = an.fit_exponent(t, scaled)
    ok = len(rows) >= 3 and trend <= 0.0
    record_acceptance(7, ok, f"residual*t^1.2 log-log trend {trend:.3f} (<= 0) over "
                             f"{len(rows)} times in [{t.min():g}, {t.max():g}]")
    assert ok


def test_criterion_08_linear_propagator(g, record_acceptance):
    f0 = (g.x * np.exp(-(g.x / 2.0) ** 2)).astype(complex)

    def run():
        scaled = [an.linear_asymptotics_check(f0, t, g).residual_sup for t in (8, 16, 32, 64)]
        ts = np.geomspace(10, 100, 12)
        return scaled, an.linear_sup_decay(f0, ts, g), an.linear_local_decay(f0, ts, g).exponent

    (scaled, sup_e, loc_e), secs = _timed(run)
    bounded = max(scaled) <= 2.0 * scaled[0]
    ok = bounded and -0.55 <= sup_e <= -0.45 and -0.6 <= loc_e <= -0.4 and secs < 120
    record_acceptance(8, ok, "sup-diff*t^(2/3) at t=8..64: "
                             + ", ".join(f"{v:.3f}" for v in scaled)
                             + f"; sup exponent {sup_e:.3f}; local exponent {loc_e:.3f}")
    assert ok


def test_criterion_09_improved_local_decay(headline, record_acceptance):
    e = headline.load("decay_fit.json")["localdecay_exponent"]
    ok = -1.1 <= e <= -0.85
    record_acceptance(9, ok, f"||<x>^-1 dx v|| exponent {e:.4f}")
    assert ok


def test_criterion_10_stationary_phase(record_acceptance):
    def run():
        worst = 0.0
        for j in (1, 2, 3, 4):
            for xi in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0):
                d = an.stationary_phase_data(j, xi)
                worst = max(worst, d.point_error, d.hessian_error)
        return worst, an.swap_identity_residual(1000, seed=0)

    (worst, swap), secs = _timed(run)
    ok = worst < 1e-10 and swap < 1e-14 and secs < 10.0
    record_acceptance(10, ok, f"numeric vs closed form {worst:.1e}, swap identity {swap:.1e}, "
                              f"{secs:.2f} s")
    assert ok


def test_criterion_11_decomposition(g, record_acceptance):
    def run():
        rng = np.random.default_rng(0)
        worst = 0.0
        for eps in (0.001, 0.01, 0.05, 0.1):
            for _ in range(3):
                w = eps * tr.random_bandlimited(g, rng, "even")
                worst = max(worst, dyn.nonlinearity_breakdown_w(w, g).residual())
        return worst

    worst, secs = _timed(run)
    ok = worst < 1e-9 and secs < 10.0
    record_acceptance(11, ok, f"max residual {worst:.1e} for eps <= 0.1, {secs:.2f} s")
    assert ok

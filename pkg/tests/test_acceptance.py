"""Acceptance criteria, one test per criterion, each reporting a PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from pstsize.cli import main
from pstsize.conjugate import pst_closed_form
from pstsize.design_tools import (
    SweepSpec,
    build_design,
    evaluate_pst,
    find_min_n,
    frequentist_n_per_group,
    frequentist_power,
    sweep,
    with_param,
)
from pstsize.errors import InfeasibleTargetError
from pstsize.mixture import (
    NormalMixturePrior,
    posterior_prob_positive,
    prior_moments,
    prior_prob_positive_mixture,
    solve_mixture_hyperparams,
)
from pstsize.numerics import RandomStream
from pstsize.presets import SEED, get_preset
from pstsize.unknown_precision import GammaPrior, known_precision_equivalent, pst_simulation

from oracles import mixture_posterior_quadrature

KNOWN = get_preset("table1a")["known_precision"]
EXAMPLE_MIXTURE = {"sd": 8.0, "rho": 0.1, "tau0": 100.0, "delta1": 4.4444, "var1": 69.135, "eta": 0.975}

TABLE1 = {
    2.0: {
        "psi": [0.46, 0.50, 0.53, 0.55, 0.56, 0.57],
        "psi_star": [0.67, 0.73, 0.77, 0.79, 0.81, 0.83],
    },
    30.0: {
        "psi": [0.75, 0.78, 0.81, 0.82, 0.84, 0.85],
        "psi_star": [0.77, 0.80, 0.83, 0.85, 0.86, 0.87],
    },
}
TABLE1_N = [40, 60, 80, 100, 120, 140]

TABLE2_N = [20, 40, 60, 80, 100, 120, 140]
TABLE2_PSI = [0.32, 0.40, 0.44, 0.46, 0.48, 0.49, 0.50]
TABLE2_PSI_STAR = [0.47, 0.59, 0.65, 0.68, 0.71, 0.72, 0.74]


def test_criterion_01_table1(report_criterion):
    start = time.perf_counter()
    misses = []
    for weight, rows in TABLE1.items():
        params = with_param(KNOWN, "prior_weight", weight)
        for i, n in enumerate(TABLE1_N):
            res = pst_closed_form(build_design("known_precision", params, n))
            for kind, value in (("psi", res.psi), ("psi_star", res.psi_star)):
                if round(value, 2) != rows[kind][i]:
                    misses.append(f"w={weight:g} n={n} {kind}={value:.4f} vs {rows[kind][i]:.2f}")
    elapsed = time.perf_counter() - start
    ok = not misses and elapsed < 1.0
    detail = f"24 cells, {24 - len(misses)} match at 2 dp, {elapsed:.3f}s"
    if misses:
        detail += "; mismatches: " + "; ".join(misses)
    report_criterion(1, ok, detail)
    assert ok, detail


def test_criterion_02_limits(report_criterion):
    limit = pst_closed_form(build_design("known_precision", KNOWN, 100)).prior_prob
    far = pst_closed_form(build_design("known_precision", KNOWN, 10 ** 6)).psi
    gap = abs(far - limit)
    ok_limit = abs(limit - 0.6915) <= 5e-4
    ok_far = gap <= 1e-3
    ok = ok_limit and ok_far
    report_criterion(2, ok, f"prior prob {limit:.6f} (|d|={abs(limit - 0.6915):.1e}); psi(1e6)={far:.6f}, gap {gap:.2e} vs 1e-3")
    assert ok_limit
    assert ok_far, f"psi(10^6) is {gap:.3e} below the limit"


@pytest.mark.slow
def test_criterion_03_table2(report_criterion):
    worst_psi = worst_star = 0.0
    for n, psi, star in zip(TABLE2_N, TABLE2_PSI, TABLE2_PSI_STAR):
        res = evaluate_pst(build_design("mixture", EXAMPLE_MIXTURE, n), seed=SEED, reps=10 ** 6)
        worst_psi = max(worst_psi, abs(res.psi - psi))
        worst_star = max(worst_star, abs(res.psi_star - star))
    ok = worst_psi <= 0.01 and worst_star <= 0.02
    report_criterion(3, ok, f"max |psi - table| {worst_psi:.4f} (<= 0.01), max |psi* - table| {worst_star:.4f} (<= 0.02)")
    assert ok


def test_criterion_04_mixture_limit(report_criterion):
    prior = NormalMixturePrior(0.1, 100.0, 4.4444, 1 / 69.135)
    value = prior_prob_positive_mixture(prior)
    ok = abs(value - 0.6830) <= 5e-4
    report_criterion(4, ok, f"limit {value:.6f} vs 0.6830")
    assert ok


def test_criterion_05_solvers(report_criterion):
    prior = solve_mixture_hyperparams(0.1, 100.0, 4.0, 64.0)
    mean, var = prior_moments(prior)
    ok_solve = abs(prior.delta1 - 4.4444) <= 1e-3 and abs(1 / prior.tau1 - 69.135) <= 1e-2
    ok_trip = abs(mean - 4.0) <= 1e-10 and abs(var - 64.0) <= 1e-10
    rng = np.random.default_rng(0)
    for _ in range(200):
        rho, tau0 = rng.uniform(0, 0.9), rng.uniform(1, 1000)
        m, v = rng.uniform(-10, 10), rng.uniform(5, 200)
        try:
            back = prior_moments(solve_mixture_hyperparams(rho, tau0, m, v))
        except ValueError:
            continue
        ok_trip &= abs(back[0] - m) <= 1e-10 and abs(back[1] - v) <= 1e-10 * max(1.0, v)
    ok = ok_solve and ok_trip
    report_criterion(5, ok, f"delta1={prior.delta1:.6f}, 1/tau1={1 / prior.tau1:.6f}; moment round trip ok={ok_trip}")
    assert ok


def test_criterion_06_quadrature(report_criterion):
    worst = 0.0
    for n in (20, 100):
        d = build_design("mixture", EXAMPLE_MIXTURE, n)
        pr, tn = d.prior, d.tau_n_star
        mean = (1 - pr.rho) * pr.delta1
        v0, v1 = 1 / tn + 1 / pr.tau0, 1 / tn + 1 / pr.tau1
        sd = math.sqrt(pr.rho * v0 + (1 - pr.rho) * (v1 + pr.delta1 ** 2) - mean ** 2)
        us = np.linspace(mean - 6 * sd, mean + 6 * sd, 100)
        got = posterior_prob_positive(d, us)
        want = np.array([mixture_posterior_quadrature(pr.rho, pr.tau0, pr.delta1, pr.tau1, tn, u) for u in us])
        worst = max(worst, float(np.max(np.abs(got - want))))
    ok = worst <= 1e-6
    report_criterion(6, ok, f"max |analytic - quadrature| = {worst:.2e} over 2 x 100 points")
    assert ok


@pytest.mark.slow
def test_criterion_07_unknown_precision(report_criterion):
    tau = 1 / 64
    degenerate = GammaPrior(1e6, 1e6 / tau)  # CV = 1e-3
    worst_a = 0.0
    ok_a = True
    for n in (40, 100, 200):
        params = {k: v for k, v in KNOWN.items() if k != "sd"}
        params.update(alpha0=degenerate.alpha0, beta0=degenerate.beta0)
        d = build_design("unknown_precision", params, n)
        res = pst_simulation(d, RandomStream(SEED, n), 10 ** 6)
        closed = pst_closed_form(known_precision_equivalent(d)).psi
        diff = abs(res.psi - closed)
        worst_a = max(worst_a, diff)
        ok_a &= diff <= max(0.005, 3 * res.std_error)

    fig4 = get_preset("fig4")["unknown_precision"]
    worst_b = 0.0
    for n in range(20, 201):
        sim = pst_simulation(build_design("unknown_precision", fig4, n), RandomStream(SEED, n), 200_000)
        cf = pst_closed_form(build_design("known_precision", KNOWN, n))
        worst_b = max(worst_b, abs(sim.psi_star - cf.psi_star))
    ok_b = worst_b <= 0.03
    ok = ok_a and ok_b
    report_criterion(7, ok, f"(a) degenerate gamma max diff {worst_a:.4f}; (b) max |psi* - SD 8 curve| {worst_b:.4f} (<= 0.03)")
    assert ok


def test_criterion_08_frequentist(report_criterion):
    m = frequentist_n_per_group(8.0, 4.0, 0.025, 0.80, 1.0)
    p63, p62 = frequentist_power(8.0, 4.0, 0.025, m), frequentist_power(8.0, 4.0, 0.025, m - 1)
    ok = m == 63 and p63 >= 0.80 > p62 and abs(m - 64) <= 1
    report_criterion(8, ok, f"n per group {m}, power {p63:.4f} at {m}, {p62:.4f} at {m - 1}; reference value 64 within +-1")
    assert ok


def test_criterion_09_monotonicity(report_criterion):
    fig2 = get_preset("fig2")
    etas = sorted(fig2["vary"]["values"])
    pts = sweep(SweepSpec("known_precision", fig2["n_grid"], fig2["known_precision"], "eta", etas))
    psi = {e: np.array([p.psi for p in pts if p.vary_value == e]) for e in etas}
    ok_eta = all(np.all(psi[a] >= psi[b]) for a, b in zip(etas, etas[1:]))

    fig1 = get_preset("fig1")
    pts = sweep(SweepSpec("known_precision", fig1["n_grid"], fig1["known_precision"], "delta", fig1["vary"]["values"]))
    ok_n1 = all(np.all(np.diff([p.psi for p in pts if p.vary_value == v]) >= 0) for v in fig1["vary"]["values"])

    # the mixture curves are simulated, so successive differences may dip by at most 3 combined standard errors
    fig3 = get_preset("fig3")
    pts = sweep(SweepSpec("mixture", fig3["n_grid"], fig3["mixture"], "rho", fig3["vary"]["values"], fig3["reps"], fig3["seed"]))
    worst_z = 0.0
    for v in fig3["vary"]["values"]:
        curve = [p for p in pts if p.vary_value == v]
        for a, b in zip(curve, curve[1:]):
            z = (a.psi - b.psi) / math.hypot(a.std_error, b.std_error)
            worst_z = max(worst_z, z)
    ok_n3 = worst_z <= 3.0

    try:
        find_min_n(build_design("known_precision", KNOWN, 100), 0.70, "psi")
        ok_inf, limit = False, math.nan
    except InfeasibleTargetError as exc:
        limit = exc.limit
        ok_inf = abs(limit - 0.6915) <= 5e-4
    ok = ok_eta and ok_n1 and ok_n3 and ok_inf
    report_criterion(
        9,
        ok,
        f"eta ordering {ok_eta}; fig1 nondecreasing {ok_n1}; fig3 worst drop {worst_z:.2f} SE; "
        f"target 0.70 infeasible with limit {limit:.4f}",
    )
    assert ok


def test_criterion_10_determinism(report_criterion, capsys, tmp_path):
    commands = [
        ["pst", "--preset", "table2", "--n", "60", "--reps", "300000", "--seed", "42"],
        ["sweep", "--preset", "fig3", "--n-grid", "20,100", "--reps", "100000"],
        ["sweep", "--preset", "fig4", "--n-grid", "20,100", "--reps", "100000"],
        ["size", "--preset", "table2", "--target", "0.4", "--target-kind", "psi", "--step", "20", "--reps", "50000"],
    ]
    ok = True
    for cmd in commands:
        outputs = set()
        for workers in (1, 2, 4, 8, 1):
            code = main(cmd + ["--workers", str(workers)])
            outputs.add((code, capsys.readouterr().out))
        ok &= len(outputs) == 1 and next(iter(outputs))[0] == 0
    report_criterion(10, ok, f"{len(commands)} Monte Carlo commands, 5 runs each over workers 1/2/4/8, identical={ok}")
    assert ok

"""Acceptance criteria, one test each.

Every test appends a ``PASS``/``FAIL`` line to ``conftest.ACCEPTANCE_LINES``;
the lines are printed in the terminal summary.
"""

import time

import numpy as np
import pytest

import conftest
from conftest import fixture_path, random_bounded, random_lipschitz, trig_pair
from fibersolve.conditions import (
    Case, Constants, HypothesisViolation, UnboundedFunction,
    case_threshold, estimate_constants, validate,
)
from fibersolve.expr import differentiate, parse_expr
from fibersolve.gridfn import bound_estimate, lipschitz_estimate, sup_dist
from fibersolve.inverse import invert, inverse_derivative
from fibersolve.problemfile import load_problem
from fibersolve.solver import apply_lambda, apply_psi, build_problem, iterate_fiber, zero_seed
from fibersolve.verify import (
    derivative_consistency, observed_contraction_ratio, residual, verify_solution,
)

pytestmark = pytest.mark.acceptance


def record(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _problem_from_fixture(name, **overrides):
    pf = load_problem(fixture_path(name))
    fn = pf.functions
    kw = dict(constants=pf.constants, A=pf.domain.get("A"),
              grid_n=pf.domain.get("grid_n", 4001))
    kw.update(overrides)
    return build_problem(fn["h"], fn["f"], fn["g"], fn.get("hp"), fn.get("fp"),
                         fn.get("gp"), **kw)


@pytest.fixture(scope="module")
def sec4_file():
    return _problem_from_fixture("example_sec4.problem")


@pytest.fixture(scope="module")
def unit_report(sec4_file):
    return validate(sec4_file.constants, "explicit", L=1, rho=1)


def test_criterion_1_sec4_end_to_end():
    start = time.perf_counter()
    p = _problem_from_fixture("example_sec4.problem")
    report = validate(p.constants)
    sol = iterate_fiber(*zero_seed(p), p, tol=1e-10, max_iter=200, report=report)
    res, _ = residual(sol.phi_star, p, p.grid_n)
    seconds = time.perf_counter() - start
    ok = (report.case is Case.LARGE_ALPHA and report.beta_bound == 26
          and p.grid_n == 4001 and sol.iterations <= 100 and res <= 1e-6
          and seconds <= 60)
    record(1, ok, f"case {report.case.value}, bound {report.beta_bound:g}, "
                  f"{sol.iterations} iterations, residual {res:.2e} <= 1e-6, "
                  f"{seconds:.2f} s <= 60 s")


def test_criterion_2_lambda_contraction(sec4_file, unit_report):
    rng = np.random.default_rng(2)
    p, L = sec4_file, unit_report.chosen_L
    q = (L + 1) / p.constants.K
    worst = 0.0
    for _ in range(200):
        p1 = random_lipschitz(rng, p.A, p.grid_n, L, 5.0)
        p2 = random_lipschitz(rng, p.A, p.grid_n, L, 5.0)
        worst = max(worst, sup_dist(apply_lambda(p1, p), apply_lambda(p2, p)) / sup_dist(p1, p2))
    record(2, q == pytest.approx(2 / 3) and worst <= q * (1 + 1e-6),
           f"worst ratio {worst:.4f} <= (L+1)/K = {q:.4f} over 200 pairs")


def test_criterion_3_psi_uniform_contraction(sec4_file, unit_report):
    rng = np.random.default_rng(3)
    p, c = sec4_file, sec4_file.constants
    q = 2 * unit_report.chosen_rho / (c.alpha * c.K)
    worst = 0.0
    for _ in range(200):
        phi = random_lipschitz(rng, p.A, p.grid_n, unit_report.chosen_L, 5.0)
        F1 = random_bounded(rng, p.A, p.grid_n, unit_report.chosen_rho)
        F2 = random_bounded(rng, p.A, p.grid_n, unit_report.chosen_rho)
        d = sup_dist(apply_psi(phi, F1, p), apply_psi(phi, F2, p)) / sup_dist(F1, F2)
        worst = max(worst, d)
    record(3, q == pytest.approx(2 / 15) and worst <= q * (1 + 1e-6),
           f"worst ratio {worst:.4f} <= 2 rho/(alpha K) = {q:.4f} over 200 triples")


@pytest.mark.parametrize("name", ["example_sec4.problem", "trivial.problem"])
def test_criterion_4_self_mapping(name):
    rng = np.random.default_rng(4)
    p = _problem_from_fixture(name)
    r = validate(p.constants)
    L, rho = r.chosen_L, r.chosen_rho
    lip_worst = psi_worst = 0.0
    for _ in range(200):
        phi = random_lipschitz(rng, p.A, p.grid_n, L, 5.0)
        Phi = random_bounded(rng, p.A, p.grid_n, rho)
        lam, psi = apply_lambda(phi, p), apply_psi(phi, Phi, p)
        lip_worst = max(lip_worst, lipschitz_estimate(lam) / L)
        psi_worst = max(psi_worst, bound_estimate(psi) / rho)
    ok = lip_worst <= 1 + 1e-6 and psi_worst <= 1 + 1e-6
    record(4, ok, f"{name}: max Lip(Lam phi)/L = {lip_worst:.4f}, "
                  f"max sup|Psi|/rho = {psi_worst:.4f} over 200 inputs")


def test_criterion_5_chain_rule(sec4_file, unit_report):
    rng = np.random.default_rng(5)
    p = sec4_file
    worst = 0.0
    for _ in range(20):
        phi, dphi = trig_pair(rng, p.A, p.grid_n, unit_report.chosen_L)
        lam, psi = apply_lambda(phi, p), apply_psi(phi, dphi, p)
        step = 10 * phi.spacing
        x = phi.nodes[np.abs(phi.nodes) <= p.A - step]
        fd = (lam(x + step) - lam(x - step)) / (2 * step)
        worst = max(worst, float(np.max(np.abs(fd - psi(x)))))
    record(5, p.grid_n == 4001 and worst <= 1e-3,
           f"sup |Psi(phi, phi') - FD(Lam phi)| = {worst:.2e} <= 1e-3 over 20 trials")


def test_criterion_6_solution_derivative():
    mismatch = {}
    for n in (501, 2001, 4001):
        p = _problem_from_fixture("example_sec4.problem", grid_n=n)
        sol = iterate_fiber(*zero_seed(p), p)
        mismatch[n] = derivative_consistency(sol.phi_star, sol.Phi_star, 10 * sol.phi_star.spacing)
    decreasing = mismatch[2001] < 1.1 * mismatch[501] and mismatch[4001] < 1.1 * mismatch[2001]
    ok = mismatch[4001] <= 1e-3 and decreasing
    record(6, ok, "derivative mismatch "
                  + ", ".join(f"n={n}: {m:.2e}" for n, m in mismatch.items())
                  + " (<= 1e-3, decreasing)")


def test_criterion_7_observed_ratio(sec4_file, unit_report):
    sol = iterate_fiber(*zero_seed(sec4_file), sec4_file, report=unit_report)
    ratio = observed_contraction_ratio(sol.trace, 5)
    record(7, ratio <= 2 / 3 + 0.05, f"observed ratio {ratio:.4f} <= 2/3 + 0.05")


def test_criterion_8_inverse_kernel(sec4_file):
    rng = np.random.default_rng(8)
    worst_rt = worst_d = 0.0
    for m in (sec4_file.f_map, sec4_file.h_map):
        y = rng.uniform(-1e3, 1e3, 10_000)
        x = invert(m, y)
        worst_rt = max(worst_rt, float(np.max(np.abs(m(x) - y))))
        ys = y[:500]
        step = 1e-4
        fd = (invert(m, ys + step) - invert(m, ys - step)) / (2 * step)
        d = inverse_derivative(m, ys)
        worst_d = max(worst_d, float(np.max(np.abs(d - fd) / np.abs(d))))
    record(8, worst_rt <= 1e-10 and worst_d <= 1e-6,
           f"round-trip error {worst_rt:.1e} <= 1e-10 over 2 x 10^4 samples, "
           f"inverse-derivative relative error {worst_d:.1e} <= 1e-6")


def test_criterion_9_condition_boundary():
    rng = np.random.default_rng(9)
    worst = 0.0
    for K in 10 - 9 * rng.random(100):  # K in (1, 10]
        a = case_threshold(K)
        small, large = 0.25 * a**2 * K**2, (K - 1) * (a * K - K + 1)
        worst = max(worst, abs(small - large) / small)
    rejects_k1 = 0
    for alpha, beta in [(0.1, 1e-3), (5, 1), (50, 100)]:
        try:
            validate(Constants(1.0, alpha, beta, 1.0))
        except HypothesisViolation:
            rejects_k1 += 1
    try:
        h, f, g = (parse_expr(s) for s in ("4*x", "5*x", "x"))
        estimate_constants(type("P", (), dict(hp=differentiate(h), fp=differentiate(f), g=g,
                                              gp=differentiate(g))))
        unbounded_rejected = False
    except UnboundedFunction:
        unbounded_rejected = True
    ok = worst <= 1e-12 and rejects_k1 == 3 and unbounded_rejected
    record(9, ok, f"bound mismatch at threshold {worst:.1e} <= 1e-12 over 100 K, "
                  f"K=1 rejected {rejects_k1}/3, unbounded g rejected: {unbounded_rejected}")


def test_criterion_10_seed_independence(sec4_file):
    rng = np.random.default_rng(10)
    r = validate(sec4_file.constants)
    phi0, Phi0 = trig_pair(rng, sec4_file.A, sec4_file.grid_n, 0.25)
    a = iterate_fiber(*zero_seed(sec4_file), sec4_file, report=r)
    b = iterate_fiber(phi0, Phi0, sec4_file, report=r)
    d = sup_dist(a.phi_star, b.phi_star)
    record(10, d <= 1e-8, f"sup distance between solutions from two seeds {d:.1e} <= 1e-8")


def test_fixture_observed_ratio_after_burn_in():
    # the verify-level property on every shipped fixture
    for name in ("example_sec4.problem", "trivial.problem"):
        p = _problem_from_fixture(name)
        v = verify_solution(iterate_fiber(*zero_seed(p), p), p)
        assert v.observed_ratio <= v.theoretical_factor + 0.05

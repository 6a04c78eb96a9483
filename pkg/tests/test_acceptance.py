"""Acceptance gate: one test (and one printed PASS/FAIL line) per criterion.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the collected
lines are also repeated in the terminal summary.
"""
from __future__ import annotations

import filecmp
import math
from dataclasses import replace

import numpy as np

from conftest import record
from proxtd.harness import (
    ExperimentConfig,
    emit_artifacts,
    random_policy_return,
    run_control,
    run_policy_eval,
    summarize_steady_state,
)
from proxtd.learners import LearnerConfig, SaddleIterate, TraceState, gtd_family_step, trace_update
from proxtd.mdp import FiniteMdp, Policy, Sample, bellman_operator, sample_trajectory, stationary_distribution
from proxtd.objectives import (
    forward_lambda_expectation,
    lagrangian,
    lemma2_bounds,
    m_matrix,
    neu,
    neu_half_gradient,
    objective_j,
    transition_table,
    y_star,
)

DOMAINS = ("baird", "chain50", "battery")
MODES = ("identity", "covariance")


def _random_thetas(problem, rng, k):
    d = problem.exact.d
    scale = max(1.0, float(np.linalg.norm(problem.domain.theta0)))
    return [scale * rng.standard_normal(d) for _ in range(k)]


# ---------------------------------------------------------------- 1


def test_c01_residual_identity(problems, rng):
    worst = {}
    for name in DOMAINS:
        p = problems[name]
        d, ex = p.domain, p.exact
        err = 0.0
        for theta in _random_thetas(p, rng, 20):
            v = d.Phi @ theta
            rhs = d.Phi.T @ (d.xi * (bellman_operator(d.mdp, d.target, v) - v))
            err = max(err, float(np.max(np.abs((ex.b - ex.A @ theta) - rhs))))
        worst[name] = err
    ok = all(v <= 1e-10 for v in worst.values())
    record(1, ok, "max |(b - A theta) - Phi'Xi(Tv - v)| = "
           + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + " (tol 1e-10)")
    assert ok


# ---------------------------------------------------------------- 2


def test_c02_objective_equals_dual_value(problems, rng):
    worst = 0.0
    for name in DOMAINS:
        p = problems[name]
        for mode in MODES:
            for theta in _random_thetas(p, rng, 20):
                J = objective_j(theta, p.exact, mode)
                gap = abs(0.5 * J - lagrangian(theta, y_star(theta, p.exact, mode), p.exact, mode))
                worst = max(worst, gap / (1.0 + abs(J)))
    ok = worst <= 1e-10
    record(2, ok, f"max |J/2 - L(theta, y*)| / (1 + |J|) = {worst:.2e} over 3 domains x 2 metrics x 20 (tol 1e-10)")
    assert ok


# ---------------------------------------------------------------- 3


def _averaged_step(p, it, cfg):
    tt = transition_table(p.mdp, p.domain.target, p.domain.behavior, p.domain.xi)
    Phi = p.domain.Phi
    theta_acc = np.zeros_like(it.theta)
    y_acc = np.zeros_like(it.y)
    for w, s, a, s2, rho, r in zip(tt.weight, tt.state, tt.action, tt.next_state, tt.rho, tt.reward):
        nxt = gtd_family_step(it, Sample(Phi[s], Phi[s2], float(r), float(rho)), cfg)
        theta_acc += w * nxt.theta
        y_acc += w * nxt.y
    return theta_acc, y_acc


def test_c03_expected_stochastic_update(problems, rng):
    worst = 0.0
    alpha = 0.01
    for name in DOMAINS:
        p = problems[name]
        ex = p.exact
        for algo in ("gtd", "gtd2"):
            cfg = LearnerConfig(algo, alpha, gamma=p.mdp.gamma)
            M = m_matrix(ex, cfg.M_mode)
            for _ in range(10):
                theta, y = rng.standard_normal(ex.d), rng.standard_normal(ex.d)
                it = SaddleIterate.start(theta, y)
                th_avg, y_avg = _averaged_step(p, it, cfg)
                th_det = theta + alpha * ex.A.T @ y
                y_det = y + alpha * (ex.b - ex.A @ theta - M @ y)
                worst = max(worst, float(np.max(np.abs(th_avg - th_det))), float(np.max(np.abs(y_avg - y_det))))
    ok = worst <= 1e-10
    record(3, ok, f"max |E[stochastic step] - deterministic step| = {worst:.2e} (GTD, GTD2; tol 1e-10)")
    assert ok


# ---------------------------------------------------------------- 4


AUDIT_SUITES = [
    ExperimentConfig(domain="baird", algorithms=("gtd", "gtd2", "gtd_mp", "gtd2_mp"), steps=4000, runs=5,
                     schedule="theoretical", seed=41),
    ExperimentConfig(domain="baird", algorithms=("gtd", "gtd2", "gtd_mp", "gtd2_mp"), steps=4000, runs=5,
                     alpha=0.005, projected=True, seed=42),
    ExperimentConfig(domain="chain50", algorithms=("gtd", "gtd2", "gtd_mp", "gtd2_mp"), steps=4000, runs=5,
                     alpha=0.05, projected=True, seed=43),
    ExperimentConfig(domain="battery", algorithms=("gtd", "gtd2", "gtd_mp", "gtd2_mp"), steps=4000, runs=5,
                     alpha=0.001, projected=True, seed=44),
    ExperimentConfig(domain="battery", algorithms=("gtd", "gtd_mp"), steps=4000, runs=5,
                     schedule="theoretical", seed=45),
]


def test_c04_residual_bounded_by_saddle_gap(problems):
    points = failures = 0
    for cfg in AUDIT_SUITES:
        for r in run_policy_eval(cfg, problems[cfg.domain]):
            points += int(np.sum(~np.isnan(r.columns["audit_lhs"])))
            failures += r.audit_failures
    ok = failures == 0 and points > 0
    record(4, ok, f"{failures} violations of 1/2||A theta_bar - b||^2_xi <= tau xi_max Err "
           f"at {points} logged points of projected i.i.d. runs")
    assert ok


# ---------------------------------------------------------------- 5


def test_c05_norm_bounds(problems):
    parts, ok = [], True
    for name in DOMAINS:
        p = problems[name]
        ex, d = p.exact, p.domain
        bA, bB = lemma2_bounds(d.features.bound, ex.d, ex.gamma, ex.rho_max, d.mdp.r_max)
        nA, nB = float(np.linalg.norm(ex.A, 2)), float(np.linalg.norm(ex.b))
        ok &= nA <= bA and nB <= bB
        parts.append(f"{name} ||A||={nA:.3g}<={bA:.3g}, ||b||={nB:.3g}<={bB:.3g}")
    record(5, ok, "; ".join(parts))
    assert ok


# ---------------------------------------------------------------- 6

RATE_CFG = ExperimentConfig(domain="baird", algorithms=("gtd",), runs=50, schedule="theoretical", seed=6,
                            log_every=1000)


def test_c06_rate(problems):
    errs = {}
    for n in (2000, 8000):
        res = run_policy_eval(replace(RATE_CFG, steps=n), problems["baird"])
        errs[n] = float(np.mean([r.final("err") for r in res]))
    ratio = errs[2000] / errs[8000]
    ok = 1.3 <= ratio <= 3.0
    record(6, ok, f"mean Err(2000) = {errs[2000]:.4g}, Err(8000) = {errs[8000]:.4g}, ratio {ratio:.3f} "
           "(target 2.0, accept [1.3, 3.0]; projected GTD, 50 runs)")
    assert ok


# ---------------------------------------------------------------- 7

BAIRD_CFG = ExperimentConfig(domain="baird", algorithms=("td0", "gtd2", "gtd2_mp"), steps=8000, runs=20,
                             alphas={"td0": 0.005, "gtd2": 0.005, "gtd2_mp": 0.004}, seed=7)


def test_c07_baird_curves(problems):
    res = run_policy_eval(BAIRD_CFG, problems["baird"])
    by = {a: [r for r in res if r.algorithm == a] for a in BAIRD_CFG.algorithms}
    m0 = res[0].columns["mspbe"][0]
    td_blowup = min(float(np.nanmax(r.columns["mspbe"])) for r in by["td0"]) / m0
    final = {a: float(np.mean([r.final("mspbe") for r in by[a]])) for a in ("gtd2", "gtd2_mp")}
    ok = (td_blowup > 10.0 and final["gtd2"] < 0.1 * m0 and final["gtd2_mp"] < 0.1 * m0
          and final["gtd2_mp"] <= final["gtd2"])
    record(7, ok, f"MSPBE(theta_0)={m0:.4g}; TD(0) peak/initial >= {td_blowup:.3g} in every run; "
           f"final mean GTD2 {final['gtd2']:.3g}, GTD2-MP {final['gtd2_mp']:.3g}")
    assert ok


# ---------------------------------------------------------------- 8

BATTERY_CFG = ExperimentConfig(domain="battery", algorithms=("gtd", "gtd2", "gtd_mp", "gtd2_mp"), steps=10000,
                               runs=20, alpha=0.001, seed=8)


def test_c08_battery_ordering(problems):
    summ = summarize_steady_state(run_policy_eval(BATTERY_CFG, problems["battery"]), BATTERY_CFG.window)
    m = {r["algorithm"]: r["mspbe_mean"] for r in summ.rows}
    ok = m["gtd2_mp"] <= m["gtd2"] <= m["gtd"] and m["gtd_mp"] <= m["gtd"]
    record(8, ok, "steady-state MSPBE " + ", ".join(f"{a} {v:.4g}" for a, v in m.items())
           + " (need GTD2-MP <= GTD2 <= GTD, GTD-MP <= GTD)")
    assert ok


# ---------------------------------------------------------------- 9


def five_state_chain():
    """Small off-policy chain used for the forward/backward trace check."""
    P = np.zeros((5, 2, 5))
    for s in range(5):
        P[s, 0, max(s - 1, 0)] += 0.8
        P[s, 0, min(s + 1, 4)] += 0.2
        P[s, 1, min(s + 1, 4)] += 0.8
        P[s, 1, max(s - 1, 0)] += 0.2
    R = np.array([[0.0, 0.5], [1.0, 0.0], [0.0, -1.0], [0.5, 0.0], [1.0, 2.0]])
    mdp = FiniteMdp(P, R, 0.8)
    behavior = Policy(np.full((5, 2), 0.5))
    target = Policy(np.tile([0.7, 0.3], (5, 1)))
    Phi = np.array([[1.0, 0.0, 0.5], [0.5, 1.0, 0.0], [0.0, 1.0, 0.5], [0.0, 0.5, 1.0], [1.0, 0.0, 1.0]])
    return mdp, behavior, target, Phi


def trace_estimate(stream, gamma, lam, theta, n_batches=50, burn=1000):
    """Mean and batch-means standard error of ``rho_t delta_t e_t`` along the trajectory."""
    tr = TraceState.zeros(stream.phi.shape[1])
    prev_rho = 0.0
    deltas = stream.reward + gamma * stream.phi_next @ theta - stream.phi @ theta
    out = np.empty_like(stream.phi)
    for t in range(len(stream)):
        tr = trace_update(tr, stream.phi[t], prev_rho, gamma, lam)
        out[t] = stream.rho[t] * deltas[t] * tr.e
        prev_rho = stream.rho[t]
    out = out[burn:]
    batches = np.array([b.mean(axis=0) for b in np.array_split(out, n_batches)])
    return out.mean(axis=0), batches.std(axis=0, ddof=1) / math.sqrt(n_batches)


def test_c09_forward_backward_equivalence():
    mdp, behavior, target, Phi = five_state_chain()
    xi = stationary_distribution(mdp, behavior)
    theta = np.array([0.5, -1.0, 2.0])
    stream = sample_trajectory(mdp, behavior, Phi, 0, 1_000_000, seed=9, target=target)
    parts, ok = [], True
    for lam in (0.0, 0.5, 0.9):
        fwd = forward_lambda_expectation(mdp, target, behavior, xi, Phi, theta, lam)
        est, se = trace_estimate(stream, mdp.gamma, lam, theta)
        dist, se_norm = float(np.linalg.norm(fwd - est)), float(np.linalg.norm(se))
        ok &= dist <= 3.0 * se_norm
        parts.append(f"lambda={lam}: |fwd-trace|={dist:.2e} vs 3SE={3 * se_norm:.2e}")
    record(9, ok, "; ".join(parts) + " (10^6 steps)")
    assert ok


# ---------------------------------------------------------------- 10

BIAS_CFG = ExperimentConfig(domain="baird", algorithms=("gtd",), steps=8000, runs=20, schedule="theoretical",
                            seed=10)


def test_c10_biased_weights(problems):
    vals = []
    for eps in (0.0, 0.1, 0.2):
        res = run_policy_eval(replace(BIAS_CFG, epsilon=eps), problems["baird"])
        summ = summarize_steady_state(res, BIAS_CFG.window, metrics=("neu_bar",))
        vals.append(summ.rows[0]["neu_bar_mean"])
    ok = vals[0] <= vals[1] <= vals[2]
    record(10, ok, "steady-state ||A theta_bar - b||^2_{M^-1} for eps 0/0.1/0.2 = "
           + " / ".join(f"{v:.5g}" for v in vals) + " (projected GTD, theoretical step, 20 runs)")
    assert ok


# ---------------------------------------------------------------- 11

CONTROL_CFG = ExperimentConfig(domain="battery", algorithms=("gq_td", "gq_mp"), steps=7000, runs=10,
                               alpha=0.001, lam=0.9, control_radius=5.0, eval_seeds=10, eval_horizon=1000,
                               seed=11)


def test_c11_control(problems):
    p = problems["battery"]
    res = run_control(CONTROL_CFG, p)
    td = [r for r in res if r.algorithm == "gq_td"]
    mp = [r for r in res if r.algorithm == "gq_mp"]
    m0 = res[0].columns["q_msbe"][0]
    td_growth = float(np.median([np.max(r.columns["q_msbe"]) / m0 for r in td]))
    mp_growth = max(float(np.max(r.columns["q_msbe"])) / m0 for r in mp)
    mp_return = float(np.mean([r.final("mean_return") for r in mp]))
    random_return = random_policy_return(p, CONTROL_CFG)
    ok = (td_growth >= 100.0 and not any(r.diverged for r in mp) and mp_growth <= 10.0
          and mp_return > random_return)
    record(11, ok, f"MSBE peak/initial: TD variant median {td_growth:.3g} (need >= 100), "
           f"GTD-MP variant max {mp_growth:.3g} (need <= 10); return after 7000 steps "
           f"GTD-MP {mp_return:.4g} vs random {random_return:.4g}")
    assert ok


# ---------------------------------------------------------------- 12


def test_c12_gradient_check(problems, rng):
    worst = 0.0
    for name in DOMAINS:
        ex = problems[name].exact
        for theta in _random_thetas(problems[name], rng, 10):
            h = 1e-3
            fd = np.array([(neu(theta + h * e, ex) - neu(theta - h * e, ex)) / (2 * h) for e in np.eye(ex.d)])
            closed = -2.0 * neu_half_gradient(theta, ex)
            worst = max(worst, float(np.linalg.norm(fd - closed) / np.linalg.norm(closed)))
    ok = worst <= 1e-6
    record(12, ok, f"max relative error of -1/2 grad NEU vs central differences = {worst:.2e} (tol 1e-6)")
    assert ok


# ---------------------------------------------------------------- 13


def test_c13_determinism(problems, tmp_path):
    suites = [
        BAIRD_CFG,
        replace(BIAS_CFG, epsilon=0.2, runs=5),
        replace(CONTROL_CFG, steps=500, runs=2),
    ]
    same = True
    for k, cfg in enumerate(suites):
        for rep in ("a", "b"):
            res = run_policy_eval(cfg, problems[cfg.domain]) + run_control(cfg, problems[cfg.domain])
            emit_artifacts(res, summarize_steady_state(res, cfg.window), tmp_path / f"{k}{rep}", config=cfg)
        for fname in ("curves.csv", "summary.csv", "config.json"):
            same &= filecmp.cmp(tmp_path / f"{k}a" / fname, tmp_path / f"{k}b" / fname, shallow=False)
    record(13, same, f"byte-identical curves/summary/config for {len(suites)} suites run twice")
    assert same

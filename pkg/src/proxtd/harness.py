"""Experiment runner: learning curves, steady-state summaries, bound tables and artifacts.

A run is fully determined by ``(config, algorithm, run_id)``: every random
stream is derived from ``config.seed`` and the run index, so repeated
executions write byte-identical CSV files.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .domains import BatteryConfig, Domain, build_domain
from .errors import SingularA
from .learners import (
    Learner,
    LearnerConfig,
    SaddleIterate,
    TraceState,
    run_greedy_gq_episode,
)
from .mdp import _draw_rows, make_rng, sample_iid, sample_trajectory
from .objectives import (
    ExactQuantities,
    bound_inputs,
    estimate_sigmas,
    exact_quantities,
    feasible_radii,
    high_prob_bound,
    lemma2_bounds,
    lmi_check,
    m_star_and_stepsize,
    msbe,
    objective_j,
    prox_block_steps,
    q_msbe,
    saddle_error,
    residual_gap_sides,
)

__all__ = [
    "ExperimentConfig",
    "Problem",
    "RunResult",
    "Summary",
    "EVAL_ALGORITHMS",
    "CONTROL_ALGORITHMS",
    "load_config",
    "prepare_problem",
    "learner_config",
    "run_policy_eval",
    "run_control",
    "run_experiment",
    "summarize_steady_state",
    "emit_artifacts",
    "check_bounds",
    "sweep",
    "report",
]

EVAL_ALGORITHMS = ("td0", "gtd", "gtd2", "tdc", "gtd_mp", "gtd2_mp", "gq_lambda")
CONTROL_ALGORITHMS = ("gq_td", "gq_tdc", "gq_mp")
SADDLE_ALGORITHMS = ("gtd", "gtd2", "gtd_mp", "gtd2_mp")
SCHEDULES = ("constant", "robbins_monro", "theoretical")
_EVAL_STREAM = 11
AUDIT_RTOL = 1e-9


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a suite of runs.

    ``schedule="theoretical"`` ignores ``alpha`` and derives the constant
    primal and dual steps from the bound inputs for a run of ``steps``
    samples (this forces ``projected``). ``alphas`` overrides ``alpha`` per
    algorithm. ``window`` is the steady-state window: a float in ``(0, 1]``
    is a fraction of the logged points, an int a count.

    Control algorithms (``gq_td``, ``gq_tdc``, ``gq_mp``) use ``lam`` for the
    trace and project the mirror-prox variant onto balls of radius
    ``control_radius``; their greedy policies are scored every
    ``log_every`` steps by ``eval_seeds`` rollouts of ``eval_horizon`` steps.
    """

    domain: str = "baird"
    algorithms: tuple = ("gtd2", "gtd2_mp")
    steps: int = 8000
    runs: int = 20
    seed: int = 0
    alpha: float = 0.005
    alphas: dict = field(default_factory=dict)
    alpha_y: Optional[float] = None
    beta: Optional[float] = None
    M_mode: Optional[str] = None
    schedule: str = "constant"
    c: float = 1.0
    lam: float = 0.0
    projected: bool = False
    radius_margin: float = 1.1
    sampling: str = "iid"
    epsilon: float = 0.0
    log_every: int = 100
    window: float = 0.1
    divergence_threshold: float = 1e12
    sigma_method: str = "pilot"
    n_jobs: int = 1
    domain_params: dict = field(default_factory=dict)
    eval_seeds: int = 10
    eval_horizon: int = 1000
    control_radius: Optional[float] = 5.0

    def __post_init__(self):
        algos = tuple(self.algorithms)
        object.__setattr__(self, "algorithms", algos)
        object.__setattr__(self, "alphas", dict(self.alphas))
        object.__setattr__(self, "domain_params", dict(self.domain_params))
        unknown = [a for a in algos if a not in EVAL_ALGORITHMS + CONTROL_ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms {unknown}")
        if not algos:
            raise ValueError("at least one algorithm is required")
        if self.steps < 0 or self.runs < 1 or self.log_every < 1:
            raise ValueError("steps must be nonnegative; runs and log_every positive")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.sampling not in ("iid", "trajectory"):
            raise ValueError("sampling must be 'iid' or 'trajectory'")
        if self.schedule == "theoretical":
            object.__setattr__(self, "projected", True)

    def alpha_for(self, algorithm: str) -> float:
        return float(self.alphas.get(algorithm, self.alpha))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["algorithms"] = list(self.algorithms)
        return out


def load_config(path_or_dict, **overrides) -> ExperimentConfig:
    """Build a config from a JSON file (or dict); ``None`` overrides are ignored.

    Keys that name battery constants (e.g. ``c_d``, ``sigma_p``) are routed
    into ``domain_params``.
    """
    if isinstance(path_or_dict, (str, os.PathLike)):
        with open(path_or_dict) as fh:
            data = json.load(fh)
    else:
        data = dict(path_or_dict or {})
    data.update({k: v for k, v in overrides.items() if v is not None})
    names = {f.name for f in fields(ExperimentConfig)}
    battery_keys = {f.name for f in fields(BatteryConfig)}
    params = dict(data.pop("domain_params", {}) or {})
    for key in list(data):
        if key not in names:
            if key in battery_keys:
                params[key] = data.pop(key)
            else:
                raise ValueError(f"unknown configuration key {key!r}")
    if "algorithms" in data:
        data["algorithms"] = tuple(data["algorithms"])
    return ExperimentConfig(domain_params=params, **data)


@dataclass(frozen=True)
class Problem:
    """A domain with its exact quantities, shared by all runs of a suite."""

    domain: Domain
    exact: ExactQuantities

    @property
    def mdp(self):
        return self.domain.mdp


def prepare_problem(domain, domain_params: Optional[dict] = None) -> Problem:
    dom = domain if isinstance(domain, Domain) else build_domain(domain, **(domain_params or {}))
    ex = exact_quantities(dom.mdp, dom.target, dom.behavior, dom.xi, dom.Phi, allow_singular_C=True)
    return Problem(dom, ex)


@dataclass
class RunResult:
    """Logged curve of one (algorithm, run) pair.

    ``columns`` maps a metric name to its values at the logged steps
    ``columns["t"]``. ``audit_failures`` counts logged points that break the
    saddle-gap / residual inequality of projected i.i.d. runs.
    """

    algorithm: str
    run_id: int
    columns: dict
    diverged: bool = False
    diverged_at: Optional[int] = None
    audit_failures: int = 0
    theta: Optional[np.ndarray] = None
    theta_bar: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    def final(self, metric: str) -> float:
        return float(self.columns[metric][-1])


def _radii(problem: Problem, M_mode: str, cfg: ExperimentConfig) -> tuple[float, float]:
    return feasible_radii(problem.exact, M_mode, problem.domain.theta0, cfg.radius_margin)


def learner_config(problem: Problem, cfg: ExperimentConfig, algorithm: str) -> LearnerConfig:
    """The :class:`LearnerConfig` a suite uses for ``algorithm`` (radii and steps resolved)."""
    base = LearnerConfig(algorithm, cfg.alpha_for(algorithm), gamma=problem.mdp.gamma,
                         M_mode=cfg.M_mode, beta=cfg.beta, lam=cfg.lam, seed=cfg.seed,
                         alpha_y=cfg.alpha_y,
                         schedule="robbins_monro" if cfg.schedule == "robbins_monro" else "constant")
    if not cfg.projected:
        return base
    R_theta, R_y = _radii(problem, base.M_mode, cfg)
    base = replace(base, R_theta=R_theta, R_y=R_y)
    if cfg.schedule != "theoretical":
        return base
    table = check_bounds(problem, max(cfg.steps, 1), 0.05, base.M_mode, cfg.radius_margin, cfg.sigma_method,
                         cfg.seed, c=cfg.c)
    return replace(base, schedule="theoretical", alpha=table["alpha_theta"], alpha_y=table["alpha_y"],
                   beta=4.0 * table["alpha_theta"])


def _stream(problem: Problem, cfg: ExperimentConfig, run_id: int):
    d = problem.domain
    if cfg.sampling == "iid":
        return sample_iid(d.mdp, d.behavior, d.xi, d.Phi, cfg.steps, cfg.seed, target=d.target,
                          run_id=run_id, epsilon=cfg.epsilon)
    start = int(make_rng(cfg.seed, run_id, _EVAL_STREAM).choice(d.mdp.n_states, p=d.xi))
    return sample_trajectory(d.mdp, d.behavior, d.Phi, start, cfg.steps, cfg.seed, target=d.target,
                             run_id=run_id, epsilon=cfg.epsilon)


EVAL_COLUMNS = ("t", "mspbe", "msbe", "neu", "mspbe_bar", "neu_bar", "err", "theta_norm",
                "audit_lhs", "audit_rhs")


def _eval_point(problem: Problem, lc: LearnerConfig, it: SaddleIterate, audit: bool) -> dict:
    ex, d = problem.exact, problem.domain
    theta, tbar = it.theta, it.theta_bar
    row = {
        "t": float(it.t),
        "mspbe": objective_j(theta, ex, "covariance"),
        "msbe": msbe(theta, d.mdp, d.target, d.xi, d.Phi),
        "neu": objective_j(theta, ex, "identity"),
        "mspbe_bar": objective_j(tbar, ex, "covariance"),
        "neu_bar": objective_j(tbar, ex, "identity"),
        "err": math.nan,
        "theta_norm": float(np.linalg.norm(theta)),
        "audit_lhs": math.nan,
        "audit_rhs": math.nan,
    }
    if lc.projected and lc.algorithm in SADDLE_ALGORITHMS:
        row["err"] = saddle_error(tbar, it.y_bar, ex, lc.M_mode, lc.R_theta, lc.R_y)
        if audit:
            row["audit_lhs"], row["audit_rhs"] = residual_gap_sides(tbar, it.y_bar, ex, lc.M_mode, lc.R_theta, lc.R_y)
    return row


def _audit_fails(row: dict) -> bool:
    lhs, rhs = row["audit_lhs"], row["audit_rhs"]
    if math.isnan(lhs):
        return False
    return not lhs <= rhs * (1.0 + AUDIT_RTOL) + 1e-12


def _diverging(it: SaddleIterate, threshold: float) -> bool:
    n = float(np.linalg.norm(it.theta))
    return not math.isfinite(n) or n > threshold or not np.all(np.isfinite(it.y))


def _single_eval_run(problem: Problem, cfg: ExperimentConfig, algorithm: str, run_id: int,
                     lc: Optional[LearnerConfig] = None) -> RunResult:
    lc = lc or learner_config(problem, cfg, algorithm)
    stream = _stream(problem, cfg, run_id) if cfg.steps else []
    learner = Learner(lc, problem.domain.theta0)
    audit = lc.projected and cfg.sampling == "iid"
    rows = [_eval_point(problem, lc, learner.iterate, audit)]
    diverged_at = None
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(len(stream)):
            it = learner.step(stream[i])
            t = i + 1
            bad = _diverging(it, cfg.divergence_threshold)
            if bad or t % cfg.log_every == 0 or t == cfg.steps:
                rows.append(_eval_point(problem, lc, it, audit))
            if bad:
                diverged_at = t
                break
    columns = {k: np.array([r[k] for r in rows], dtype=float) for k in EVAL_COLUMNS}
    return RunResult(algorithm, run_id, columns, diverged=diverged_at is not None, diverged_at=diverged_at,
                     audit_failures=sum(_audit_fails(r) for r in rows),
                     theta=learner.iterate.theta.copy(), theta_bar=learner.iterate.theta_bar,
                     info={"alpha": lc.alpha, "alpha_y": lc.alpha_y, "R_theta": lc.R_theta, "R_y": lc.R_y,
                           "M_mode": lc.M_mode})


def _run_task(args):
    kind, problem, cfg, algorithm, run_id, lc = args
    if kind == "eval":
        return _single_eval_run(problem, cfg, algorithm, run_id, lc)
    return _single_control_run(problem, cfg, algorithm, run_id)


def _execute(tasks, n_jobs: int):
    if n_jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(_run_task, tasks))
    return [_run_task(t) for t in tasks]


def run_policy_eval(cfg: ExperimentConfig, problem: Optional[Problem] = None) -> list:
    """Run every evaluation algorithm of ``cfg`` for ``cfg.runs`` seeds.

    Each run logs at step 0, every ``log_every`` steps and at the end. A run
    whose iterate exceeds ``divergence_threshold`` (or turns non-finite) is
    stopped and flagged instead of raising. Results are ordered by
    algorithm, then run index, regardless of ``n_jobs``.
    """
    problem = problem or prepare_problem(cfg.domain, cfg.domain_params)
    algos = [a for a in cfg.algorithms if a in EVAL_ALGORITHMS]
    tasks = []
    for a in algos:
        lc = learner_config(problem, cfg, a)
        tasks += [("eval", problem, cfg, a, r, lc) for r in range(cfg.runs)]
    return _execute(tasks, cfg.n_jobs)


# ---------------------------------------------------------------- control


def _greedy_table(theta, F: np.ndarray, mask: np.ndarray) -> np.ndarray:
    q = np.where(mask, F @ theta, -np.inf)
    return np.argmax(q, axis=1)


def rollout_return(mdp, action_sampler, start_state: int, horizon: int, seeds: int, base_seed: int) -> float:
    """Mean undiscounted return of ``horizon``-step rollouts, one per evaluation seed.

    ``action_sampler(states, rng)`` returns one action per state. Seeds are
    the same for every call, so policies are compared on common randomness.
    """
    cum_P = np.cumsum(mdp.transition, axis=2)
    totals = np.zeros(seeds)
    rngs = [make_rng(base_seed, k, _EVAL_STREAM) for k in range(seeds)]
    s = np.full(seeds, int(start_state))
    for _ in range(horizon):
        a = action_sampler(s, rngs)
        totals += mdp.reward[s, a]
        u = np.array([g.random() for g in rngs])
        s = _draw_rows(cum_P, s * mdp.n_actions + a, u)
    return float(totals.mean())


def _greedy_sampler(table: np.ndarray):
    return lambda s, rngs: table[s]


def _policy_sampler(probs: np.ndarray):
    cum = np.cumsum(probs, axis=1)

    def sample(s, rngs):
        u = np.array([g.random() for g in rngs])
        return _draw_rows(cum, s, u)

    return sample


CONTROL_COLUMNS = ("t", "q_msbe", "mean_return", "theta_norm")


def _control_config(problem: Problem, cfg: ExperimentConfig, algorithm: str) -> LearnerConfig:
    variant = algorithm[3:]
    radius = math.inf
    if variant == "mp" and cfg.control_radius is not None:
        radius = float(cfg.control_radius)
    return LearnerConfig("gq_lambda", cfg.alpha_for(algorithm), gamma=problem.mdp.gamma, lam=cfg.lam,
                         beta=cfg.beta, alpha_y=cfg.alpha_y, R_theta=radius, R_y=radius, seed=cfg.seed)


def _single_control_run(problem: Problem, cfg: ExperimentConfig, algorithm: str, run_id: int) -> RunResult:
    d = problem.domain
    if d.features_sa is None:
        raise ValueError(f"domain {d.name!r} has no state-action features for control")
    mdp, F = d.mdp, d.features_sa
    lc = _control_config(problem, cfg, algorithm)
    variant = algorithm[3:]
    it = SaddleIterate.start(np.zeros(F.shape[2]))
    tr = TraceState.zeros(F.shape[2])
    rng = make_rng(cfg.seed, run_id)
    xi_sa = d.xi_sa
    s = d.start_state

    def point(it):
        table = _greedy_table(it.theta, F, mdp.action_mask)
        return {"t": float(it.t), "q_msbe": q_msbe(it.theta, mdp, F, xi_sa),
                "mean_return": rollout_return(mdp, _greedy_sampler(table), d.start_state, cfg.eval_horizon,
                                              cfg.eval_seeds, cfg.seed),
                "theta_norm": float(np.linalg.norm(it.theta))}

    rows = [point(it)]
    diverged_at = None
    done = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while done < cfg.steps:
            chunk = min(cfg.log_every, cfg.steps - done)
            it, tr, log = run_greedy_gq_episode(mdp, d.behavior, F, lc, it, cfg.seed, start_state=s,
                                                n_steps=chunk, variant=variant, trace=tr, rng=rng)
            s = log.final_state
            done += chunk
            if _diverging(it, cfg.divergence_threshold):
                diverged_at = done
                rows.append({"t": float(done), "q_msbe": math.inf, "mean_return": math.nan,
                             "theta_norm": float(np.linalg.norm(it.theta))})
                break
            rows.append(point(it))
    columns = {k: np.array([r[k] for r in rows], dtype=float) for k in CONTROL_COLUMNS}
    return RunResult(algorithm, run_id, columns, diverged=diverged_at is not None, diverged_at=diverged_at,
                     theta=it.theta.copy(), theta_bar=it.theta_bar,
                     info={"alpha": lc.alpha, "R_theta": lc.R_theta, "lam": lc.lam})


def random_policy_return(problem: Problem, cfg: ExperimentConfig) -> float:
    """Return of the behavior policy under the same evaluation protocol as the learned policies."""
    d = problem.domain
    return rollout_return(d.mdp, _policy_sampler(d.behavior.probs), d.start_state, cfg.eval_horizon,
                          cfg.eval_seeds, cfg.seed)


def run_control(cfg: ExperimentConfig, problem: Optional[Problem] = None) -> list:
    """Greedy-GQ training for each control algorithm with periodic greedy-policy evaluation."""
    problem = problem or prepare_problem(cfg.domain, cfg.domain_params)
    algos = [a for a in cfg.algorithms if a in CONTROL_ALGORITHMS]
    tasks = [("control", problem, cfg, a, r, None) for a in algos for r in range(cfg.runs)]
    return _execute(tasks, cfg.n_jobs)


def run_experiment(cfg: ExperimentConfig, problem: Optional[Problem] = None) -> list:
    problem = problem or prepare_problem(cfg.domain, cfg.domain_params)
    return run_policy_eval(cfg, problem) + run_control(cfg, problem)


# ---------------------------------------------------------------- summaries


@dataclass
class Summary:
    """Per-algorithm steady-state statistics and the ranking by the first metric."""

    rows: list
    ranking: list
    metrics: tuple

    def row(self, algorithm: str) -> dict:
        for r in self.rows:
            if r["algorithm"] == algorithm:
                return r
        raise KeyError(algorithm)


_SUMMARY_BASE = ("algorithm", "runs", "diverged_runs", "audit_failures", "rank")


def _window_size(window, n_points: int) -> int:
    if isinstance(window, (int, np.integer)) and not isinstance(window, bool):
        k = int(window)
    else:
        if not 0.0 < float(window) <= 1.0:
            raise ValueError("a fractional window must lie in (0, 1]")
        k = max(1, int(math.ceil(float(window) * n_points)))
    if not 1 <= k <= n_points:
        raise ValueError(f"window of {k} points exceeds the {n_points} logged points")
    return k


def summarize_steady_state(results: Sequence[RunResult], window=0.1, metrics=None) -> Summary:
    """Mean and standard deviation over runs of each run's final-window average.

    ``metrics`` defaults to ``("mspbe", "msbe")`` for evaluation runs and
    ``("q_msbe", "mean_return")`` for control runs.
    """
    if not results:
        raise ValueError("no results to summarise")
    if metrics is None:
        metrics = ("mspbe", "msbe") if "mspbe" in results[0].columns else ("q_msbe", "mean_return")
    metrics = tuple(metrics)
    order = []
    for r in results:
        if r.algorithm not in order:
            order.append(r.algorithm)
    rows = []
    for algo in order:
        runs = [r for r in results if r.algorithm == algo]
        row = {"algorithm": algo, "runs": len(runs), "diverged_runs": sum(r.diverged for r in runs),
               "audit_failures": sum(r.audit_failures for r in runs)}
        for m in metrics:
            vals = []
            for r in runs:
                series = r.columns[m]
                k = _window_size(window, series.size)
                vals.append(float(np.mean(series[-k:])))
            vals = np.array(vals)
            row[f"{m}_mean"] = float(np.mean(vals))
            row[f"{m}_std"] = float(np.std(vals))
        rows.append(row)
    key = f"{metrics[0]}_mean"
    ranking = [r["algorithm"] for r in sorted(rows, key=lambda r: (_nan_last(r[key]), r["algorithm"]))]
    for r in rows:
        r["rank"] = ranking.index(r["algorithm"]) + 1
    return Summary(rows, ranking, metrics)


def _nan_last(v: float) -> float:
    return math.inf if math.isnan(v) else v


# ---------------------------------------------------------------- bounds


def check_bounds(domain, n: int, delta: float = 0.05, M_mode: str = "identity", margin: float = 1.1,
                 sigma_method: str = "pilot", seed: int = 0, c: float = 1.0,
                 domain_params: Optional[dict] = None) -> dict:
    """Every closed-form quantity for ``domain`` at sample size ``n``.

    Includes the norm bounds on ``A`` and ``b``, feasible radii, variance
    bounds, ``M_*`` with its step sizes, the high-probability saddle-gap
    bound, the matrix-inequality check and whether ``A theta = b`` is solvable.
    """
    problem = domain if isinstance(domain, Problem) else prepare_problem(domain, domain_params)
    d, ex = problem.domain, problem.exact
    L, r_max = d.features.bound, d.mdp.r_max
    normA = float(np.linalg.norm(ex.A, 2))
    normB = float(np.linalg.norm(ex.b))
    boundA, boundB = lemma2_bounds(L, ex.d, ex.gamma, ex.rho_max, r_max)
    R_theta, R_y = feasible_radii(ex, M_mode, d.theta0, margin)
    s1, s2 = estimate_sigmas(d.mdp, d.target, d.behavior, d.xi, d.Phi, M_mode, R_theta, R_y,
                             method=sigma_method, seed=seed)
    bi = bound_inputs(ex, L, r_max, M_mode, R_theta, R_y, s1, s2)
    m_star, alpha = m_star_and_stepsize(bi, normA, normB, n, c)
    a_theta, a_y = prox_block_steps(bi, alpha)
    try:
        ex.theta_star
        solvable = True
    except SingularA:
        try:
            ex.theta_min_norm
            solvable = True
        except SingularA:
            solvable = False
    return {
        "domain": d.name, "n": int(n), "delta": float(delta), "M_mode": M_mode,
        "d": ex.d, "L": L, "gamma": ex.gamma, "rho_max": ex.rho_max, "R_max": r_max,
        "normA": normA, "boundA": boundA, "normA_ok": normA <= boundA,
        "normB": normB, "boundB": boundB, "normB_ok": normB <= boundB,
        "nu": ex.nu, "tau": bi.tau, "xi_max": ex.xi_max,
        "R_theta": R_theta, "R_y": R_y, "R": bi.R, "sigma1": s1, "sigma2": s2,
        "M_star": m_star, "alpha": alpha, "alpha_theta": a_theta, "alpha_y": a_y,
        "err_bound": high_prob_bound(bi, n, delta),
        "lmi": lmi_check(ex), "A_solvable": solvable,
    }


# ---------------------------------------------------------------- artifacts


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


_CSV_NAMES = {"t": "step"}


def emit_artifacts(results: Optional[Sequence[RunResult]], summary: Optional[Summary], out_dir,
                   config: Optional[ExperimentConfig] = None, bounds: Optional[dict] = None) -> list:
    """Write ``curves.csv`` and ``summary.csv`` plus, when given, ``bounds.csv`` and ``config.json``.

    ``results=None`` skips the run files; an empty list writes them with
    headers only.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if results is not None:
        cols = [] if results else list(EVAL_COLUMNS)
        for r in results:
            cols += [c for c in r.columns if c not in cols]
        rows = []
        for r in results:
            n = r.columns["t"].size
            for i in range(n):
                rows.append([r.algorithm, r.run_id] + [r.columns[c][i] if c in r.columns else math.nan
                                                       for c in cols])
        _write_csv(out / "curves.csv", ["algorithm", "run_id"] + [_CSV_NAMES.get(c, c) for c in cols], rows)
        written.append(out / "curves.csv")
        if summary is None and not results:
            _write_csv(out / "summary.csv", list(_SUMMARY_BASE), [])
            written.append(out / "summary.csv")
    if summary is not None:
        header = list(summary.rows[0].keys()) if summary.rows else list(_SUMMARY_BASE)
        _write_csv(out / "summary.csv", header, [[r[h] for h in header] for r in summary.rows])
        written.append(out / "summary.csv")
    if bounds is not None:
        _write_csv(out / "bounds.csv", ["quantity", "value"], [[k, v] for k, v in bounds.items()])
        written.append(out / "bounds.csv")
    if config is not None:
        with open(out / "config.json", "w") as fh:
            json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(out / "config.json")
    return written


def sweep(cfg: ExperimentConfig, param: str, values: Sequence, problem: Optional[Problem] = None) -> list:
    """Re-run ``cfg`` with ``param`` set to each value; one summary row per (value, algorithm)."""
    if param not in {f.name for f in fields(ExperimentConfig)}:
        raise ValueError(f"unknown parameter {param!r}")
    problem = problem or prepare_problem(cfg.domain, cfg.domain_params)
    rows = []
    for v in values:
        c = replace(cfg, **{param: v, "alphas": {} if param == "alpha" else cfg.alphas})
        results = run_experiment(c, problem)
        summ = summarize_steady_state(results, c.window)
        for r in summ.rows:
            rows.append({param: v, **r})
    return rows


def write_sweep(rows: list, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = []
    for r in rows:
        header += [k for k in r if k not in header]
    _write_csv(out / "sweep.csv", header, [[r.get(h, "") for h in header] for r in rows])
    return out / "sweep.csv"


def report(in_dir) -> str:
    """Plain-text table of ``summary.csv`` (and ``bounds.csv`` when present) in ``in_dir``."""
    base = Path(in_dir)
    lines = []
    summary = base / "summary.csv"
    if not summary.exists() and not (base / "bounds.csv").exists():
        raise FileNotFoundError(f"no summary.csv or bounds.csv in {base}")
    if summary.exists():
        with open(summary) as fh:
            rows = list(csv.reader(fh))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        for r in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    if (base / "bounds.csv").exists():
        with open(base / "bounds.csv") as fh:
            rows = list(csv.reader(fh))[1:]
        if lines:
            lines.append("")
        width = max(len(r[0]) for r in rows)
        lines += [f"{k.ljust(width)}  {v}" for k, v in rows]
    return "\n".join(lines)

"""Incremental learners: TD(0), GTD/GTD2, TDC, mirror-prox GTD and GQ with traces.

Every GTD-type update is one stochastic gradient step on the saddle function
``L(theta, y) = <b - A theta, y> - 1/2 ||y||_M^2`` with ``(A, b, M)``
replaced by their single-sample estimates. The TD error follows the
convention ``delta = r + gamma phi'^T theta - phi^T theta = r - theta^T dphi``
throughout, including in the trace-based GQ update.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import BehaviorZero, DimensionMismatch
from .mdp import FiniteMdp, Policy, Sample, make_rng

__all__ = [
    "ALGORITHMS",
    "SaddleIterate",
    "LearnerConfig",
    "TraceState",
    "project_ball",
    "step_size",
    "gtd_family_step",
    "mirror_prox_step",
    "td0_step",
    "tdc_step",
    "trace_update",
    "gq_mp_learn_step",
    "gq_step",
    "greedy_action",
    "greedy_action_and_rho",
    "run_greedy_gq_episode",
    "Learner",
    "save_checkpoints",
]

ALGORITHMS = ("td0", "gtd", "gtd2", "tdc", "gtd_mp", "gtd2_mp", "gq_lambda")
SCHEDULES = ("constant", "theoretical", "robbins_monro")
RM_EXPONENT = 0.6


@dataclass(frozen=True)
class SaddleIterate:
    """Primal/dual iterate with step-size weighted running sums for averaging."""

    theta: np.ndarray
    y: np.ndarray
    theta_sum: np.ndarray
    y_sum: np.ndarray
    weight_sum: float = 0.0
    t: int = 0

    @classmethod
    def start(cls, theta0, y0=None) -> "SaddleIterate":
        theta0 = np.array(theta0, dtype=float)
        y0 = np.zeros_like(theta0) if y0 is None else np.array(y0, dtype=float)
        return cls(theta0, y0, np.zeros_like(theta0), np.zeros_like(y0))

    @property
    def theta_bar(self) -> np.ndarray:
        if self.weight_sum == 0.0:
            return self.theta.copy()
        return self.theta_sum / self.weight_sum

    @property
    def y_bar(self) -> np.ndarray:
        if self.weight_sum == 0.0:
            return self.y.copy()
        return self.y_sum / self.weight_sum


@dataclass(frozen=True)
class LearnerConfig:
    """Hyper-parameters of one learner.

    ``alpha`` is the base step; with ``schedule="robbins_monro"`` the step
    at time ``t`` is ``alpha / (1 + t)^0.6``. ``"theoretical"`` expects
    ``alpha`` to already hold the constant value from the bounds module.
    ``beta`` is only read by TDC and defaults to ``4 * alpha``.
    ``alpha_y`` is the base step of the dual block of the saddle methods
    (default ``alpha``); the schedule scales it like ``alpha``.
    """

    algorithm: str = "gtd2"
    alpha: float = 0.01
    gamma: float = 0.9
    M_mode: Optional[str] = None
    schedule: str = "constant"
    beta: Optional[float] = None
    lam: float = 0.0
    R_theta: float = math.inf
    R_y: float = math.inf
    seed: int = 0
    alpha_y: Optional[float] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0.0 <= self.lam < 1.0:
            raise ValueError("lambda must lie in [0, 1)")
        if self.M_mode is None:
            mode = "identity" if self.algorithm in ("gtd", "gtd_mp") else "covariance"
            object.__setattr__(self, "M_mode", mode)
        if self.beta is None:
            object.__setattr__(self, "beta", 4.0 * self.alpha)
        if self.alpha_y is None:
            object.__setattr__(self, "alpha_y", self.alpha)
        if not self.alpha_y > 0:
            raise ValueError("alpha_y must be positive")

    @property
    def dual_ratio(self) -> float:
        return self.alpha_y / self.alpha

    @property
    def projected(self) -> bool:
        return math.isfinite(self.R_theta) or math.isfinite(self.R_y)


@dataclass(frozen=True)
class TraceState:
    e: np.ndarray

    @classmethod
    def zeros(cls, d: int) -> "TraceState":
        return cls(np.zeros(d))


def project_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_2 <= radius}``."""
    v = np.asarray(v, dtype=float)
    if math.isinf(radius):
        return v
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = float(np.linalg.norm(v))
    return v if n <= radius else v * (radius / n)


def step_size(cfg: LearnerConfig, t: int) -> float:
    if cfg.schedule == "robbins_monro":
        return cfg.alpha / (1.0 + t) ** RM_EXPONENT
    return cfg.alpha


def _unpack(it: SaddleIterate, sample: Sample, gamma: float):
    phi = np.asarray(sample.phi, dtype=float)
    phi_next = np.asarray(sample.phi_next, dtype=float)
    if phi.shape != it.theta.shape or phi_next.shape != it.theta.shape or it.y.shape != it.theta.shape:
        raise DimensionMismatch(f"feature dim {phi.shape} vs parameter dim {it.theta.shape}")
    return phi, phi - gamma * phi_next, float(sample.reward), float(sample.rho)


def _dual_drift(phi, dphi, r, rho, theta, y, M_mode):
    """Single-sample ``b - A theta - M y``."""
    delta = r - theta @ dphi
    if M_mode == "identity":
        return rho * delta * phi - y
    return (rho * delta - phi @ y) * phi


def _advance(it: SaddleIterate, theta, y, alpha, average_y: bool = True) -> SaddleIterate:
    # accumulate the iterate the step was taken from (t = 1..n in the averaging formula)
    return SaddleIterate(
        theta=theta,
        y=y,
        theta_sum=it.theta_sum + alpha * it.theta,
        y_sum=it.y_sum + alpha * it.y if average_y else it.y_sum,
        weight_sum=it.weight_sum + alpha,
        t=it.t + 1,
    )


def gtd_family_step(it: SaddleIterate, sample: Sample, cfg: LearnerConfig) -> SaddleIterate:
    """One projected GTD / GTD2 step; both blocks read the pre-step ``(theta, y)``."""
    phi, dphi, r, rho = _unpack(it, sample, cfg.gamma)
    alpha = step_size(cfg, it.t)
    alpha_y = alpha * cfg.dual_ratio
    y_new = it.y + alpha_y * _dual_drift(phi, dphi, r, rho, it.theta, it.y, cfg.M_mode)
    theta_new = it.theta + alpha * rho * (phi @ it.y) * dphi
    return _advance(it, project_ball(theta_new, cfg.R_theta), project_ball(y_new, cfg.R_y), alpha)


def mirror_prox_step(it: SaddleIterate, sample_a: Sample, cfg: LearnerConfig,
                     sample_b: Optional[Sample] = None) -> SaddleIterate:
    """Extragradient step: extrapolate with ``sample_a``, correct with ``sample_b``.

    ``sample_b`` defaults to ``sample_a``, which is the single-sample scheme.
    """
    phi, dphi, r, rho = _unpack(it, sample_a, cfg.gamma)
    alpha = step_size(cfg, it.t)
    alpha_y = alpha * cfg.dual_ratio
    y_m = it.y + alpha_y * _dual_drift(phi, dphi, r, rho, it.theta, it.y, cfg.M_mode)
    theta_m = it.theta + alpha * rho * (phi @ it.y) * dphi
    if sample_b is not None:
        phi, dphi, r, rho = _unpack(it, sample_b, cfg.gamma)
    y_new = it.y + alpha_y * _dual_drift(phi, dphi, r, rho, theta_m, y_m, cfg.M_mode)
    theta_new = it.theta + alpha * rho * (phi @ y_m) * dphi
    return _advance(it, project_ball(theta_new, cfg.R_theta), project_ball(y_new, cfg.R_y), alpha)


def td0_step(theta, sample: Sample, alpha: float, gamma: float) -> np.ndarray:
    """Importance-weighted TD(0): ``theta + alpha rho delta phi``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(sample.phi, dtype=float)
    delta = sample.reward + gamma * (np.asarray(sample.phi_next) @ theta) - phi @ theta
    return theta + alpha * sample.rho * delta * phi


def tdc_step(it: SaddleIterate, sample: Sample, cfg: LearnerConfig) -> SaddleIterate:
    """TD with gradient correction; ``beta`` drives the faster ``y`` recursion."""
    if cfg.beta < cfg.alpha:
        raise ValueError("TDC needs beta >= alpha")
    phi, dphi, r, rho = _unpack(it, sample, cfg.gamma)
    phi_next = np.asarray(sample.phi_next, dtype=float)
    alpha = step_size(cfg, it.t)
    beta = alpha * cfg.beta / cfg.alpha
    delta = r - it.theta @ dphi
    wphi = phi @ it.y
    theta_new = it.theta + alpha * rho * (delta * phi - cfg.gamma * wphi * phi_next)
    y_new = it.y + beta * rho * (delta - wphi) * phi
    return _advance(it, project_ball(theta_new, cfg.R_theta), project_ball(y_new, cfg.R_y),
                    alpha, average_y=False)


def trace_update(tr: TraceState, phi, rho: float, gamma: float, lam: float) -> TraceState:
    """``e <- rho gamma lambda e + phi``.

    ``rho`` is the weight that carries the old trace forward. For
    state-action features that is the weight of the current action; for
    state features it is the weight of the transition that led to ``phi``.
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError("lambda must lie in [0, 1)")
    return TraceState(rho * gamma * lam * tr.e + np.asarray(phi, dtype=float))


def gq_mp_learn_step(it: SaddleIterate, tr: TraceState, sample: Sample,
                     cfg: LearnerConfig, trace_rho: Optional[float] = None) -> tuple[SaddleIterate, TraceState]:
    """Mirror-prox GQ update with an eligibility trace and a GTD2-style dual.

    ``trace_rho`` is the weight that carries the old trace forward; it
    defaults to the sample's own weight (state-action features). With state
    features pass the previous transition's weight instead.
    """
    phi, dphi, r, rho = _unpack(it, sample, cfg.gamma)
    if tr.e.shape != phi.shape:
        raise DimensionMismatch("trace and feature dimensions differ")
    alpha = step_size(cfg, it.t)
    tr = trace_update(tr, phi, rho if trace_rho is None else trace_rho, cfg.gamma, cfg.lam)
    e = tr.e
    alpha_y = alpha * cfg.dual_ratio
    delta = r - it.theta @ dphi
    y_m = it.y + alpha_y * (rho * delta * e - (phi @ it.y) * phi)
    theta_m = it.theta + alpha * rho * (e @ it.y) * dphi
    delta_m = r - theta_m @ dphi
    y_new = it.y + alpha_y * (rho * delta_m * e - (phi @ y_m) * phi)
    theta_new = it.theta + alpha * rho * (e @ y_m) * dphi
    return _advance(it, project_ball(theta_new, cfg.R_theta), project_ball(y_new, cfg.R_y), alpha), tr


def gq_step(variant: str, it: SaddleIterate, tr: TraceState, sample: Sample,
            cfg: LearnerConfig) -> tuple[SaddleIterate, TraceState]:
    """Trace-based control update; ``variant`` is ``"td"``, ``"tdc"`` or ``"mp"``."""
    if variant == "mp":
        return gq_mp_learn_step(it, tr, sample, cfg)
    phi, dphi, r, rho = _unpack(it, sample, cfg.gamma)
    alpha = step_size(cfg, it.t)
    tr = trace_update(tr, phi, rho, cfg.gamma, cfg.lam)
    e = tr.e
    delta = r - it.theta @ dphi
    if variant == "td":
        return _advance(it, it.theta + alpha * rho * delta * e, it.y, alpha, average_y=False), tr
    if variant == "tdc":
        phi_next = np.asarray(sample.phi_next, dtype=float)
        beta = alpha * cfg.beta / cfg.alpha
        theta_new = it.theta + alpha * rho * (delta * e - cfg.gamma * (1.0 - cfg.lam) * (e @ it.y) * phi_next)
        y_new = it.y + beta * (rho * delta * e - (phi @ it.y) * phi)
        return _advance(it, theta_new, y_new, alpha, average_y=False), tr
    raise ValueError(f"unknown GQ variant {variant!r}")


def greedy_action(theta, features_sa: np.ndarray, s: int, mask: Optional[np.ndarray] = None) -> int:
    """``argmax_a theta^T phi(s, a)`` over available actions, lowest index on ties."""
    q = features_sa[s] @ np.asarray(theta, dtype=float)
    if mask is not None:
        q = np.where(mask[s], q, -np.inf)
    return int(np.argmax(q))


def greedy_action_and_rho(theta, behavior: Policy, s: int, features_sa: np.ndarray,
                          taken_action: int, mask: Optional[np.ndarray] = None) -> tuple[int, float]:
    """Greedy action in ``s`` and the weight ``1/pi_b(a_t|s)`` if ``a_t`` is greedy, else 0."""
    pb = behavior.probs[s, taken_action]
    if pb <= 0:
        raise BehaviorZero(f"behavior has pi_b({taken_action}|{s}) = 0")
    a_star = greedy_action(theta, features_sa, s, mask)
    return a_star, (1.0 / pb if taken_action == a_star else 0.0)


@dataclass
class EpisodeLog:
    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    rhos: list = field(default_factory=list)
    final_state: Optional[int] = None


def run_greedy_gq_episode(mdp: FiniteMdp, behavior: Policy, features_sa: np.ndarray, cfg: LearnerConfig,
                          it: SaddleIterate, seed: int, start_state: int = 0, n_steps: int = 1000,
                          absorbing: Optional[set] = None, variant: str = "mp",
                          trace: Optional[TraceState] = None, run_id: int = 0,
                          rng: Optional[np.random.Generator] = None):
    """Greedy-GQ(lambda) along one behavior trajectory.

    The trace starts at zero unless ``trace`` is passed (to continue a run
    that is chunked for evaluation). The loop stops after ``n_steps``
    transitions or on reaching a state in ``absorbing``. Returns
    ``(iterate, trace, log)``; the averaged pair is ``iterate.theta_bar``
    and ``iterate.y_bar``.
    """
    rng = make_rng(seed, run_id) if rng is None else rng
    tr = TraceState.zeros(it.theta.size) if trace is None else trace
    cum_pi = np.cumsum(behavior.probs, axis=1)
    cum_P = np.cumsum(mdp.transition, axis=2)
    mask = mdp.action_mask
    log = EpisodeLog()
    s = int(start_state)
    for _ in range(n_steps):
        if absorbing and s in absorbing:
            break
        a = min(int(np.searchsorted(cum_pi[s], rng.random(), side="right")), mdp.n_actions - 1)
        s2 = min(int(np.searchsorted(cum_P[s, a], rng.random(), side="right")), mdp.n_states - 1)
        _, rho = greedy_action_and_rho(it.theta, behavior, s, features_sa, a, mask)
        a_next = greedy_action(it.theta, features_sa, s2, mask)
        sample = Sample(features_sa[s, a], features_sa[s2, a_next], float(mdp.reward[s, a]), rho, s, a)
        it, tr = gq_step(variant, it, tr, sample, cfg)
        log.states.append(s)
        log.actions.append(a)
        log.rewards.append(float(mdp.reward[s, a]))
        log.rhos.append(rho)
        s = s2
    log.final_state = s
    return it, tr, log


class Learner:
    """Stateful wrapper that dispatches one of the policy-evaluation updates."""

    def __init__(self, cfg: LearnerConfig, theta0, y0=None):
        self.cfg = cfg
        self.iterate = SaddleIterate.start(theta0, y0)
        if cfg.projected:
            self.iterate = replace(self.iterate,
                                   theta=project_ball(self.iterate.theta, cfg.R_theta),
                                   y=project_ball(self.iterate.y, cfg.R_y))
        self.trace = TraceState.zeros(self.iterate.theta.size)
        self._prev_rho = 0.0

    def step(self, sample: Sample) -> SaddleIterate:
        cfg, it = self.cfg, self.iterate
        algo = cfg.algorithm
        if algo in ("gtd", "gtd2"):
            it = gtd_family_step(it, sample, cfg)
        elif algo in ("gtd_mp", "gtd2_mp"):
            it = mirror_prox_step(it, sample, cfg)
        elif algo == "tdc":
            it = tdc_step(it, sample, cfg)
        elif algo == "td0":
            alpha = step_size(cfg, it.t)
            theta = project_ball(td0_step(it.theta, sample, alpha, cfg.gamma), cfg.R_theta)
            it = _advance(it, theta, it.y, alpha, average_y=False)
        else:
            # state features: the trace is carried by the weight of the previous transition
            it, self.trace = gq_mp_learn_step(it, self.trace, sample, cfg, trace_rho=self._prev_rho)
            self._prev_rho = float(sample.rho)
        self.iterate = it
        return it


def save_checkpoints(iterates, path) -> None:
    """Write a sequence of iterates as CSV rows ``t, theta[..], y[..], theta_bar[..]``."""
    iterates = list(iterates)
    if not iterates:
        raise ValueError("no iterates to save")
    d = iterates[0].theta.size
    header = (["t"] + [f"theta[{j}]" for j in range(d)] + [f"y[{j}]" for j in range(d)]
              + [f"theta_bar[{j}]" for j in range(d)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for it in iterates:
            row = list(it.theta) + list(it.y) + list(it.theta_bar)
            w.writerow([str(it.t)] + [repr(float(v)) for v in row])

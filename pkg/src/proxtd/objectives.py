"""Exact objectives, the saddle-point Lagrangian and closed-form bounds.

All quantities here are computed by enumerating the finite MDP, so they act
as ground truth for the stochastic learners. ``M_mode`` selects the metric of
the dual variable: ``"identity"`` (GTD / NEU) or ``"covariance"`` (GTD2 /
MSPBE).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import BehaviorZero, LmiViolated, SingularA, SingularC, ZeroMstar
from .mdp import FiniteMdp, Policy, Sample, make_rng, true_values, weight_table

__all__ = [
    "ExactQuantities",
    "BoundInputs",
    "TransitionTable",
    "transition_table",
    "exact_quantities",
    "sample_estimates",
    "m_matrix",
    "objective_j",
    "neu",
    "mspbe",
    "msbe",
    "q_msbe",
    "neu_half_gradient",
    "lagrangian",
    "y_star",
    "saddle_error",
    "residual_xi_sq",
    "residual_gap_sides",
    "feasible_radii",
    "lemma2_bounds",
    "estimate_sigmas",
    "bound_inputs",
    "m_star_and_stepsize",
    "prox_block_steps",
    "high_prob_bound",
    "lmi_check",
    "performance_bounds",
    "forward_lambda_expectation",
]

SING_TOL = 1e-12
MODES = ("identity", "covariance")


@dataclass(frozen=True)
class TransitionTable:
    """Every ``(s, a, s')`` triple with positive probability under ``xi x pi_b x P``."""

    weight: np.ndarray
    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray
    rho: np.ndarray
    reward: np.ndarray


def transition_table(mdp: FiniteMdp, target: Policy, behavior: Policy, xi) -> TransitionTable:
    xi = np.asarray(xi, dtype=float)
    pb = behavior.probs
    uncovered = (target.probs > 0) & (pb <= 0) & (xi[:, None] > 0)
    if uncovered.any():
        s, a = np.argwhere(uncovered)[0]
        raise BehaviorZero(f"target acts with a={a} in s={s} where the behavior never does")
    w = xi[:, None, None] * pb[:, :, None] * mdp.transition
    s, a, s2 = np.nonzero(w > 0)
    rho = weight_table(target, behavior)
    return TransitionTable(w[s, a, s2], s, a, s2, rho[s, a], mdp.reward[s, a])


@dataclass(frozen=True)
class ExactQuantities:
    """``A``, ``b``, ``C`` and the derived objects for one (MDP, policies, xi, Phi) tuple.

    With ``pseudo_inverse=True`` a rank-deficient ``C`` is accepted and every
    ``C^{-1}`` is read as the Moore-Penrose inverse. This is exact for the
    objectives: ``b - A theta`` always lies in the range of ``C``.
    """

    A: np.ndarray
    b: np.ndarray
    C: np.ndarray
    xi: Optional[np.ndarray] = None
    Phi: Optional[np.ndarray] = None
    Pi: Optional[np.ndarray] = None
    gamma: Optional[float] = None
    rho_max: Optional[float] = None
    P_pi: Optional[np.ndarray] = None
    R_pi: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    pseudo_inverse: bool = False
    nu: float = field(init=False)
    nu_plus: float = field(init=False)
    tau_C: float = field(init=False)
    xi_max: Optional[float] = field(init=False)

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        eig = np.linalg.eigvalsh(0.5 * (C + C.T))
        object.__setattr__(self, "nu", float(eig[0]))
        pos = eig[eig > SING_TOL * max(1.0, eig[-1])]
        object.__setattr__(self, "nu_plus", float(pos[0]) if pos.size else 0.0)
        object.__setattr__(self, "tau_C", float(eig[-1]))
        object.__setattr__(self, "xi_max", None if self.xi is None else float(np.max(self.xi)))

    @classmethod
    def from_matrices(cls, A, b, C=None) -> "ExactQuantities":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        C = np.eye(A.shape[0]) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
        return cls(A, np.atleast_1d(np.asarray(b, dtype=float)), C)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def theta_star(self) -> np.ndarray:
        s = np.linalg.svd(self.A, compute_uv=False)
        if s[-1] < SING_TOL:
            raise SingularA("A is singular; no fixed point A theta = b")
        return np.linalg.solve(self.A, self.b)

    @property
    def theta_min_norm(self) -> np.ndarray:
        """Minimum-norm solution of ``A theta = b``; raises if the system is inconsistent."""
        sol = np.linalg.lstsq(self.A, self.b, rcond=None)[0]
        if np.linalg.norm(self.A @ sol - self.b) > 1e-9 * max(1.0, np.linalg.norm(self.b)):
            raise SingularA("A theta = b has no solution")
        return sol

    @property
    def C_inv(self) -> np.ndarray:
        if self.nu >= SING_TOL:
            return np.linalg.inv(self.C)
        if not self.pseudo_inverse:
            raise SingularC("C is singular")
        return np.linalg.pinv(self.C, rcond=1e-10, hermitian=True)


def exact_quantities(mdp: FiniteMdp, target: Policy, behavior: Policy, xi, Phi,
                     allow_singular_C: bool = False) -> ExactQuantities:
    """``A = E[rho phi dphi^T]``, ``b = E[rho r phi]``, ``C = E[phi phi^T]`` by enumeration.

    A singular ``C`` (e.g. more features than states) raises :class:`SingularC`
    unless ``allow_singular_C`` is set, in which case pseudo-inverses are used.
    """
    Phi = np.asarray(getattr(Phi, "matrix", Phi), dtype=float)
    xi = np.asarray(xi, dtype=float)
    tt = transition_table(mdp, target, behavior, xi)
    g = mdp.gamma
    wr = tt.weight * tt.rho
    phi, phi2 = Phi[tt.state], Phi[tt.next_state]
    A = (phi * wr[:, None]).T @ (phi - g * phi2)
    b = (phi * (wr * tt.reward)[:, None]).sum(axis=0)
    C = (Phi * xi[:, None]).T @ Phi
    singular = np.linalg.eigvalsh(C)[0] < SING_TOL
    if singular and not allow_singular_C:
        raise SingularC("Phi^T Xi Phi is singular")
    Cinv = np.linalg.pinv(C, rcond=1e-10, hermitian=True) if singular else np.linalg.inv(C)
    Pi = Phi @ Cinv @ (Phi.T * xi[None, :])
    P_pi, R_pi = mdp.induced(target)
    rho = weight_table(target, behavior)
    rho_max = float(np.max(rho[behavior.probs > 0]))
    return ExactQuantities(A, b, C, xi=xi, Phi=Phi, Pi=Pi, gamma=g, rho_max=rho_max,
                           P_pi=P_pi, R_pi=R_pi, V=true_values(mdp, target), pseudo_inverse=singular)


def sample_estimates(sample: Sample, gamma: float):
    """Single-sample unbiased estimates ``(A_hat, b_hat, C_hat)``."""
    phi = np.asarray(sample.phi, dtype=float)
    dphi = phi - gamma * np.asarray(sample.phi_next, dtype=float)
    return (sample.rho * np.outer(phi, dphi), sample.rho * sample.reward * phi, np.outer(phi, phi))


def m_matrix(exact: ExactQuantities, M_mode: str) -> np.ndarray:
    if M_mode == "identity":
        return np.eye(exact.d)
    if M_mode == "covariance":
        if exact.nu < SING_TOL and not exact.pseudo_inverse:
            raise SingularC("covariance metric requested but C is singular")
        return exact.C
    raise ValueError(f"unknown M_mode {M_mode!r}; expected one of {MODES}")


def _m_inv_apply(exact: ExactQuantities, M_mode: str, v: np.ndarray) -> np.ndarray:
    if M_mode == "identity":
        return v.copy()
    if exact.nu < SING_TOL:
        return exact.C_inv @ v
    return np.linalg.solve(m_matrix(exact, M_mode), v)


def objective_j(theta, exact: ExactQuantities, M_mode: str) -> float:
    """``J(theta) = ||b - A theta||^2_{M^{-1}}``."""
    r = exact.b - exact.A @ np.asarray(theta, dtype=float)
    return float(r @ _m_inv_apply(exact, M_mode, r))


def neu(theta, exact: ExactQuantities) -> float:
    return objective_j(theta, exact, "identity")


def mspbe(theta, exact: ExactQuantities) -> float:
    return objective_j(theta, exact, "covariance")


def msbe(theta, mdp: FiniteMdp, target: Policy, xi, Phi) -> float:
    """Unprojected Bellman error ``sum_s xi(s) (T v(s) - v(s))^2``."""
    Phi = np.asarray(getattr(Phi, "matrix", Phi), dtype=float)
    v = Phi @ np.asarray(theta, dtype=float)
    P_pi, R_pi = mdp.induced(target)
    res = R_pi + mdp.gamma * P_pi @ v - v
    return float(np.asarray(xi) @ res**2)


def q_msbe(theta, mdp: FiniteMdp, Phi_sa: np.ndarray, xi_sa: np.ndarray) -> float:
    """Bellman-optimality error of ``Q = Phi_sa theta`` weighted by ``xi_sa[s, a]``."""
    q = Phi_sa @ np.asarray(theta, dtype=float)
    v = np.where(mdp.action_mask, q, -np.inf).max(axis=1)
    res = mdp.reward + mdp.gamma * mdp.transition @ v - q
    res = np.where(xi_sa > 0, res, 0.0)
    return float(np.sum(xi_sa * res**2))


def neu_half_gradient(theta, exact: ExactQuantities) -> np.ndarray:
    """Closed form of ``-1/2 grad NEU(theta) = A^T (b - A theta)``."""
    return exact.A.T @ (exact.b - exact.A @ np.asarray(theta, dtype=float))


def lagrangian(theta, y, exact: ExactQuantities, M_mode: str) -> float:
    """``L(theta, y) = <b - A theta, y> - 1/2 ||y||_M^2``."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    M = m_matrix(exact, M_mode)
    return float((exact.b - exact.A @ theta) @ y - 0.5 * y @ M @ y)


def y_star(theta, exact: ExactQuantities, M_mode: str) -> np.ndarray:
    """Unconstrained maximiser ``M^{-1}(b - A theta)`` of ``L(theta, .)``."""
    return _m_inv_apply(exact, M_mode, exact.b - exact.A @ np.asarray(theta, dtype=float))


def _ball_max_concave(g: np.ndarray, M: np.ndarray, radius: float) -> float:
    """``max_{||y|| <= radius} <g, y> - 1/2 y^T M y`` for positive semidefinite ``M``.

    Null directions of ``M`` are dropped; that is exact when ``g`` lies in the
    range of ``M``, which holds for every residual ``b - A theta``.
    """
    lam, Q = np.linalg.eigh(0.5 * (M + M.T))
    keep = lam > SING_TOL * max(1.0, lam[-1])
    lam, gt = lam[keep], (Q.T @ g)[keep]

    def value(mu):
        y = gt / (lam + mu)
        return float(gt @ y - 0.5 * np.sum(lam * y**2))

    interior = gt / lam
    if not math.isfinite(radius) or np.linalg.norm(interior) <= radius:
        return value(0.0)
    hi = np.linalg.norm(g) / radius
    mu = brentq(lambda m: np.linalg.norm(gt / (lam + m)) - radius, 0.0, hi,
                xtol=1e-12 * max(1.0, hi), rtol=4 * np.finfo(float).eps, maxiter=500)
    return value(mu)


def saddle_error(theta, y, exact: ExactQuantities, M_mode: str,
                 R_theta: float = math.inf, R_y: float = math.inf) -> float:
    """Saddle gap ``max_{||y'||<=R_y} L(theta, y') - min_{||theta'||<=R_theta} L(theta', y)``."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    M = m_matrix(exact, M_mode)
    upper = _ball_max_concave(exact.b - exact.A @ theta, M, R_y)
    aty = np.linalg.norm(exact.A.T @ y)
    if math.isinf(R_theta):
        lin = 0.0 if aty == 0.0 else -math.inf
    else:
        lin = -R_theta * aty
    lower = lin + float(exact.b @ y) - 0.5 * float(y @ M @ y)
    return upper - lower


def residual_xi_sq(x, exact: ExactQuantities) -> float:
    """Weighted square norm ``xi_max * ||x||^2`` of a ``d``-vector residual.

    The residual ``A theta - b`` lives in feature space, so a state-weighted
    norm only makes sense through the bound ``||x||_xi^2 <= xi_max ||x||^2``;
    using the bound itself is the strictest admissible choice.
    """
    x = np.asarray(x, dtype=float)
    return float(exact.xi_max * (x @ x))


def residual_gap_sides(theta_bar, y_bar, exact: ExactQuantities, M_mode: str,
                       R_theta: float, R_y: float) -> tuple[float, float]:
    """``(1/2 ||A theta - b||_xi^2, tau xi_max Err)``; the first must not exceed the second."""
    tau = 1.0 if M_mode == "identity" else exact.tau_C
    lhs = 0.5 * residual_xi_sq(exact.A @ theta_bar - exact.b, exact)
    err = saddle_error(theta_bar, y_bar, exact, M_mode, R_theta, R_y)
    return lhs, tau * exact.xi_max * err


def feasible_radii(exact: ExactQuantities, M_mode: str, theta0=None, margin: float = 1.1) -> tuple[float, float]:
    """Ball radii that contain the saddle point, ``theta0`` and every ``y*(theta)``.

    ``R_theta`` covers ``theta*`` and the start; ``R_y`` is chosen so the dual
    maximiser ``M^{-1}(b - A theta)`` stays interior for all feasible ``theta``.
    """
    try:
        r = np.linalg.norm(exact.theta_star)
    except SingularA:
        r = np.linalg.norm(exact.theta_min_norm)
    if theta0 is not None:
        r = max(r, float(np.linalg.norm(theta0)))
    R_theta = margin * max(r, 1e-12)
    minv = 1.0 if M_mode == "identity" else 1.0 / exact.nu_plus
    R_y = margin * minv * (np.linalg.norm(exact.b) + np.linalg.norm(exact.A, 2) * R_theta)
    return float(R_theta), float(R_y)


def lemma2_bounds(L: float, d: int, gamma: float, rho_max: float, R_max: float) -> tuple[float, float]:
    """Upper bounds ``((1+gamma) rho_max L^2 d, rho_max L R_max)`` on ``||A||_2`` and ``||b||_2``."""
    for v in (L, d, gamma, rho_max, R_max):
        if v < 0:
            raise ValueError("bound inputs must be nonnegative")
    return (1.0 + gamma) * rho_max * L * L * d, rho_max * L * R_max


@dataclass(frozen=True)
class BoundInputs:
    R: float
    D_theta: float
    D_y: float
    L: float
    d: int
    gamma: float
    rho_max: float
    R_max: float
    sigma1: float
    sigma2: float
    tau: float
    M_mode: str = "identity"

    def __post_init__(self):
        for name in ("R", "D_theta", "D_y", "L", "d", "gamma", "rho_max", "R_max", "sigma1", "sigma2", "tau"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.M_mode not in MODES:
            raise ValueError(f"unknown M_mode {self.M_mode!r}")
        if self.M_mode == "identity" and abs(self.tau - 1.0) > 1e-12:
            raise ValueError("tau must be 1 for the identity metric")

    @property
    def sigma(self) -> float:
        return math.hypot(self.sigma1, self.sigma2)


def _gradient_noise_sq(tt_phi, tt_dphi, rho, reward, weight, theta, y, gtd2: bool):
    """Exact (weighted) variances of the two stochastic gradient blocks."""
    coef = rho * (reward - tt_dphi @ theta)
    if gtd2:
        coef = coef - tt_phi @ y
    gy = tt_phi * coef[:, None]
    gth = tt_dphi * (rho * (tt_phi @ y))[:, None]
    out = []
    for g in (gy, gth):
        mean = weight @ g
        out.append(max(0.0, float(weight @ np.sum(g * g, axis=1) - mean @ mean)))
    return out


def estimate_sigmas(mdp: FiniteMdp, target: Policy, behavior: Policy, xi, Phi, M_mode: str,
                    R_theta: float, R_y: float, method: str = "pilot", n_grid: int = 64,
                    n_pilot: int = 10_000, safety: float = 1.5, seed: int = 0) -> tuple[float, float]:
    """Variance bounds ``(sigma1, sigma2)`` of the stochastic saddle gradients.

    The variances are quadratic in ``(theta, y)``, so their maximum over the
    balls sits on the boundary; ``n_grid`` points are drawn on the product of
    the two spheres. ``method="pilot"`` uses ``n_pilot`` i.i.d. samples and
    inflates by ``safety``; ``method="exact"`` enumerates the transition table.
    """
    Phi = np.asarray(getattr(Phi, "matrix", Phi), dtype=float)
    d = Phi.shape[1]
    gtd2 = M_mode == "covariance"
    rng = make_rng(seed, 0, 7)
    dirs = rng.standard_normal((n_grid, 2, d))
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    thetas, ys = R_theta * dirs[:, 0], R_y * dirs[:, 1]
    if method == "exact":
        tt = transition_table(mdp, target, behavior, xi)
        phi, nxt, rho, rew, w = Phi[tt.state], Phi[tt.next_state], tt.rho, tt.reward, tt.weight
        factor = 1.0
    elif method == "pilot":
        from .mdp import sample_iid

        st = sample_iid(mdp, behavior, xi, Phi, n_pilot, seed, target=target, run_id=0)
        phi, nxt, rho, rew = st.phi, st.phi_next, st.rho, st.reward
        w = np.full(n_pilot, 1.0 / n_pilot)
        factor = safety
    else:
        raise ValueError(f"unknown method {method!r}")
    dphi = phi - mdp.gamma * nxt
    s1 = s2 = 0.0
    for th, yy in zip(thetas, ys):
        v1, v2 = _gradient_noise_sq(phi, dphi, rho, rew, w, th, yy, gtd2)
        s1, s2 = max(s1, v1), max(s2, v2)
    return factor * math.sqrt(s1), factor * math.sqrt(s2)


def bound_inputs(exact: ExactQuantities, L: float, R_max: float, M_mode: str,
                 R_theta: float, R_y: float, sigma1: float, sigma2: float) -> BoundInputs:
    R = max(R_theta, R_y)
    tau = 1.0 if M_mode == "identity" else exact.tau_C
    return BoundInputs(R=R, D_theta=R_theta, D_y=R_y, L=L, d=exact.d, gamma=exact.gamma,
                       rho_max=exact.rho_max, R_max=R_max, sigma1=sigma1, sigma2=sigma2,
                       tau=tau, M_mode=M_mode)


def m_star_and_stepsize(bounds: BoundInputs, normA: float, normB: float, n: int, c: float = 1.0):
    """Return ``(M_*, alpha)`` with ``alpha = 2c / (M_* sqrt(5n))`` held constant over the run."""
    if n < 1 or c <= 0:
        raise ValueError("need n >= 1 and c > 0")
    R = bounds.R
    m_star = R * R * (2.0 * normA + bounds.tau) + R * (bounds.sigma + normB)
    if m_star <= 0:
        raise ZeroMstar("M_* vanished; the step size is undefined")
    return m_star, 2.0 * c / (m_star * math.sqrt(5.0 * n))


def prox_block_steps(bounds: BoundInputs, alpha: float) -> tuple[float, float]:
    """Euclidean steps ``(2 D_theta^2 alpha, 2 D_y^2 alpha)`` for the primal and dual blocks.

    The step ``alpha`` lives in the geometry whose distance-generating
    function weights the blocks by ``1 / (2 D^2)``; a prox step there moves
    each block by its own ``2 D^2 alpha`` multiple of the gradient.
    """
    return 2.0 * bounds.D_theta**2 * alpha, 2.0 * bounds.D_y**2 * alpha


def high_prob_bound(bounds: BoundInputs, n: int, delta: float) -> float:
    """High-probability bound on the saddle gap of the averaged iterate after ``n`` steps."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be at least 1")
    b = bounds
    inner = b.rho_max * b.L * (2.0 * (1.0 + b.gamma) * b.L * b.d + b.R_max / b.R) + b.tau + b.sigma / b.R
    return math.sqrt(5.0 / n) * (8.0 + 2.0 * math.log(2.0 / delta)) * b.R**2 * inner


def lmi_check(exact: ExactQuantities, mdp: Optional[FiniteMdp] = None, target: Optional[Policy] = None,
              Phi=None, tol: float = 1e-10) -> bool:
    """Is ``[[Phi'Xi Phi, Phi'Xi P Phi], [Phi'P'Xi Phi, Phi'Xi Phi]]`` positive semidefinite?"""
    Phi = exact.Phi if Phi is None else np.asarray(getattr(Phi, "matrix", Phi), dtype=float)
    P = exact.P_pi if target is None else mdp.induced(target)[0]
    XPhi = Phi * exact.xi[:, None]
    G = XPhi.T @ Phi
    H = XPhi.T @ P @ Phi
    block = np.block([[G, H], [H.T, G]])
    return bool(np.linalg.eigvalsh(0.5 * (block + block.T))[0] >= -tol)


def _xi_norm(v, xi) -> float:
    return float(np.sqrt(np.asarray(xi) @ np.asarray(v) ** 2))


def performance_bounds(exact: ExactQuantities, err_value: float, on_policy: bool,
                       bounds: BoundInputs) -> float:
    """Bound on ``||V - Phi theta_bar||_xi`` given a saddle gap ``err_value``."""
    proj_err = _xi_norm(exact.V - exact.Pi @ exact.V, exact.xi)
    g = exact.gamma
    if on_policy:
        if exact.nu < SING_TOL:
            raise SingularC("C is singular")
        stat = bounds.L / exact.nu * math.sqrt(max(0.0, 2.0 * bounds.d * bounds.tau * exact.xi_max * err_value))
        return (proj_err + stat) / (1.0 - g)
    if not lmi_check(exact):
        raise LmiViolated("sampling distribution violates the linear matrix inequality")
    if np.linalg.svd(exact.A, compute_uv=False)[-1] < SING_TOL:
        raise SingularA("A is singular")
    AMA = exact.A.T @ _m_inv_apply(exact, bounds.M_mode, exact.A)
    smin = float(np.linalg.svd(AMA, compute_uv=False)[-1])
    bias = (1.0 + g * math.sqrt(exact.rho_max)) / (1.0 - g) * proj_err
    return bias + math.sqrt(max(0.0, 2.0 * exact.tau_C * bounds.tau * exact.xi_max * err_value / smin))


def lambda_horizon(lam: float, tol: float = 1e-10) -> int:
    if lam == 0.0:
        return 1
    return int(math.ceil(math.log(tol) / math.log(lam))) + 1


def forward_lambda_expectation(mdp: FiniteMdp, target: Policy, behavior: Policy, xi, Phi,
                               theta, lam: float, horizon: Optional[int] = None) -> np.ndarray:
    """``Phi^T Xi (T^lambda v - v)`` through the truncated series ``(1-l) sum_i l^i T^{i+1}``.

    By the importance-weighting identity this equals ``E_b[rho phi delta^lambda]``.
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError("lambda must lie in [0, 1)")
    Phi = np.asarray(getattr(Phi, "matrix", Phi), dtype=float)
    xi = np.asarray(xi, dtype=float)
    transition_table(mdp, target, behavior, xi)  # coverage check
    h = lambda_horizon(lam) if horizon is None else int(horizon)
    P_pi, R_pi = mdp.induced(target)
    v = Phi @ np.asarray(theta, dtype=float)
    w = v
    acc = np.zeros_like(v)
    for i in range(h):
        w = R_pi + mdp.gamma * P_pi @ w
        acc += (1.0 - lam) * lam**i * w
    # renormalise the truncated weights so that T^lambda v = v holds at fixed points
    total = 1.0 - lam**h
    return Phi.T @ (xi * (acc / total - v))

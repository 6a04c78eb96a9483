"""Finite MDPs, policies, sample streams and exact linear-algebra solves.

Everything in here works on dense numpy tensors. A finite MDP stores the
transition kernel as ``P[s, a, s']`` and the expected reward as ``R[s, a]``.
States and actions are integer indices.

Random streams are derived from ``numpy.random.SeedSequence`` so that a
``(seed, run_id)`` pair always maps to the same, statistically independent
PCG64 substream.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import BehaviorZero, InvalidDistribution, NotConverged

__all__ = [
    "FiniteMdp",
    "Policy",
    "Sample",
    "SampleStream",
    "make_rng",
    "importance_weight",
    "biased_weight",
    "sample_iid",
    "sample_trajectory",
    "stationary_distribution",
    "true_values",
    "bellman_operator",
    "save_mdp",
    "load_mdp",
]

ROW_TOL = 1e-12

# stream tags keep the bias-noise draws off the main sampling stream
_MAIN_STREAM = 0
_BIAS_STREAM = 1


def make_rng(seed: int, run_id: int = 0, stream: int = _MAIN_STREAM) -> np.random.Generator:
    """PCG64 generator for the substream ``(seed, run_id, stream)``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(run_id), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class FiniteMdp:
    """Finite MDP ``(S, A, P, R, gamma)``.

    ``action_mask[s, a]`` marks the actions available in ``s``. Unavailable
    actions still carry a valid transition row (a self-loop by convention)
    so the kernel is a proper stochastic tensor, but policies must put zero
    mass on them.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    action_mask: Optional[np.ndarray] = None
    reward_bound: Optional[float] = None

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        R = np.array(self.reward, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {P.shape}")
        if R.shape != P.shape[:2]:
            raise ValueError(f"reward must have shape {P.shape[:2]}, got {R.shape}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > ROW_TOL:
            raise InvalidDistribution("every transition row must be a probability vector")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        mask = (np.ones(R.shape, dtype=bool) if self.action_mask is None
                else np.array(self.action_mask, dtype=bool))
        if mask.shape != R.shape or not mask.any(axis=1).all():
            raise ValueError("action_mask must have shape (S, A) with an action in every state")
        rmax = float(np.max(np.abs(R[mask]))) if self.reward_bound is None else float(self.reward_bound)
        if np.max(np.abs(R[mask]), initial=0.0) > rmax + 1e-12:
            raise ValueError("reward exceeds the declared bound")
        for arr in (P, R, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "action_mask", mask)
        object.__setattr__(self, "reward_bound", rmax)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def r_max(self) -> float:
        return self.reward_bound

    def induced(self, policy: "Policy") -> tuple[np.ndarray, np.ndarray]:
        """Return ``(P_pi, R_pi)`` of the Markov reward process under ``policy``."""
        pi = policy.probs
        P_pi = np.einsum("sa,sat->st", pi, self.transition)
        R_pi = np.sum(pi * self.reward, axis=1)
        return P_pi, R_pi

    def to_dict(self) -> dict:
        out = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
            "gamma": self.gamma,
        }
        if not self.action_mask.all():
            out["action_mask"] = self.action_mask.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteMdp":
        mdp = cls(
            transition=np.asarray(data["transition"], dtype=float),
            reward=np.asarray(data["reward"], dtype=float),
            gamma=float(data["gamma"]),
            action_mask=None if "action_mask" not in data else np.asarray(data["action_mask"], dtype=bool),
        )
        if mdp.n_states != data.get("n_states", mdp.n_states) or mdp.n_actions != data.get("n_actions", mdp.n_actions):
            raise ValueError("declared sizes do not match the arrays")
        return mdp


def save_mdp(mdp: FiniteMdp, path) -> None:
    Path(path).write_text(json.dumps(mdp.to_dict()))


def load_mdp(path) -> FiniteMdp:
    return FiniteMdp.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Policy:
    """Stationary stochastic policy ``probs[s, a] = pi(a | s)``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2:
            raise ValueError("policy table must be 2-D (S, A)")
        if np.any(p < 0) or np.max(np.abs(p.sum(axis=1) - 1.0)) > ROW_TOL:
            raise InvalidDistribution("policy rows must be probability vectors")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int, mask: Optional[np.ndarray] = None) -> "Policy":
        m = np.ones((n_states, n_actions)) if mask is None else np.asarray(mask, dtype=float)
        return cls(m / m.sum(axis=1, keepdims=True))

    @classmethod
    def deterministic(cls, actions: Sequence[int], n_actions: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        p = np.zeros((actions.size, n_actions))
        p[np.arange(actions.size), actions] = 1.0
        return cls(p)

    def __call__(self, s: int, a: int) -> float:
        return float(self.probs[s, a])


def importance_weight(target: Policy, behavior: Policy, s: int, a: int) -> float:
    """``pi(a|s) / pi_b(a|s)``; raises :class:`BehaviorZero` if ``pi_b(a|s) = 0``."""
    pb = behavior.probs[s, a]
    if pb <= 0.0:
        raise BehaviorZero(f"behavior policy has pi_b({a}|{s}) = 0")
    return float(target.probs[s, a] / pb)


def weight_table(target: Policy, behavior: Policy) -> np.ndarray:
    """Importance weights for every pair; zero where the behavior never acts."""
    pb = behavior.probs
    out = np.zeros_like(pb)
    np.divide(target.probs, pb, out=out, where=pb > 0)
    return out


def biased_weight(rho, epsilon: float, rng: Optional[np.random.Generator] = None, noise: bool = True):
    """Perturbed weight ``max(0, rho + eps + U[-eps/2, eps/2])``.

    The mean offset is exactly ``epsilon`` as long as the clamp is inactive,
    i.e. whenever ``rho >= 0``. Works elementwise on arrays.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    rho = np.asarray(rho, dtype=float)
    if epsilon == 0.0:
        return rho.copy() if rho.ndim else float(rho)
    jitter = 0.0
    if noise:
        if rng is None:
            raise ValueError("an rng is required when noise is enabled")
        jitter = rng.uniform(-0.5 * epsilon, 0.5 * epsilon, size=rho.shape)
    out = np.maximum(0.0, rho + epsilon + jitter)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Sample:
    """One logged transition ``(phi, r, phi', rho)``."""

    phi: np.ndarray
    phi_next: np.ndarray
    reward: float
    rho: float
    state: Optional[int] = None
    action: Optional[int] = None

    def delta_phi(self, gamma: float) -> np.ndarray:
        return self.phi - gamma * self.phi_next


@dataclass
class SampleStream:
    """Columnar storage of a sample sequence; iterating yields :class:`Sample`."""

    phi: np.ndarray
    phi_next: np.ndarray
    reward: np.ndarray
    rho: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    mode: str
    seed: int
    run_id: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.reward.shape[0]

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.phi[i], self.phi_next[i], float(self.reward[i]), float(self.rho[i]),
                      int(self.states[i]), int(self.actions[i]))

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    def to_csv(self, path) -> None:
        d = self.phi.shape[1]
        header = ([f"phi[{j}]" for j in range(d)] + ["r"]
                  + [f"phi_next[{j}]" for j in range(d)] + ["rho"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(len(self)):
                row = list(self.phi[i]) + [self.reward[i]] + list(self.phi_next[i]) + [self.rho[i]]
                w.writerow([repr(float(v)) for v in row])


def _feature_matrix(features) -> np.ndarray:
    return np.asarray(getattr(features, "matrix", features), dtype=float)


def _draw_rows(cum: np.ndarray, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw: for sample ``i`` pick the first index ``k`` with ``cum[rows[i], k] > u[i]``."""
    width = cum.shape[-1]
    flat = cum.reshape(-1, width)
    idx = np.empty(u.shape[0], dtype=np.int64)
    block = max(1, 4_000_000 // width)
    for lo in range(0, u.shape[0], block):
        hi = lo + block
        idx[lo:hi] = np.sum(flat[rows[lo:hi]] <= u[lo:hi, None], axis=1)
    return np.minimum(idx, width - 1)


def _check_distribution(xi: np.ndarray, n: int) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (n,) or np.any(xi < 0) or abs(xi.sum() - 1.0) > 1e-9:
        raise InvalidDistribution("xi must be a probability vector over states")
    return xi


def _finish_stream(mdp, target, behavior, Phi, s, a, s2, mode, seed, run_id, epsilon, bias_noise):
    if target is None:
        target = behavior
    if np.any(behavior.probs[s, a] <= 0):
        raise BehaviorZero("sampled an action outside the behavior support")
    rho = weight_table(target, behavior)[s, a]
    if epsilon:
        rho = biased_weight(rho, epsilon, make_rng(seed, run_id, _BIAS_STREAM), noise=bias_noise)
    return SampleStream(
        phi=Phi[s], phi_next=Phi[s2], reward=mdp.reward[s, a], rho=np.asarray(rho, dtype=float),
        states=s, actions=a, next_states=s2, mode=mode, seed=int(seed), run_id=int(run_id),
        meta={"epsilon": float(epsilon)},
    )


def sample_iid(mdp: FiniteMdp, behavior: Policy, xi, features, n: int, seed: int,
               target: Optional[Policy] = None, run_id: int = 0,
               epsilon: float = 0.0, bias_noise: bool = True) -> SampleStream:
    """Draw ``s ~ xi``, ``a ~ pi_b(.|s)``, ``s' ~ P(.|s, a)`` independently ``n`` times."""
    if n < 1:
        raise ValueError("n must be at least 1")
    xi = _check_distribution(xi, mdp.n_states)
    Phi = _feature_matrix(features)
    rng = make_rng(seed, run_id)
    s = np.minimum(np.searchsorted(np.cumsum(xi), rng.random(n), side="right"), xi.size - 1)
    a = _draw_rows(np.cumsum(behavior.probs, axis=1), s, rng.random(n))
    s2 = _draw_rows(np.cumsum(mdp.transition, axis=2), s * mdp.n_actions + a, rng.random(n))
    return _finish_stream(mdp, target, behavior, Phi, s, a, s2, "iid", seed, run_id, epsilon, bias_noise)


def sample_trajectory(mdp: FiniteMdp, behavior: Policy, features, start_state: int, n: int, seed: int,
                      target: Optional[Policy] = None, run_id: int = 0,
                      epsilon: float = 0.0, bias_noise: bool = True) -> SampleStream:
    """Follow ``pi_b`` from ``start_state`` for ``n`` transitions (``s_{i+1} = s'_i``)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    Phi = _feature_matrix(features)
    rng = make_rng(seed, run_id)
    cum_pi = np.cumsum(behavior.probs, axis=1)
    cum_P = np.cumsum(mdp.transition, axis=2)
    u_a = rng.random(n)
    u_s = rng.random(n)
    s = np.empty(n, dtype=np.int64)
    a = np.empty(n, dtype=np.int64)
    s2 = np.empty(n, dtype=np.int64)
    last_a, last_s = mdp.n_actions - 1, mdp.n_states - 1
    cur = int(start_state)
    for i in range(n):
        act = min(int(np.searchsorted(cum_pi[cur], u_a[i], side="right")), last_a)
        nxt = min(int(np.searchsorted(cum_P[cur, act], u_s[i], side="right")), last_s)
        s[i], a[i], s2[i] = cur, act, nxt
        cur = nxt
    return _finish_stream(mdp, target, behavior, Phi, s, a, s2, "trajectory", seed, run_id, epsilon, bias_noise)


def stationary_distribution(mdp: FiniteMdp, policy: Policy, tol: float = 1e-12,
                            max_iter: int = 1_000_000) -> np.ndarray:
    """Stationary distribution of ``P_pi`` by power iteration from the uniform vector.

    Iterates the lazy chain ``(I + P_pi) / 2``, which has the same stationary
    law but is aperiodic, so periodic chains (e.g. a random walk) converge.
    """
    P_pi, _ = mdp.induced(policy)
    P_pi = 0.5 * (P_pi + np.eye(mdp.n_states))
    xi = np.full(mdp.n_states, 1.0 / mdp.n_states)
    for _ in range(max_iter):
        nxt = xi @ P_pi
        nxt /= nxt.sum()
        if np.abs(nxt - xi).sum() <= tol:
            return nxt
        xi = nxt
    raise NotConverged(f"power iteration did not reach {tol} in {max_iter} iterations")


def true_values(mdp: FiniteMdp, policy: Policy) -> np.ndarray:
    """Solve ``(I - gamma P_pi) V = R_pi``."""
    P_pi, R_pi = mdp.induced(policy)
    return np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * P_pi, R_pi)


def bellman_operator(mdp: FiniteMdp, policy: Policy, v: np.ndarray) -> np.ndarray:
    P_pi, R_pi = mdp.induced(policy)
    return R_pi + mdp.gamma * P_pi @ v


def greedy_policy(mdp: FiniteMdp, tol: float = 1e-12, max_iter: int = 100_000) -> Policy:
    """Optimal deterministic policy by value iteration; ties go to the lowest action index."""
    v = np.zeros(mdp.n_states)
    neg = np.where(mdp.action_mask, 0.0, -np.inf)
    for _ in range(max_iter):
        q = mdp.reward + mdp.gamma * mdp.transition @ v + neg
        nv = q.max(axis=1)
        if np.max(np.abs(nv - v)) <= tol:
            v = nv
            break
        v = nv
    q = mdp.reward + mdp.gamma * mdp.transition @ v + neg
    best = q.max(axis=1, keepdims=True)
    actions = np.argmax(q >= best - 1e-9, axis=1)
    return Policy.deterministic(actions, mdp.n_actions)

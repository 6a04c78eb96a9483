"""The 50-state chain walk with rewards in states 10 and 41."""
from __future__ import annotations

import numpy as np

from ..features import FeatureMap, bebf_expand
from ..mdp import FiniteMdp, greedy_policy, stationary_distribution

LEFT, RIGHT = 0, 1


def chain_mdp(n_states: int = 50, success: float = 0.9, rewarded=(10, 41), gamma: float = 0.9) -> FiniteMdp:
    """Chain with 1-based reward states; failed moves go the opposite way, walls clamp."""
    P = np.zeros((n_states, 2, n_states))
    for i in range(n_states):
        left, right = max(i - 1, 0), min(i + 1, n_states - 1)
        P[i, LEFT, left] += success
        P[i, LEFT, right] += 1.0 - success
        P[i, RIGHT, right] += success
        P[i, RIGHT, left] += 1.0 - success
    R = np.zeros((n_states, 2))
    for s in rewarded:
        R[s - 1, :] = 1.0
    return FiniteMdp(P, R, gamma)


def build_chain(n_states: int = 50, bebf_count: int = 20, success: float = 0.9,
                rewarded=(10, 41), gamma: float = 0.9):
    """Chain domain evaluated on-policy under its optimal policy with a BEBF basis.

    The basis starts from the reward vector (scaled to unit ``xi``-norm) and
    grows by Bellman-error columns until ``bebf_count`` columns exist or the
    residual vanishes, whichever comes first.
    """
    from . import Domain

    if not 1 <= bebf_count <= n_states:
        raise ValueError(f"bebf_count must lie in [1, {n_states}]")
    mdp = chain_mdp(n_states, success, rewarded, gamma)
    policy = greedy_policy(mdp)
    xi = stationary_distribution(mdp, policy)
    r = mdp.induced(policy)[1]
    base = (r / np.sqrt(xi @ r**2))[:, None]
    Phi = bebf_expand(mdp, policy, base, bebf_count - 1, xi=xi, on_degenerate="stop")
    fmap = FeatureMap(Phi, float(np.max(np.abs(Phi))), f"bebf{Phi.shape[1]}")
    return Domain(f"chain{n_states}", mdp, fmap, policy, policy, xi, np.zeros(Phi.shape[1]),
                  info={"bebf_requested": bebf_count, "bebf_built": Phi.shape[1]})


def build_chain50(bebf_count: int = 20):
    return build_chain(50, bebf_count)

"""Baird's seven-state star, the classic off-policy divergence example."""
from __future__ import annotations

import numpy as np

from ..features import FeatureMap
from ..mdp import FiniteMdp, Policy, stationary_distribution

DASHED, SOLID = 0, 1
N_STATES = 7
HUB = 6


def baird_features() -> np.ndarray:
    """``phi(s_i) = 2 e_i + e_8`` for the six outer states, ``e_7 + 2 e_8`` for the hub."""
    Phi = np.zeros((N_STATES, 8))
    for i in range(6):
        Phi[i, i] = 2.0
        Phi[i, 7] = 1.0
    Phi[HUB, 6] = 1.0
    Phi[HUB, 7] = 2.0
    return Phi


def build_baird(gamma: float = 0.99):
    from . import Domain

    P = np.zeros((N_STATES, 2, N_STATES))
    P[:, DASHED, :6] = 1.0 / 6.0
    P[:, SOLID, HUB] = 1.0
    mdp = FiniteMdp(P, np.zeros((N_STATES, 2)), gamma)
    behavior = Policy(np.tile([6.0 / 7.0, 1.0 / 7.0], (N_STATES, 1)))
    target = Policy(np.tile([0.0, 1.0], (N_STATES, 1)))
    theta0 = np.array([1, 1, 1, 1, 1, 1, 10, 1], dtype=float)
    return Domain("baird", mdp, FeatureMap(baird_features(), 2.0, "baird"), target, behavior,
                  stationary_distribution(mdp, behavior), theta0)

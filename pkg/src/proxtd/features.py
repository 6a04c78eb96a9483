"""Linear feature maps over finite state spaces and BEBF basis growth."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateResidual, OutOfRange
from .mdp import FiniteMdp, Policy, stationary_distribution

__all__ = [
    "FeatureMap",
    "tabular",
    "constant",
    "from_matrix",
    "featurize",
    "feature_matrix",
    "bebf_expand",
    "save_feature_csv",
]


@dataclass(frozen=True)
class FeatureMap:
    """A feature map on ``n_states`` states, stored as its ``|S| x d`` matrix.

    ``bound`` is the declared ``L`` with ``max |phi_j(s)| <= L``; it is checked
    against every row when the map is built.
    """

    matrix: np.ndarray
    bound: float
    name: str = "custom"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or not np.all(np.isfinite(m)):
            raise ValueError("feature matrix must be a finite 2-D array")
        if np.max(np.abs(m), initial=0.0) > self.bound + 1e-12:
            raise ValueError(f"features exceed the declared bound L={self.bound}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "bound", float(self.bound))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, s: int) -> np.ndarray:
        return featurize(self, s)


def tabular(n_states: int) -> FeatureMap:
    return FeatureMap(np.eye(n_states), 1.0, "tabular")


def constant(n_states: int, dim: int = 1) -> FeatureMap:
    return FeatureMap(np.full((n_states, dim), 1.0 / np.sqrt(dim)), 1.0 / np.sqrt(dim), "constant")


def from_matrix(matrix, bound: Optional[float] = None, name: str = "custom") -> FeatureMap:
    matrix = np.asarray(matrix, dtype=float)
    if bound is None:
        bound = float(np.max(np.abs(matrix), initial=0.0))
    return FeatureMap(matrix, bound, name)


def featurize(fmap: FeatureMap, s: int) -> np.ndarray:
    if not 0 <= int(s) < fmap.n_states:
        raise OutOfRange(f"state {s} outside [0, {fmap.n_states})")
    return fmap.matrix[int(s)]


def feature_matrix(fmap: FeatureMap, mdp: FiniteMdp) -> np.ndarray:
    if fmap.n_states != mdp.n_states:
        raise ValueError(f"map covers {fmap.n_states} states, MDP has {mdp.n_states}")
    return fmap.matrix


def save_feature_csv(Phi: np.ndarray, path) -> None:
    Phi = np.asarray(Phi)
    lines = [",".join(f"phi[{j}]" for j in range(Phi.shape[1]))]
    lines += [",".join(repr(float(v)) for v in row) for row in Phi]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def bebf_expand(mdp: FiniteMdp, policy: Policy, current, k: int,
                xi: Optional[np.ndarray] = None, tol: float = 1e-10,
                on_degenerate: str = "raise") -> np.ndarray:
    """Append ``k`` Bellman-error basis functions to ``current``.

    At each round the value estimate is the projected fixed point of the
    current basis (``Phi theta`` with ``A theta = b`` under ``xi``), the new
    column is its Bellman residual ``T v - v``, re-orthogonalised against
    the existing columns in the ``xi`` inner product and scaled to unit
    ``xi``-norm.

    With ``on_degenerate="stop"`` the basis is returned as soon as the
    residual falls below ``tol``; otherwise :class:`DegenerateResidual` is
    raised.
    """
    Phi = np.array(getattr(current, "matrix", current), dtype=float)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    if xi is None:
        xi = stationary_distribution(mdp, policy)
    xi = np.asarray(xi, dtype=float)
    P_pi, R_pi = mdp.induced(policy)
    gamma = mdp.gamma
    for _ in range(k):
        XPhi = Phi * xi[:, None]
        A = XPhi.T @ (Phi - gamma * P_pi @ Phi)
        b = XPhi.T @ R_pi
        v = Phi @ np.linalg.solve(A, b)
        res = R_pi + gamma * P_pi @ v - v
        # two Gram-Schmidt passes in the xi inner product
        for _ in range(2):
            G = XPhi.T @ Phi
            res = res - Phi @ np.linalg.solve(G, XPhi.T @ res)
        norm = float(np.sqrt(xi @ res**2))
        if norm < tol:
            if on_degenerate == "stop":
                break
            raise DegenerateResidual(f"Bellman residual norm {norm:.3e} below {tol}")
        Phi = np.column_stack([Phi, res / norm])
    return Phi

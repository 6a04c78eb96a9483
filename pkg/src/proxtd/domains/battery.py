"""Energy-arbitrage battery MDP on a discrete charge/capacity/price grid.

States are triples ``(x, s, theta)``: state of charge, remaining capacity and
price level. Quantities on the 0.1 grid are stored internally as integer
counts of ``dx`` so that grid arithmetic is exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.stats import norm

from ..errors import ActionOutOfBounds, GridInfeasible
from ..features import FeatureMap
from ..mdp import FiniteMdp, Policy, stationary_distribution

BatteryState = Tuple[float, float, float]


@dataclass(frozen=True)
class BatteryConfig:
    """Constants of the battery domain.

    ``capacity_rounding`` selects how the post-degradation capacity is put
    back on the grid: ``"stochastic"`` drops one grid step with probability
    ``d / dx`` (unbiased, so capacity decays at the rate ``d`` prescribes),
    ``"down"`` always rounds down. A battery whose capacity reaches zero is
    replaced by a fresh, empty one of capacity ``s0``.
    """

    prices: tuple = (1.0, 3.25, 5.5, 7.75, 10.0)
    price_low: float = 0.0
    price_high: float = 10.0
    sigma_p: float = 1.5
    sell_ratio: float = 0.9
    dx: float = 0.1
    s0: float = 1.0
    eps_d: float = 0.001
    kappa: float = 2.0
    c_d: float = 10.0
    gamma: float = 0.95
    buy_below: float = 3.25
    sell_above: float = 7.75
    capacity_rounding: str = "stochastic"

    def __post_init__(self):
        object.__setattr__(self, "prices", tuple(float(p) for p in self.prices))
        if len(self.prices) < 2 or self.n_levels < 2:
            raise ValueError("battery grids need at least two levels")
        if not all(self.price_low <= p <= self.price_high for p in self.prices):
            raise ValueError("price levels must lie inside [price_low, price_high]")
        if abs(self.s0 / self.dx - self.n_levels) > 1e-9:
            raise ValueError("s0 must be a multiple of dx")
        if self.capacity_rounding not in ("stochastic", "down"):
            raise ValueError("capacity_rounding must be 'stochastic' or 'down'")

    @property
    def n_levels(self) -> int:
        return int(round(self.s0 / self.dx))

    def buy_price(self, theta: float) -> float:
        return float(theta)

    def sell_price(self, theta: float) -> float:
        return self.sell_ratio * float(theta)


def degradation(x: float, u: float, s: float, cfg: BatteryConfig) -> float:
    """Capacity lost by moving the charge from ``x`` to ``x + u``; zero when idle."""
    if u == 0:
        return 0.0
    y = x + u
    return cfg.eps_d * (abs(u) + cfg.kappa * (max(y - 0.8 * s, 0.0) + max(0.2 * s - y, 0.0)))


def reward(x: float, u: float, s: float, theta: float, cfg: BatteryConfig) -> float:
    price = cfg.buy_price(theta) if u >= 0 else cfg.sell_price(theta)
    return -u * price - cfg.c_d * degradation(x, u, s, cfg)


def _reflect(p: float, lo: float, hi: float) -> float:
    width = hi - lo
    y = (p - lo) % (2 * width)
    return lo + (y if y <= width else 2 * width - y)


def _nearest_level(p: float, levels) -> float:
    levels = np.asarray(levels)
    return float(levels[int(np.argmin(np.abs(levels - p)))])


def price_step(theta: float, z: float, cfg: BatteryConfig) -> float:
    """Next price level from a standard-normal draw ``z``."""
    return _nearest_level(_reflect(theta + cfg.sigma_p * z, cfg.price_low, cfg.price_high), cfg.prices)


def price_transition_matrix(cfg: BatteryConfig) -> np.ndarray:
    """Exact law of :func:`price_step`, integrating the folded Gaussian over each level's cell."""
    levels = np.asarray(cfg.prices)
    mids = (levels[1:] + levels[:-1]) / 2
    edges = np.concatenate([[cfg.price_low], mids, [cfg.price_high]])
    lo, width = cfg.price_low, cfg.price_high - cfg.price_low
    n_img = int(np.ceil(10 * cfg.sigma_p / width)) + 2
    P = np.zeros((len(levels), len(levels)))
    for i, th in enumerate(levels):
        for j in range(len(levels)):
            a, b = edges[j] - lo, edges[j + 1] - lo
            for k in range(-n_img, n_img + 1):
                base = 2 * width * k + lo - th
                # direct image [a, b] and mirrored image [2w - b, 2w - a]
                P[i, j] += norm.cdf((base + b) / cfg.sigma_p) - norm.cdf((base + a) / cfg.sigma_p)
                P[i, j] += (norm.cdf((base + 2 * width - a) / cfg.sigma_p)
                            - norm.cdf((base + 2 * width - b) / cfg.sigma_p))
    return P / P.sum(axis=1, keepdims=True)


def battery_transition(state: BatteryState, u: float, price_draw: float, round_draw: float = 0.0,
                       cfg: Optional[BatteryConfig] = None) -> BatteryState:
    """Apply charge ``u`` to ``(x, s, theta)``.

    ``price_draw`` is a standard-normal innovation for the price and
    ``round_draw`` a uniform ``[0, 1)`` draw used by stochastic capacity
    rounding (a drop happens when ``round_draw < d / dx``).
    """
    cfg = cfg or BatteryConfig()
    x, s, theta = (float(v) for v in state)
    kx, ks, ku = (int(round(v / cfg.dx)) for v in (x, s, u))
    if not (abs(kx * cfg.dx - x) < 1e-9 and abs(ks * cfg.dx - s) < 1e-9 and abs(ku * cfg.dx - u) < 1e-9):
        raise ActionOutOfBounds(f"state {state} or action {u} is off the {cfg.dx} grid")
    if ks < 1 or not 0 <= kx <= ks:
        raise GridInfeasible(f"state {state} violates 0 <= x <= s, s > 0")
    if not -kx <= ku <= ks - kx:
        raise ActionOutOfBounds(f"action {u} outside [{-x}, {s - x}]")
    ks_next = _capacity_step(kx, ku, ks, round_draw, cfg)
    theta_next = price_step(theta, price_draw, cfg)
    if ks_next == 0:
        return (0.0, cfg.s0, theta_next)
    kx_next = min(kx + ku, ks_next)
    return (round(kx_next * cfg.dx, 10), round(ks_next * cfg.dx, 10), theta_next)


def _capacity_step(kx: int, ku: int, ks: int, round_draw: float, cfg: BatteryConfig) -> int:
    d = degradation(kx * cfg.dx, ku * cfg.dx, ks * cfg.dx, cfg)
    if d == 0:
        return ks
    if cfg.capacity_rounding == "down":
        return int(np.floor((ks * cfg.dx - d) / cfg.dx + 1e-12))
    return ks - 1 if round_draw < d / cfg.dx else ks


def _capacity_law(kx: int, ku: int, ks: int, cfg: BatteryConfig):
    """List of ``(next capacity count, probability)`` pairs."""
    d = degradation(kx * cfg.dx, ku * cfg.dx, ks * cfg.dx, cfg)
    if d == 0:
        return [(ks, 1.0)]
    if cfg.capacity_rounding == "down":
        return [(_capacity_step(kx, ku, ks, 0.0, cfg), 1.0)]
    p = d / cfg.dx
    return [(ks - 1, p), (ks, 1.0 - p)]


@dataclass(frozen=True)
class BatteryGrid:
    """Enumeration of the discrete state and action grids."""

    cfg: BatteryConfig
    states: tuple = field(init=False)
    index: dict = field(init=False)

    def __post_init__(self):
        n = self.cfg.n_levels
        states = [(kx, ks, q) for q in range(len(self.cfg.prices))
                  for ks in range(1, n + 1) for kx in range(ks + 1)]
        object.__setattr__(self, "states", tuple(states))
        object.__setattr__(self, "index", {st: i for i, st in enumerate(states)})

    @property
    def n_actions(self) -> int:
        return 2 * self.cfg.n_levels + 1

    def action_value(self, a: int) -> float:
        return (a - self.cfg.n_levels) * self.cfg.dx

    def action_index(self, u: float) -> int:
        return int(round(u / self.cfg.dx)) + self.cfg.n_levels

    def decode(self, i: int) -> BatteryState:
        kx, ks, q = self.states[i]
        return (round(kx * self.cfg.dx, 10), round(ks * self.cfg.dx, 10), self.cfg.prices[q])

    def encode(self, state: BatteryState) -> int:
        x, s, theta = state
        q = self.cfg.prices.index(float(theta))
        return self.index[(int(round(x / self.cfg.dx)), int(round(s / self.cfg.dx)), q)]


def battery_mdp(cfg: BatteryConfig) -> Tuple[FiniteMdp, BatteryGrid]:
    grid = BatteryGrid(cfg)
    n = cfg.n_levels
    S, nA = len(grid.states), grid.n_actions
    Pp = price_transition_matrix(cfg)
    P = np.zeros((S, nA, S))
    R = np.zeros((S, nA))
    mask = np.zeros((S, nA), dtype=bool)
    for i, (kx, ks, q) in enumerate(grid.states):
        theta = cfg.prices[q]
        for a in range(nA):
            ku = a - n
            if not -kx <= ku <= ks - kx:
                P[i, a, i] = 1.0  # placeholder dynamics for masked actions
                continue
            mask[i, a] = True
            R[i, a] = reward(kx * cfg.dx, ku * cfg.dx, ks * cfg.dx, theta, cfg)
            for ks_next, pc in _capacity_law(kx, ku, ks, cfg):
                nxt = (0, n) if ks_next == 0 else (min(kx + ku, ks_next), ks_next)
                for q2, pq in enumerate(Pp[q]):
                    P[i, a, grid.index[(nxt[0], nxt[1], q2)]] += pc * pq
    r_bound = n * cfg.dx * max(cfg.prices) + cfg.c_d * degradation(0.0, cfg.s0, cfg.s0, cfg)
    mdp = FiniteMdp(P, R, cfg.gamma, action_mask=mask, reward_bound=max(r_bound, float(np.abs(R).max())))
    return mdp, grid


def _prune_columns(F: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Keep columns (in order) that are nonzero and raise the rank."""
    keep, basis = [], np.zeros((F.shape[0], 0))
    for j in range(F.shape[1]):
        col = F[:, j]
        if not np.any(np.abs(col) > tol):
            continue
        resid = col - basis @ (basis.T @ col) if basis.shape[1] else col
        if np.linalg.norm(resid) > tol * max(1.0, np.linalg.norm(col)):
            keep.append(j)
            basis = np.column_stack([basis, resid / np.linalg.norm(resid)])
    return np.array(keep, dtype=int)


def hinge_features(x: float, s: float, q: int, cfg: BatteryConfig) -> np.ndarray:
    """The full (unpruned) hinge feature vector for charge ``x``, capacity ``s``, price index ``q``."""
    w = np.round(np.arange(cfg.n_levels + 1) * cfg.dx, 10)
    block = np.concatenate([np.maximum(x - w, 0), np.maximum(s - w, 0), np.maximum(s + x - w, 0)])
    out = np.zeros(len(cfg.prices) * block.size)
    out[q * block.size:(q + 1) * block.size] = block
    return out


def threshold_policy(grid: BatteryGrid, mdp: FiniteMdp) -> Policy:
    """Charge to full at or below ``buy_below``, sell everything at or above ``sell_above``, else hold."""
    cfg = grid.cfg
    probs = np.zeros((mdp.n_states, mdp.n_actions))
    for i, (kx, ks, q) in enumerate(grid.states):
        price = cfg.prices[q]
        ku = ks - kx if price <= cfg.buy_below else (-kx if price >= cfg.sell_above else 0)
        probs[i, ku + cfg.n_levels] = 1.0
    return Policy(probs)


def build_battery(cfg: Optional[BatteryConfig] = None):
    """Battery domain with pruned hinge features, a threshold target and uniform behavior.

    ``features_sa`` holds state-action features for control: the hinge
    features of the post-decision state ``(x + u, s, theta)`` followed by
    per-price charge and discharge magnitudes. Masked actions get zero rows.
    """
    from . import Domain

    cfg = cfg or BatteryConfig()
    mdp, grid = battery_mdp(cfg)
    full = np.array([hinge_features(kx * cfg.dx, ks * cfg.dx, q, cfg) for kx, ks, q in grid.states])
    keep = _prune_columns(full)
    Phi = full[:, keep]
    behavior = Policy.uniform(mdp.n_states, mdp.n_actions, mdp.action_mask)
    target = threshold_policy(grid, mdp)
    xi = stationary_distribution(mdp, behavior)

    nQ, n = len(cfg.prices), cfg.n_levels
    Fsa = np.zeros((mdp.n_states, mdp.n_actions, len(keep) + 2 * nQ))
    for i, (kx, ks, q) in enumerate(grid.states):
        for a in np.flatnonzero(mdp.action_mask[i]):
            ku = a - n
            Fsa[i, a, :len(keep)] = hinge_features((kx + ku) * cfg.dx, ks * cfg.dx, q, cfg)[keep]
            Fsa[i, a, len(keep) + q] = max(ku, 0) * cfg.dx
            Fsa[i, a, len(keep) + nQ + q] = max(-ku, 0) * cfg.dx
    bound = float(np.max(np.abs(Phi)))
    return Domain("battery", mdp, FeatureMap(Phi, bound, "battery-hinge"), target, behavior, xi,
                  np.zeros(Phi.shape[1]), features_sa=Fsa,
                  start_state=grid.encode((0.0, cfg.s0, cfg.prices[len(cfg.prices) // 2])),
                  info={"grid": grid, "config": cfg, "feature_columns": keep})

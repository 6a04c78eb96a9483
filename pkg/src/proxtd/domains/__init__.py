"""Benchmark environments: Baird's star, the 50-state chain and battery arbitrage."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..features import FeatureMap
from ..mdp import FiniteMdp, Policy


@dataclass(frozen=True)
class Domain:
    """A finite MDP bundled with its features, policies and sampling distribution."""

    name: str
    mdp: FiniteMdp
    features: FeatureMap
    target: Policy
    behavior: Policy
    xi: np.ndarray
    theta0: np.ndarray
    features_sa: Optional[np.ndarray] = None
    start_state: int = 0
    info: dict = field(default_factory=dict)

    @property
    def on_policy(self) -> bool:
        return bool(np.array_equal(self.target.probs, self.behavior.probs))

    @property
    def Phi(self) -> np.ndarray:
        return self.features.matrix

    @property
    def xi_sa(self) -> np.ndarray:
        """Behavior state-action distribution ``xi(s) pi_b(a|s)``."""
        return self.xi[:, None] * self.behavior.probs


from .baird import build_baird  # noqa: E402
from .battery import BatteryConfig, battery_transition, build_battery  # noqa: E402
from .chain import build_chain, build_chain50  # noqa: E402

DOMAINS = ("baird", "chain50", "battery")


def build_domain(name: str, **overrides) -> Domain:
    if name == "baird":
        return build_baird(**overrides)
    if name == "chain50":
        return build_chain50(**overrides)
    if name == "battery":
        return build_battery(BatteryConfig(**overrides))
    raise ValueError(f"unknown domain {name!r}; expected one of {DOMAINS}")


__all__ = ["Domain", "DOMAINS", "build_domain", "build_baird", "build_chain50", "build_chain",
           "build_battery", "BatteryConfig", "battery_transition"]

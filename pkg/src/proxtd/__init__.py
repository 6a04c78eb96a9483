"""Proximal gradient temporal-difference learning with linear function approximation.

Submodules:

* :mod:`proxtd.mdp` -- finite MDPs, policies, importance weights and samplers
* :mod:`proxtd.features` -- feature maps and Bellman-error basis growth
* :mod:`proxtd.objectives` -- exact ``A, b, C``, objectives, saddle gap and bounds
* :mod:`proxtd.learners` -- GTD-family, mirror-prox, TDC and Greedy-GQ updates
* :mod:`proxtd.domains` -- Baird's star, the 50-state chain and a battery MDP
* :mod:`proxtd.harness` -- experiment runner, summaries and artifacts
"""
from . import errors
from .errors import ProxTDError

__version__ = "0.1.0"

__all__ = ["errors", "ProxTDError", "__version__"]

"""Greedy-GQ on the battery: the plain TD variant runs away, the projected mirror-prox one learns.

Run: python3 demos/control.py   (about a minute)
"""
import numpy as np

from proxtd.harness import ExperimentConfig, prepare_problem, random_policy_return, run_control

cfg = ExperimentConfig(domain="battery", algorithms=("gq_td", "gq_mp"), steps=7000, runs=3, alpha=0.001,
                       lam=0.9, control_radius=5.0, log_every=1000, seed=11)
problem = prepare_problem("battery")
results = run_control(cfg, problem)
print(f"behavior policy return: {random_policy_return(problem, cfg):.2f}")
for algo in cfg.algorithms:
    runs = [r for r in results if r.algorithm == algo]
    norm = np.max([r.columns["theta_norm"] for r in runs])
    ret = np.nanmean([r.columns["mean_return"][-1] for r in runs])
    print(f"{algo:<6} max ||theta|| = {norm:10.3g}   final greedy return = {ret:8.2f}")

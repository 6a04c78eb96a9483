"""Off-policy TD(0) blows up on the star problem; the saddle-point methods do not.

Run: python3 demos/baird_divergence.py
"""
import numpy as np

from proxtd.harness import ExperimentConfig, prepare_problem, run_policy_eval

cfg = ExperimentConfig(domain="baird", algorithms=("td0", "gtd2", "gtd2_mp"), steps=8000, runs=5,
                       alphas={"td0": 0.005, "gtd2": 0.005, "gtd2_mp": 0.004}, log_every=1000, seed=7)
problem = prepare_problem("baird")
results = run_policy_eval(cfg, problem)

steps = results[0].columns["t"].astype(int)
print("step    " + "".join(f"{a:>14}" for a in cfg.algorithms))
curves = {a: np.mean([r.columns["mspbe"] for r in results if r.algorithm == a], axis=0) for a in cfg.algorithms}
for i, t in enumerate(steps):
    print(f"{t:<8d}" + "".join(f"{curves[a][i]:14.4g}" for a in cfg.algorithms))

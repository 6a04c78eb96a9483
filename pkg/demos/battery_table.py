"""Steady-state MSPBE of the four saddle-point learners on the battery domain.

Run: python3 demos/battery_table.py   (about a minute)
"""
from proxtd.harness import ExperimentConfig, prepare_problem, run_policy_eval, summarize_steady_state

cfg = ExperimentConfig(domain="battery", algorithms=("gtd", "gtd2", "gtd_mp", "gtd2_mp"), steps=10_000,
                       runs=5, alpha=0.001, log_every=500)
summary = summarize_steady_state(run_policy_eval(cfg, prepare_problem("battery")), window=0.1)
print(f"{'algorithm':<10}{'MSPBE':>10}{'std':>10}{'MSBE':>10}")
for row in summary.rows:
    print(f"{row['algorithm']:<10}{row['mspbe_mean']:10.4f}{row['mspbe_std']:10.4f}{row['msbe_mean']:10.4f}")
print("ranking:", " < ".join(summary.ranking))

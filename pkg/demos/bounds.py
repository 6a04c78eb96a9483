"""Closed-form quantities behind the finite-sample guarantee, for each domain.

Run: python3 demos/bounds.py
"""
from proxtd.harness import check_bounds

keys = ("normA", "boundA", "nu", "tau", "xi_max", "M_star", "alpha", "err_bound", "lmi")
tables = {d: check_bounds(d, 10_000) for d in ("baird", "chain50", "battery")}
print(f"{'quantity':<12}" + "".join(f"{d:>14}" for d in tables))
for k in keys:
    print(f"{k:<12}" + "".join(f"{str(t[k]) if isinstance(t[k], bool) else format(t[k], '.4g'):>14}"
                              for t in tables.values()))

"""Small benchmark grid and a text performance profile.

Runs four solver configurations over the low-dimensional problems and
prints h(tau) at a few tau values for the linear adjusted-call metric.
"""

import numpy as np

from trophy import SolverConfig, benchmark as bm
from trophy.problems import list_problems

solvers = {
    "tr-double": SolverConfig(hierarchy=[53]),
    "tr-single": SolverConfig(hierarchy=[24]),
    "trophy-sd": SolverConfig(hierarchy=[24, 53]),
    "trophy-hsd": SolverConfig(hierarchy=[11, 24, 53]),
}
records = bm.run_grid(list_problems(max_dim=10), solvers, jobs=2)
_, names, ratios = bm.performance_ratios(records, "adj_linear", list(solvers))
taus = np.array([1.0, 1.5, 2.0, 4.0, 8.0])
curves = bm.performance_profile(ratios, names, taus)

print(f"{'solver':<11}" + "".join(f"{t:>8g}" for t in taus))
for c in curves:
    print(f"{c.solver:<11}" + "".join(f"{h:8.2f}" for h in c.h_values))
for row in bm.summarize(records, names, "adj_linear"):
    print(f"{row['solver']:<11} solved {row['solved']}/{row['runs']}, median adjusted calls {row['median']:.1f}")

"""Solve Rosenbrock with a three-level hierarchy and print the level trace.

The solver starts at 11 bits and climbs only when the precision test says
the model can no longer tell a good step from a bad one.
"""

from trophy import SolverConfig, get_problem, solve
from trophy.oracle import adjusted_calls

problem = get_problem("rosenbrock2")
result = solve(problem, SolverConfig(hierarchy=[11, 24, 53]))

print(f"status      {result.status} after {result.iterations} iterations")
print(f"x           {result.x_final}")
print(f"||g||       {result.gnorm_final:.3e}")

# compress the per-iteration level into runs
runs = []
for b in result.level_trace:
    if runs and runs[-1][0] == b:
        runs[-1][1] += 1
    else:
        runs.append([b, 1])
print("levels      " + " -> ".join(f"{b} bits x{n}" for b, n in runs))

for b, f, g in result.ledger.rows():
    print(f"  {b:>2} bits: {f:5d} f-calls {g:5d} g-calls")
print(f"adjusted calls (linear cost) {adjusted_calls(result.ledger, 'linear'):.1f}")

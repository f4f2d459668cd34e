"""A problem that single precision cannot finish.

``noisy_sum10`` adds and removes a large offset, so its value differences
near the minimiser vanish below 24 bits.  The 24-bit solver stalls; the
{24, 53} hierarchy notices the gap and moves up.
"""

from trophy import SolverConfig, get_problem, solve

problem = get_problem("noisy_sum10")
for bits in ([24], [24, 53], [53]):
    r = solve(problem, SolverConfig(hierarchy=bits))
    print(f"{str(bits):>9}: {r.status:<17} iters={r.iterations:<5} ||g||={r.gnorm_final:.2e} "
          f"final level={r.hierarchy.bits[r.final_level]} escalations={r.counters['escalations']}")

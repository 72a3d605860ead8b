"""How a demographic-parity constraint can hurt the group it protects.

Runs the shipped `lending_liu` scenario twice — once under the
profit-maximizing policy, once under a demographic-parity-constrained
policy — and prints the disadvantaged group's expected score change and
trajectory under each. The DP-constrained policy pushes the lender to
accept low-score applicants whose likely defaults drag the group mean
down: a regime reversal from improvement to decline.

Run with:  python3 demos/lending_regime_reversal.py
"""

from dataclasses import replace

from fairdyn.dynamics import group_delta_mu, simulate
from fairdyn.optimize import Constraint, constrained_policy, max_utility_policy
from fairdyn.population import group_mean
from fairdyn.scenarios import load_scenario

cfg = load_scenario("lending_liu")
pop, out, inst = cfg.population, cfg.outcome, cfg.institution

greedy = max_utility_policy(pop, out, inst)
dp = constrained_policy(pop, out, inst, Constraint.DEMOGRAPHIC_PARITY, cfg.resolution)

print("One-step expected score change for group B (the disadvantaged group):")
print(f"  max-utility policy : {group_delta_mu(pop.group('B'), greedy, out, pop.grid):+.4f}")
print(f"  DP-constrained     : {group_delta_mu(pop.group('B'), dp.policy, out, pop.grid):+.4f}")
print(f"  (DP common acceptance rate {dp.level:.2f}, utility {dp.utility:.5f})")
print()

for label, policy in (("max-utility", greedy), ("DP-constrained", dp.policy)):
    traj = simulate(pop, lambda t, p: policy, out, inst, cfg.horizon,
                    regime_tol=cfg.tolerances.regime, metric_pair=cfg.metric_groups)
    print(f"Group-B mean score under the {label} policy:")
    for rec in traj.steps[:: max(1, cfg.horizon // 5)]:
        mean_b = group_mean(rec.population.group("B"), pop.grid)
        print(
            f"  step {rec.step:2d}: mean {mean_b:6.1f}  "
            f"delta_mu {rec.delta_mu['B']:+7.3f}  regime {rec.regime['B'].value}"
        )
    print()

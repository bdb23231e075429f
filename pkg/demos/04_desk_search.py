"""A complete desk-scale search with the analytic surrogate and transfer.

Writes its artifacts to runs/demo_search/ (run log, checkpoint, report,
evolution CSV) and prints the per-generation trajectory.
"""

from evoarch import SearchConfig, export_evolution_csv, run
from evoarch.orchestrator import read_log

config = SearchConfig(
    generations=8,
    pop_size=10,
    run_seed=7,
    otl_enabled=True,
    out_dir="runs/demo_search",
)
report = run(config)

print("== per-generation trajectory ==")
print(f"{'gen':>3} {'best':>9} {'median':>9} {'hypervolume':>12} champion")
for rec in read_log(config.out_dir):
    if rec["record"] == "generation":
        print(f"{rec['generation']:>3} {rec['reward_max']:>9.3f} "
              f"{rec['reward_median']:>9.3f} {rec['hypervolume']:>12.4f} "
              f"{rec['champion']}")

print("\n== final report ==")
print(f"evaluations: {report['evaluations']}")
print(f"best by reward: {report['best_by_reward']['id']} "
      f"({report['best_by_reward']['reward']:.3f})")
print("archive Pareto front:")
for m in report["pareto_front"]:
    print(f"  {m['id']:>6} reward={m['reward']:8.3f} params_m={m['params_m']:.4f} "
          f"flops_g={m['flops_g']:.4f}")

export_evolution_csv(config.out_dir, "runs/demo_search/evolution.csv")
print("\nwrote runs/demo_search/evolution.csv")
print("inspect an individual with:")
print(f"  evoarch show-genome --run {config.out_dir} --id {report['best_by_reward']['id']}")

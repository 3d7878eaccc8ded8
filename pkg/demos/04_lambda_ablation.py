"""Static lambda sweep and the incremental vs decremental comparison, on MUTAG.

The full sweep is 11 static values plus two schedules. With the default two
seeds that is 26 trainings, about 8 minutes on one core. Pass a number to use
more seeds, e.g. ``python demos/04_lambda_ablation.py 5``.
"""

import sys

from localgcl.ablation import dynamic_compare, hybrid_beats_pure, static_sweep, summarize
from localgcl.data import load_dataset
from localgcl.trainer import TrainConfig

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 2
seeds = list(range(n_seeds))
ds = load_dataset("data", "MUTAG")
cfg = TrainConfig(dataset="MUTAG")

static = summarize(static_sweep(cfg, seeds, ds))
print(f"static lambda over seeds {seeds}")
for lab, mean, std in static:
    bar = "#" * int(round((mean - 0.75) * 200))
    print(f"  lambda={lab}  {100 * mean:6.2f}±{100 * std:4.2f}  {bar}")
ok, interior, pure = hybrid_beats_pure(static)
print(f"best interior {100 * interior:.2f} vs best pure {100 * pure:.2f}: "
      f"{'hybrid holds up' if ok else 'pure wins here'}")

dynamic = summarize(dynamic_compare(cfg, seeds, ds))
print("\nschedules")
for lab, mean, std in dynamic:
    print(f"  {lab:<12} {100 * mean:6.2f}±{100 * std:4.2f}")

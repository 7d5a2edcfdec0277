"""Train small networks from several seeds and tally how their units behave.

Run: python3 demos/training_sweep.py
"""

from collections import Counter

from splinenet.analyzer import Thresholds, analyze
from splinenet.trainer import Dataset, TrainConfig, init_net, train

data = Dataset.from_function(lambda x: 32 * x**3 + 3, 1, 0.01)
tally: Counter = Counter()
for seed in range(1, 6):
    cfg = TrainConfig(seed=seed, steps=3000)
    result = train(init_net(cfg, 1), data, cfg)
    a = analyze(result.net, data, Thresholds(gamma3=0.05))
    tally.update(a.counts())
    print(f"seed {seed}: eps {result.initial_eps:.2f} -> {result.final_eps:.3f}, {a.counts()}")
print("totals:", dict(tally))

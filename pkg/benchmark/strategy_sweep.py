import csv
import os
import sys
import time
from pathlib import Path

# Limit numpy to one thread so timings are comparable
os.environ["OMP_NUM_THREADS"] = "1"
os.environ["OPENBLAS_NUM_THREADS"] = "1"

from spirallm import Config
from spirallm.corpus import generate
from spirallm.trainers import SpiralTrainer

PRESET = os.environ.get("SWEEP_PRESET", "lexicon")
FRACTIONS = [0.25, 0.5, 0.75, 1.0]
STRATEGIES = ["l2r", "slm-twostage"]
OUT_DIR = Path(sys.argv[1] if len(sys.argv) > 1 else "sweep")

# Step 1: Build the corpus once; every run shares it

base = Config.resolve(PRESET)
corpus = generate(base.to_task_spec())
OUT_DIR.mkdir(parents=True, exist_ok=True)

# Step 2: Train one model per (strategy, data fraction)


def run(strategy, fraction):
    tag = f"{strategy}-{fraction:.2f}"
    config = Config.resolve(
        PRESET,
        {
            "strategy": strategy,
            "data_fraction": fraction,
            "checkpoint": str(OUT_DIR / f"{tag}.slmc"),
            "metrics_out": str(OUT_DIR / f"{tag}.csv"),
        },
    )
    trainer = SpiralTrainer(config, corpus)
    start_time = time.perf_counter()
    rows = trainer.train(progress=False)
    total_time = time.perf_counter() - start_time
    return {
        "strategy": strategy,
        "data_fraction": fraction,
        "train_pairs": len(trainer.train_pairs),
        "dev_bleu": 100 * (rows[-1]["dev_bleu"] or 0.0),
        "seconds": total_time,
    }


results = []
for fraction in FRACTIONS:
    for strategy in STRATEGIES:
        print(f"Training {strategy} on {fraction:.0%} of the data")
        results.append(run(strategy, fraction))

# Step 3: Write the BLEU curve

with (OUT_DIR / "strategy_sweep.csv").open("w", newline="", encoding="utf-8") as f:
    writer = csv.DictWriter(f, fieldnames=list(results[0]))
    writer.writeheader()
    for row in results:
        writer.writerow({**row, "dev_bleu": f"{row['dev_bleu']:.2f}", "seconds": f"{row['seconds']:.1f}"})

# Step 4: Report the spiral-vs-l2r gap per fraction

by_key = {(r["strategy"], r["data_fraction"]): r["dev_bleu"] for r in results}
print(f"{'fraction':>8}  {'l2r':>6}  {'spiral':>6}  {'gap':>6}")
for fraction in FRACTIONS:
    l2r = by_key[("l2r", fraction)]
    spiral = by_key[("slm-twostage", fraction)]
    print(f"{fraction:>8.2f}  {l2r:>6.2f}  {spiral:>6.2f}  {spiral - l2r:>+6.2f}")

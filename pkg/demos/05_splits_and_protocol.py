"""Deterministic splits: stratified 70:30, five disjoint folds at 4:1.

Also reproduces the arithmetic of a 2010-image training set: each fold
trains on 1608 images and validates on 402, with an 869-image test side
untouched throughout.

Run:  python3 demos/05_splits_and_protocol.py
"""

from pathlib import Path

from pndnet.data import Dataset, SplitPlan, kfold_split, split_train_test

# a label-only dataset is enough to drive the split machinery
sizes = {"bacteria": 120, "fungus": 85, "healthy": 200, "pest": 64}
samples, names = [], []
for c, (name, n) in enumerate(sorted(sizes.items())):
    names.append(name)
    samples.extend((Path(f"/data/{name}/img_{i:04d}.ppm"), c) for i in range(n))
dataset = Dataset(samples=samples, class_names=names, root=Path("/data"))

plan = split_train_test(dataset, ratio=0.7, seed=7)
labels = dataset.labels()
print(f"{len(dataset)} samples -> {len(plan.train)} train / {len(plan.test)} test")
for c, name in enumerate(names):
    tr = sum(1 for i in plan.train if labels[i] == c)
    te = sum(1 for i in plan.test if labels[i] == c)
    print(f"  {name:10s} {tr:3d} / {te:3d}   (class size {sizes[name]})")

print("\nsplit is pure function of (dataset, seed):",
      plan.to_json() == split_train_test(dataset, ratio=0.7, seed=7).to_json())

plan = kfold_split(plan, k=5, seed=7)
print("\nfive folds over the train side:", [len(f) for f in plan.folds])
union = sorted(i for f in plan.folds for i in f)
print("disjoint and covering:", union == sorted(plan.train))
for fold in range(5):
    print(f"  fold {fold}: validate on {len(plan.folds[fold])}, "
          f"train on {len(plan.fold_train(fold))} (4:1)")

# the 2010-image protocol, exactly
potato = SplitPlan(train=list(range(2010)), test=list(range(2010, 2879)), seed=0)
potato = kfold_split(potato, k=5, seed=0)
print("\n2010 train images -> per-fold train/val:",
      len(potato.fold_train(0)), "/", len(potato.folds[0]),
      "with", len(potato.test), "test images untouched")

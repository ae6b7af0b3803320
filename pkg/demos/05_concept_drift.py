"""Concept drift: a probing botnet that learns to flood.

The drift scenario interpolates the mirai-like profile toward the dos
profile over the capture. Training only ever sees the early, probe-like
behavior; the three chronological test partitions then show the class
migrating across the embedding space, fine-grained recall collapsing, and
binary detection holding steady.
"""

import numpy as np

import flowmap as fm
from flowmap import graphbuild as gb
from flowmap import metrics as mx
from flowmap import model as mdl
from flowmap import training as tr

scenario = fm.drift_scenario(seed=7)
print(f"mimicry strength over time: " + ", ".join(f"t={t:.2f}->{scenario.mimicry(t):.2f}" for t in (0.2, 0.4, 0.6, 0.8, 1.0)))

flows = sorted(fm.segment_stream(fm.generate(scenario)), key=lambda f: f.t_start)
snaps = {k: gb.build_snapshot(v) for k, v in gb.split_flows(flows).items()}

params, _ = tr.train(
    snaps["train"],
    mdl.ModelConfig(variant="cls", hidden_dim=32, edge_latent_dim=32),
    tr.TrainConfig(epochs=200, seed=9),
)

coords, labels, scores = {}, {}, {}
for part in ("testA", "testB", "testC"):
    res = tr.embed(snaps[part], params)
    labels[part] = list(snaps[part].edge_labels)
    coords[part] = res.edge_coords
    scores[part] = mx.f1_suite(labels[part], list(res.pred_labels))

report = mx.drift_report(coords, labels, scores)

print("\nF1 trajectories across the partitions:")
print(f"  {'class':12s} {'testA':>7s} {'testB':>7s} {'testC':>7s}")
print(f"  {'binary':12s} " + " ".join(f"{report['binary_f1'][p]:7.3f}" for p in ("testA", "testB", "testC")))
for name, traj in sorted(report["per_class_f1"].items()):
    print(f"  {name:12s} " + " ".join(f"{traj[p]:7.3f}" for p in ("testA", "testB", "testC")))

print("\nmirai-like centroid walks into the dos region:")
for part in ("testA", "testB", "testC"):
    d = report["centroid_distance"][part]["mirai_like"]["dos"]
    print(f"  {part}: centroid distance to dos = {d:.3f}")
for hop, value in report["centroid_displacement"]["mirai_like"].items():
    print(f"  displacement {hop}: {value:.3f}")

print(
    "\nreading: the drift erodes the probe-vs-flood boundary (mirai recall falls),"
    "\nwhile everything stays clearly non-benign (binary detection steady)."
)

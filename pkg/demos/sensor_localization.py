"""Recover a planted 2-D sensor layout from exact pairwise distances."""
import itertools

import numpy as np

from cdtriality import SensorNetwork, build_sensor_instance, extract_positions, solve_instance

rng = np.random.default_rng(3)
layout = rng.uniform(-1, 1, (4, 2))
anchors = [(0, layout[0]), (1, layout[1])]
distances = [(i, j, float(np.linalg.norm(layout[i] - layout[j])))
             for i, j in itertools.combinations(range(4), 2) if j > 1]
net = SensorNetwork(2, 4, anchors, distances)
inst = build_sensor_instance(net)
print(f"instance: n={inst.n}, m={inst.m}, p={inst.p} (anchors off the origin add a lift coordinate)")

report = solve_instance(inst, perturb=True)
best = report.global_minimizer or report.best_known()
print(f"outcome {report.outcome}, misfit {best['value']:.2e}")
U = extract_positions(net, best["x"])
# Two anchors in the plane leave a reflection ambiguity across their line.
print("planted:\n", np.round(layout, 6))
print("recovered:\n", np.round(U, 6))
print("distance misfit:", max(abs(np.linalg.norm(U[i] - U[j]) - d) for i, j, d in distances))

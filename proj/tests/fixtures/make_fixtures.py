"""Regenerate the CLI test fixtures. Output is deterministic."""
import csv
import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def toy():
    # 15 pairs and 70 isolated units: degree-one share 0.3.
    n = 100
    patterns = [(0, 0), (0, 1), (1, 0), (1, 1)]
    d = [0] * n
    edges = []
    for k in range(15):
        a, b = 2 * k, 2 * k + 1
        d[a], d[b] = patterns[k % 4]
        edges.append((a, b))
    for i in range(30, n):
        d[i] = i % 2
    peers = {i: [] for i in range(n)}
    for a, b in edges:
        peers[a].append(b)
        peers[b].append(a)
    rows = []
    for i in range(n):
        g = len(peers[i])
        e = sum(d[j] for j in peers[i]) / g if g else 0.0
        y = 0.5 + 0.4 * e + 0.6 * d[i] * e
        rows.append((i, repr(y), d[i], 0))
    write_csv(HERE / "toy_units.csv", ["id", "Y", "D", "x1"], rows)
    write_csv(HERE / "toy_edges.csv", ["src", "dst"], edges)
    cfg = {
        "data": {
            "units": "toy_units.csv",
            "edges": "toy_edges.csv",
            "covariates": [{"name": "x1", "kind": "categorical"}],
        },
        "basis": "linear",
        "exposure": "ratio",
        "bandwidth": {"categorical": 0.0},
        "target": {"cells": [{"cell": [0], "p": 1.0, "degrees": {"support": [0, 1], "mass": [0.6, 0.4]}}]},
        "degrees": [0, 1],
        "deltas": [0.0, 0.05, 0.1, 0.2, 0.5, 0.8],
        "order": 1,
        "out": "toy_out",
    }
    (HERE / "toy_bounds.json").write_text(json.dumps(cfg, indent=2) + "\n")


def noisy():
    rng = random.Random(20261018)
    n = 300
    x1 = [rng.randrange(2) for _ in range(n)]
    x2 = [rng.randrange(3) for _ in range(n)]
    z = [rng.gauss(0, 1) for _ in range(n)]
    block = [i * 3 // n for i in range(n)]
    d = [int(rng.random() < 0.5) for _ in range(n)]
    edges = set()
    deg = [0] * n
    for i in range(n):
        for _ in range(rng.randrange(4)):
            j = rng.randrange(block[i] * 100, block[i] * 100 + 100)
            e = (min(i, j), max(i, j))
            if j != i and e not in edges and deg[i] < 6 and deg[j] < 6:
                edges.add(e)
                deg[i] += 1
                deg[j] += 1
    edges = sorted(edges)
    peers = {i: [] for i in range(n)}
    for a, b in edges:
        peers[a].append(b)
        peers[b].append(a)
    rows = []
    for i in range(n):
        g = len(peers[i])
        e = sum(d[j] for j in peers[i]) / g if g else 0.0
        y = 1 + 0.3 * x1[i] + 0.5 * d[i] + 0.4 * e + 0.2 * d[i] * e - 0.05 * g + rng.gauss(0, 0.5)
        rows.append((i, f"{y:.6f}", d[i], x1[i], x2[i], f"{z[i]:.6f}", block[i]))
    write_csv(HERE / "noisy_units.csv", ["id", "Y", "D", "x1", "x2", "z", "block"], rows)
    write_csv(HERE / "noisy_edges.csv", ["src", "dst"], edges)
    target = []
    for i in range(200):
        t1 = rng.randrange(2)
        t2 = rng.randrange(3)
        target.append((i, t1, t2, min(5, rng.randrange(1, 5))))
    write_csv(HERE / "noisy_target.csv", ["id", "x1", "x2", "degree"], target)
    data = {
        "units": "noisy_units.csv",
        "edges": "noisy_edges.csv",
        "covariates": [{"name": "x1", "kind": "categorical"}, {"name": "x2", "kind": "ordered"}],
        "numeric": ["z"],
        "block": "block",
    }
    cfg = {
        "data": data,
        "basis": "linear",
        "exposure": "ratio",
        "bandwidth": {"categorical": 0.3, "ordered": 0.3},
        "target": {"units": "noisy_target.csv", "degree": "degree"},
        "deltas": [0.1, 0.5],
        "order": 2,
        "bootstrap": {
            "replicates": 100,
            "alpha": 0.1,
            "kernel": {"columns": ["z"], "c_d": 4, "psd_policy": "clip"},
        },
        "decomposition": True,
        "seed": 7,
        "out": "noisy_out",
    }
    (HERE / "noisy_bounds.json").write_text(json.dumps(cfg, indent=2) + "\n")
    target_data = {"units": "noisy_units.csv", "edges": "noisy_edges.csv",
                   "covariates": data["covariates"]}
    wcfg = {"source": target_data, "target": {"distributions": "noisy_target_dist.json"}, "order": 1}
    dists = {"cells": [{"cell": [a, b], "support": [1, 2, 3, 4], "mass": [0.25, 0.25, 0.25, 0.25]}
                       for a in range(2) for b in range(3)]}
    (HERE / "noisy_target_dist.json").write_text(json.dumps(dists, indent=2) + "\n")
    (HERE / "wasserstein.json").write_text(json.dumps(wcfg, indent=2) + "\n")
    (HERE / "graphcheck.json").write_text(json.dumps(
        {"distribution": {"support": [1, 2, 3], "mass": [0.5, 0.3, 0.2]}, "n": 40, "swaps": 100}, indent=2) + "\n")
    (HERE / "simulate.json").write_text(json.dumps(
        {"n": 300, "replications": 3, "bootstrap": 50, "burnin": 2, "deltas": [0.1, 0.5], "alphas": [0.05],
         "c_d": [4], "bandwidth": {"categorical": 0.5, "ordered": 0.4}}, indent=2) + "\n")


toy()
noisy()

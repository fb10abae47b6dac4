#!/usr/bin/env python3
"""Writes reference values for the closed-form engine formulas.

Shares no code with the Rust crate.
Usage: python3 tools/formula_oracles.py > crates/core/tests/fixtures/formula_oracles.json
"""
import json
import math
import random

ANGLES = [30, 45, 60, 90, 120, 150]
N = 1000


def prob(theta, w):
    return w[ANGLES.index(theta)] / math.fsum(w)


def dot_addition(k):
    return 1.0 if k <= 4 else 1.0 / (k - 3)


def goodness(angles, set_size, w):
    n = len(angles) + 2
    g = 6.0 ** (n - 2) * float(set_size) ** (n - 1) * math.exp(-(n - 1))
    for a in angles:
        g *= prob(a, w)
    return g


def cost(angles, measured, w):
    ws = [w[ANGLES.index(a)] for a in angles]
    return math.fsum(x * abs(a - m) for x, a, m in zip(ws, angles, measured)) / math.fsum(ws)


def weights(rng):
    return [rng.uniform(0.01, 10.0) for _ in ANGLES]


def main():
    rng = random.Random(20240611)
    out = {"angle_probability": [], "dot_addition_probability": [], "goodness": [],
           "matching_cost": [], "interpolate_at": []}
    for _ in range(N):
        w = weights(rng)
        t = rng.choice(ANGLES)
        out["angle_probability"].append({"weights": w, "theta": t, "expected": prob(t, w)})
    for k in range(3, 3 + N):
        out["dot_addition_probability"].append({"k": k, "expected": dot_addition(k)})
    for _ in range(N):
        w = weights(rng)
        angles = [rng.choice(ANGLES) for _ in range(rng.randint(1, 6))]
        size = rng.randint(1, 6)
        out["goodness"].append({"weights": w, "angles": angles, "set_size": size,
                                "expected": goodness(angles, size, w)})
    for _ in range(N):
        w = weights(rng)
        k = rng.randint(1, 8)
        angles = [rng.choice(ANGLES) for _ in range(k)]
        measured = [rng.uniform(0.0, 180.0) for _ in range(k)]
        out["matching_cost"].append({"weights": w, "angles": angles, "measured": measured,
                                     "expected": cost(angles, measured, w)})
    for _ in range(N):
        tm = rng.uniform(0.0, 1e4)
        tn = tm + rng.uniform(0.5, 1e3)
        m = [rng.uniform(-2e3, 2e3), rng.uniform(-2e3, 2e3)]
        n = [rng.uniform(-2e3, 2e3), rng.uniform(-2e3, 2e3)]
        to = rng.uniform(tm - 200.0, tn + 200.0)
        r = (to - tm) / (tn - tm)
        out["interpolate_at"].append({"t_m": tm, "m": m, "t_n": tn, "n": n, "t_o": to,
                                      "expected": [m[0] + r * (n[0] - m[0]), m[1] + r * (n[1] - m[1])],
                                      "extrapolated": not (tm <= to <= tn)})
    json.dump(out, __import__("sys").stdout)


if __name__ == "__main__":
    main()

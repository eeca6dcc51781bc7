#!/usr/bin/env python3
"""Regenerates the frozen plan and mask goldens from first principles.

Run from this directory; the C++ tests compare against the JSON output.
"""
import json
from fractions import Fraction


def plan(D, gamma, delta, mode):
    d = gamma * D
    if d.denominator != 1 or d < 1:
        return "error"
    d = int(d)
    if mode == "continual" and delta > 1:
        if d % delta:
            return "error"
        w = d // delta
        offs = list(range(-delta, 0)) + list(range(1, delta + 1))
        segs = [(o, i * w, (i + 1) * w) for i, o in enumerate(offs)]
    else:
        segs = [(-delta, 0, d), (delta, d, 2 * d)]
    segs.append((0, 2 * d, D))
    return [{"offset": o, "start": s, "end": e} for o, s, e in segs]


def plans():
    out = {}
    for D in (8, 16, 64):
        for g in (Fraction(1, 8), Fraction(1, 4)):
            for delta in (1, 2):
                for mode in ("separate", "continual"):
                    out[f"D={D} gamma={g} delta={delta} mode={mode}"] = plan(D, g, delta, mode)
    return out


def masks():
    # rows x cols grid, w1 x w2 windows, k kept per window
    out = {}
    for rows, cols, w1, w2, k, frames in ((2, 2, 2, 2, 2, 8), (2, 4, 2, 2, 2, 4), (4, 4, 2, 2, 1, 4), (2, 6, 1, 3, 2, 3)):
        w = w1 * w2
        maps = []
        for t in range(frames):
            m = []
            for r in range(rows):
                for c in range(cols):
                    cell = (r % w1) * w2 + c % w2
                    m.append(1 if (cell - t) % w < k else 0)
            maps.append(m)
        period = next(p for p in range(1, w + 1) if w % p == 0 and all(maps[t] == maps[t % p] for t in range(frames)))
        out[f"grid={rows}x{cols} window={w1}x{w2} k={k} T={frames}"] = {"period": period, "maps": maps}
    return out


if __name__ == "__main__":
    with open("channel_plans.json", "w") as f:
        json.dump(plans(), f, indent=1, sort_keys=True)
        f.write("\n")
    with open("mask_schedules.json", "w") as f:
        json.dump(masks(), f, indent=1, sort_keys=True)
        f.write("\n")

#!/usr/bin/env python3
"""Generate the synthetic municipality population grids in crates/core/data.

The grids imitate the shape of small Norwegian municipalities: a town centre,
its outskirts, a few villages and farms scattered along valleys. Household
counts per cell are drawn first and populations are then chosen so that
ceil(population / 2.22) gives back exactly that many households, which pins
the total number of links.

Usage: python3 scripts/make_grids.py [output_dir]
"""

import math
import sys
from pathlib import Path

import numpy as np

PERSONS_PER_HOUSEHOLD = 2.22


def population_for(households, rng):
    """A population whose household count rounds up to `households`."""
    lo = math.floor(PERSONS_PER_HOUSEHOLD * (households - 1)) + 1
    hi = math.floor(PERSONS_PER_HOUSEHOLD * households)
    p = int(rng.integers(lo, hi + 1))
    assert math.ceil(p / PERSONS_PER_HOUSEHOLD) == households
    return p


def spread(total, cells, weights, rng):
    """Distribute `total` households over `cells`, at least one each."""
    cells = list(cells)
    w = np.asarray(weights, dtype=float)
    n = min(len(cells), total)
    order = rng.choice(len(cells), size=n, replace=False, p=w / w.sum())
    chosen = [cells[i] for i in order]
    cw = w[order]
    counts = np.ones(n, dtype=int) + rng.multinomial(total - n, cw / cw.sum())
    return dict(zip(chosen, counts.tolist()))


def blob(center, sigma_cells, radius_cells, exclude=()):
    cx, cy = center
    cells, weights = [], []
    r = int(radius_cells)
    for x in range(cx - r, cx + r + 1):
        for y in range(cy - r, cy + r + 1):
            if (x, y) in exclude:
                continue
            d2 = (x - cx) ** 2 + (y - cy) ** 2
            if d2 <= r * r:
                cells.append((x, y))
                weights.append(math.exp(-d2 / (2 * sigma_cells ** 2)))
    return cells, weights


def valley(rng, start, end, width):
    (x0, y0), (x1, y1) = start, end
    steps = max(abs(x1 - x0), abs(y1 - y0))
    cells = set()
    for s in range(steps + 1):
        t = s / steps
        x = round(x0 + t * (x1 - x0))
        y = round(y0 + t * (y1 - y0))
        for dx in range(-width, width + 1):
            for dy in range(-width, width + 1):
                cells.add((x + dx, y + dy))
    return sorted(cells)


def municipality(seed, centre, focus, focus_households, total_households, villages, valleys, town_sigma):
    """Household counts per cell.

    `focus` is a square of cells (x0, y0, size) holding exactly
    `focus_households`; everything else is spread over outskirts, villages
    and valleys.
    """
    rng = np.random.default_rng(seed)
    households = {}
    fx, fy, fs = focus
    focus_cells = [(x, y) for x in range(fx, fx + fs) for y in range(fy, fy + fs)]
    focus_set = set(focus_cells)
    if focus_households:
        w = [math.exp(-((x - centre[0]) ** 2 + (y - centre[1]) ** 2) / (2 * (fs / 2.5) ** 2)) for x, y in focus_cells]
        households.update(spread(focus_households, focus_cells, w, rng))

    rest = total_households - focus_households
    shares = {"outskirts": 0.4, "villages": 0.35, "valleys": 0.25}
    n_out = round(rest * shares["outskirts"])
    n_vil = round(rest * shares["villages"])
    n_val = rest - n_out - n_vil

    def add(d):
        for c, h in d.items():
            households[c] = households.get(c, 0) + h

    cells, w = blob(centre, town_sigma, 4 * town_sigma, exclude=focus_set)
    add(spread(n_out, cells, w, rng))

    sizes = rng.dirichlet(np.full(len(villages), 3.0))
    alloc = np.floor(sizes * n_vil).astype(int)
    alloc[0] += n_vil - alloc.sum()
    for (vc, sigma), n in zip(villages, alloc):
        cells, w = blob(vc, sigma, 3 * sigma, exclude=focus_set)
        add(spread(int(n), cells, w, rng))

    cells = sorted({c for v in valleys for c in valley(rng, *v)} - focus_set)
    add(spread(n_val, cells, np.ones(len(cells)), rng))

    assert sum(households.values()) == total_households
    assert sum(h for c, h in households.items() if c in focus_set) == focus_households
    return {c: population_for(h, rng) for c, h in households.items()}


def write(path, grid, comment):
    lines = [f"# {comment}", "# cell_size=100", "cell_x,cell_y,population"]
    lines += [f"{x},{y},{p}" for (x, y), p in sorted(grid.items())]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "crates/core/data"
    out.mkdir(parents=True, exist_ok=True)

    tynset = municipality(
        seed=2913,
        centre=(100, 100),
        focus=(95, 95, 10),
        focus_households=305,
        total_households=2913,
        villages=[((130, 115), 3), ((70, 80), 3), ((112, 60), 2), ((55, 130), 2), ((145, 70), 2)],
        valleys=[((40, 60), (160, 140), 1), ((100, 30), (100, 170), 1)],
        town_sigma=8,
    )
    write(out / "tynset_synthetic.csv", tynset, "synthetic Tynset-like grid, 2913 households; focus cells x,y in [95,105)")

    vinje = municipality(
        seed=2037,
        centre=(80, 80),
        focus=(75, 75, 10),
        focus_households=180,
        total_households=2037,
        villages=[((120, 95), 3), ((50, 60), 3), ((95, 40), 2), ((60, 120), 2)],
        valleys=[((20, 40), (150, 110), 1), ((80, 10), (70, 150), 1)],
        town_sigma=6,
    )
    write(out / "vinje_synthetic.csv", vinje, "synthetic Vinje-like grid, 2037 households")

    lillehammer = municipality(
        seed=13018,
        centre=(100, 100),
        focus=(95, 95, 10),
        focus_households=2400,
        total_households=13018,
        villages=[((125, 110), 4), ((80, 70), 4), ((115, 140), 3), ((60, 115), 3)],
        valleys=[((60, 40), (140, 160), 2), ((100, 40), (100, 160), 1)],
        town_sigma=12,
    )
    write(out / "lillehammer_synthetic.csv", lillehammer, "synthetic Lillehammer-like grid, 13018 households")


if __name__ == "__main__":
    main()

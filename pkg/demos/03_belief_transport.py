"""Target-presence density under currents, spreading, and sensing.

The belief starts as a uniform disc where the targets were last seen.
Currents carry it, the drift-error diffusivity smears it, and every
camera footprint multiplies the covered cells by (1 - recall). Mass is
conserved exactly by transport and removed only by sensing; what is left
is the probability the target is still out there.

Run:  python3 demos/03_belief_transport.py --out demo_output
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from drift_search import (
    VectorField,
    advance,
    apply_sensing,
    init_uniform_disc,
    make_grid,
)


def rotation(grid, period, center):
    X, Y = grid.cell_centers()
    om = 2.0 * np.pi / period
    return VectorField(grid, -om * (Y - center[1]), om * (X - center[0]))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="demo_output", help="figure directory")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    grid = make_grid((2000.0, 2000.0), 25.0)
    w = rotation(grid, 3600.0, (1000.0, 1000.0))
    diffusivity = 4.1667  # 100 m drift error over a 600 s window
    field = init_uniform_disc((1400.0, 1000.0), 200.0, grid)

    stamps = [0.0, 600.0, 1200.0, 1800.0]
    panels = [field]
    for a, b in zip(stamps, stamps[1:]):
        panels.append(advance(panels[-1], w, diffusivity, b - a))

    # a strip of camera footprints bites into the final panel
    swept = panels[-1]
    for k in range(6):
        x = 700.0 + 90.0 * k
        fp = np.array([(x, 800.0), (x + 95.0, 800.0), (x + 95.0, 1253.4), (x, 1253.4)])
        swept = apply_sensing(swept, [fp], 0.68)
    panels.append(swept)

    titles = [f"t = {int(t)} s" for t in stamps] + ["after 6 camera passes"]
    fig, axes = plt.subplots(1, 5, figsize=(22, 4.6))
    vmax = panels[0].density.values.max()
    x0, y0, x1, y1 = grid.bbox
    for ax, p, title in zip(axes, panels, titles):
        ax.imshow(
            p.density.values,
            origin="lower",
            extent=(x0, x1, y0, y1),
            vmin=0.0,
            vmax=vmax,
            cmap="magma",
        )
        ax.set_title(f"{title}\nmass {p.total_mass:.4f}")
    fig.tight_layout()
    fig.savefig(out / "belief_transport.png", dpi=130)

    for p, title in zip(panels, titles):
        print(f"{title:>24}: mass = {p.total_mass:.12f}, min = {p.density.values.min():.2e}")
    print(f"figures in {out}")


if __name__ == "__main__":
    main()

"""Render a gallery of simulated contact-depth images.

Presses the virtual fingertip against a disc, a box, and an annulus at
increasing penetration depths and writes the resulting contact images as a
PGM strip per shape (plus a single matplotlib overview when available).

    python3 demos/tactile_gallery.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from vitac.images import write_pgm
from vitac.tactile import SensorGeometry, SensorScene, render_contact
from vitac.world import ObjectShape, support_distance

GEOM = SensorGeometry()
SHAPES = [
    ObjectShape("disc", (0.035,)),
    ObjectShape("box", (0.04, 0.025)),
    ObjectShape("annulus", (0.018, 0.04)),
]
PENETRATIONS_MM = [0.5, 1.5, 3.0, 5.0]


def press(shape: ObjectShape, penetration: float, heading: float = 0.35) -> np.ndarray:
    """Place the sensor face so the object intrudes ``penetration`` meters.

    The box is pressed face-on (a corner-first press intrudes deeper than the
    along-ray reach, which would shift the peak above penetration / d_max).
    """
    d_hat = np.array([np.cos(heading), np.sin(heading)])
    theta = heading if shape.kind == "box" else 0.4
    reach = support_distance(shape, theta, -d_hat)
    face = -d_hat * (reach - penetration)
    scene = SensorScene(face, heading, shape, np.zeros(2), theta)
    return render_contact(scene, GEOM)


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "demos/out/tactile_gallery")
    out.mkdir(parents=True, exist_ok=True)

    panels = {}
    for shape in SHAPES:
        row = [press(shape, mm * 1e-3) for mm in PENETRATIONS_MM]
        panels[shape.kind] = row
        strip = np.concatenate(row, axis=1)
        write_pgm(out / f"{shape.kind}.pgm", strip)
        peaks = ", ".join(f"{img.max():.2f}" for img in row)
        print(f"{shape.kind:8s} peak contact at {PENETRATIONS_MM} mm -> {peaks}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print(f"wrote PGM strips to {out} (matplotlib not installed, no figure)")
        return

    fig, axes = plt.subplots(len(SHAPES), len(PENETRATIONS_MM), figsize=(9, 7))
    for i, shape in enumerate(SHAPES):
        for j, img in enumerate(panels[shape.kind]):
            ax = axes[i][j]
            ax.imshow(img, cmap="inferno", vmin=0.0, vmax=1.0)
            ax.set_xticks([])
            ax.set_yticks([])
            if j == 0:
                ax.set_ylabel(shape.kind)
            if i == 0:
                ax.set_title(f"{PENETRATIONS_MM[j]:.1f} mm")
    fig.suptitle("Contact-depth images vs penetration")
    fig.tight_layout()
    fig.savefig(out / "gallery.png", dpi=130)
    print(f"wrote PGM strips and gallery.png to {out}")


if __name__ == "__main__":
    main()

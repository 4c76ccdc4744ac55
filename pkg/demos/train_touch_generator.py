"""Train a small vision-to-touch generator and eyeball its predictions.

Collects a reduced expert dataset at 32x32, trains for a few epochs (about
two minutes on a laptop core), then writes side-by-side strips of camera
input, ground-truth touch, and generated touch for held-out frames.

    python3 demos/train_touch_generator.py [out_dir]
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from vitac.dataset import collect_pairs
from vitac.images import write_pgm, write_ppm
from vitac.tactile import SensorGeometry
from vitac.vtgen import generate, train_generator
from vitac.world import WorldConfig

N_SEQUENCES = 24
EPOCHS = 6


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "demos/out/touch_generator")
    out.mkdir(parents=True, exist_ok=True)

    cfg = WorldConfig(image_size=32, sensor=SensorGeometry(rows=32, cols=32))
    with tempfile.TemporaryDirectory() as tmp:
        print(f"collecting {N_SEQUENCES} expert sequences at 32x32 ...")
        dataset = collect_pairs(cfg, n_sequences=N_SEQUENCES, seed=11, out_dir=tmp)

        print(f"training for {EPOCHS} epochs ...")
        gen, history, test = train_generator(
            dataset, epochs=EPOCHS, batch_size=32, seed=11, log=print
        )
    print(f"held-out: ssim {test['ssim']:.3f}  psnr {test['psnr']:.2f} dB  (n={test['n']})")

    # pick a spread of held-out frames, biased toward contact-rich ones
    rec = max(dataset.split("test"), key=lambda r: r.tactile.mean())
    ts = np.linspace(0, rec.n_frames - 1, 8).astype(int)
    cams, gts, preds = [], [], []
    for t in ts:
        stack = rec.visual[rec.stack_indices(t)]
        cams.append(stack[-1])
        gts.append(rec.tactile[t].astype(np.float32) / 255.0)
        preds.append(generate(gen, stack))

    write_ppm(out / "camera.ppm", np.concatenate(cams, axis=1))
    write_pgm(out / "touch_true.pgm", np.concatenate(gts, axis=1))
    write_pgm(out / "touch_generated.pgm", np.concatenate(preds, axis=1))
    print(f"wrote camera.ppm, touch_true.pgm, touch_generated.pgm to {out}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot([h["epoch"] for h in history], [h["val_ssim"] for h in history], marker="o")
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation SSIM")
    ax.set_title("Vision-to-touch training")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out / "val_ssim.png", dpi=130)
    print(f"wrote val_ssim.png to {out}")


if __name__ == "__main__":
    main()

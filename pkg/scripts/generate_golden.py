"""Regenerate the frozen test fixtures under tests/data/.

Run once and commit the outputs; the regression tests compare against the
committed files, not against a fresh run of this script.
"""

import pathlib

import numpy as np

from vcmcodec.nnet import random_unet_weights, unet_forward

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    bundle = random_unet_weights(in_channels=1, out_channels=1, base_channels=8, seed=42)
    bundle.save(DATA_DIR / "unet_seed42.vcmw")

    rng = np.random.default_rng(20240817)
    x = rng.uniform(0.0, 1.0, size=(16, 16, 1))
    np.save(DATA_DIR / "unet_input_16x16.npy", x)

    y = unet_forward(bundle, x)
    np.save(DATA_DIR / "unet_golden_seed42.npy", y)
    print(f"wrote fixtures to {DATA_DIR}")
    print("output stats:", y.shape, float(y.min()), float(y.max()))


if __name__ == "__main__":
    main()

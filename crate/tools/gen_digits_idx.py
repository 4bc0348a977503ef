#!/usr/bin/env python3
"""Regenerate the bundled handwritten-digits fixture in IDX format.

Takes scikit-learn's offline digits dataset (1797 samples of 8x8 grayscale,
10 classes), upscales each image to 28x28 by 3x nearest-neighbour replication
plus 2px zero padding, and writes the standard IDX image/label pair used by
`fracdiag train --data mnist`.

Output: data/digits/train-images-idx3-ubyte, data/digits/train-labels-idx1-ubyte
"""

import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/digits")
    out_dir.mkdir(parents=True, exist_ok=True)

    digits = load_digits()
    images = digits.images  # (1797, 8, 8), values 0..16
    labels = digits.target.astype(np.uint8)

    # Deterministic shuffle so class labels interleave under any --limit.
    rng = np.random.RandomState(0)
    order = rng.permutation(len(images))
    images, labels = images[order], labels[order]

    # 8x8 -> 24x24 nearest-neighbour, then pad to 28x28.
    up = np.kron(images, np.ones((3, 3)))
    up = np.pad(up, ((0, 0), (2, 2), (2, 2)))
    pixels = np.clip(up * 255.0 / 16.0, 0, 255).astype(np.uint8)

    n, rows, cols = pixels.shape
    img_path = out_dir / "train-images-idx3-ubyte"
    with open(img_path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(pixels.tobytes())

    lbl_path = out_dir / "train-labels-idx1-ubyte"
    with open(lbl_path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.tobytes())

    print(f"wrote {img_path} ({n}x{rows}x{cols}) and {lbl_path}")
    print(f"first 10 labels: {labels[:10].tolist()}")


if __name__ == "__main__":
    main()

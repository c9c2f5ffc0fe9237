#!/usr/bin/env python3
"""Fetch an MNIST subset and write it as IDX files under data/mnist/.

Pulls the `mnist` npm package, which bundles 10,010 real MNIST digit
samples (1,001 per class) as normalized JSON arrays, and converts them
to the standard IDX image/label container format expected by the
dataset loader. Requires `npm` with registry access.

Usage: python3 scripts/fetch_mnist.py [out_dir]
"""

import json
import struct
import subprocess
import sys
import tarfile
import tempfile
from pathlib import Path

SIDE = 28


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), SIDE, SIDE))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "data/mnist")
    out_dir.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=tmp, check=True,
                       stdout=subprocess.DEVNULL)
        (tarball,) = Path(tmp).glob("mnist-*.tgz")
        with tarfile.open(tarball) as tar:
            tar.extractall(tmp)

        images, labels = [], []
        for digit in range(10):
            blob = json.loads(
                (Path(tmp) / "package/src/digits" / f"{digit}.json").read_text()
            )["data"]
            n = len(blob) // (SIDE * SIDE)
            for i in range(n):
                px = blob[i * SIDE * SIDE:(i + 1) * SIDE * SIDE]
                images.append([round(v * 255) for v in px])
                labels.append(digit)

    write_idx_images(out_dir / "train-images-idx3-ubyte", images)
    write_idx_labels(out_dir / "train-labels-idx1-ubyte", labels)
    print(f"wrote {len(images)} samples to {out_dir}")


if __name__ == "__main__":
    main()

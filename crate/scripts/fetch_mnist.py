#!/usr/bin/env python3
"""Build a 10k-digit MNIST subset in IDX format.

The digits come from the `mnist` npm package (10,000 MNIST samples stored as
JSON, 1,000 per class, pixels rounded to 3 decimals).  They are shuffled with a
fixed seed and split 8,000 / 2,000 into

    train-images-idx3-ubyte.gz  train-labels-idx1-ubyte.gz
    t10k-images-idx3-ubyte.gz   t10k-labels-idx1-ubyte.gz

Usage: scripts/fetch_mnist.py [OUT_DIR] [--package DIR]
"""

import argparse
import gzip
import json
import pathlib
import random
import struct
import subprocess
import tarfile
import tempfile

ROWS = COLS = 28
TRAIN = 8000
SEED = 20240


def unpack_npm(workdir: pathlib.Path) -> pathlib.Path:
    subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=workdir, check=True,
                   stdout=subprocess.DEVNULL)
    with tarfile.open(workdir / "mnist-1.1.0.tgz") as tar:
        tar.extractall(workdir)
    return workdir / "package"


def load_digits(package: pathlib.Path):
    samples = []
    for label in range(10):
        raw = json.loads((package / "src" / "digits" / f"{label}.json").read_text())["data"]
        size = ROWS * COLS
        for start in range(0, len(raw) - size + 1, size):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in raw[start:start + size])
            samples.append((pixels, label))
    return samples


def write_idx(out: pathlib.Path, stem: str, samples):
    with gzip.GzipFile(out / f"{stem}-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 2051, len(samples), ROWS, COLS))
        for pixels, _ in samples:
            f.write(pixels)
    with gzip.GzipFile(out / f"{stem}-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("out", nargs="?", default="data/mnist")
    parser.add_argument("--package", help="already-unpacked npm package directory")
    args = parser.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        package = pathlib.Path(args.package) if args.package else unpack_npm(pathlib.Path(tmp))
        samples = load_digits(package)
    random.Random(SEED).shuffle(samples)
    write_idx(out, "train", samples[:TRAIN])
    write_idx(out, "t10k", samples[TRAIN:])
    print(f"wrote {TRAIN} train / {len(samples) - TRAIN} test samples to {out}")


if __name__ == "__main__":
    main()

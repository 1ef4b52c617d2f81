#!/usr/bin/env python3
"""Rebuild data/mnist/*.gz from the digits bundled in the npm `mnist` package.

The package (MIT, v1.1.0) stores 10,000 MNIST digits as JSON arrays of
pixel/255 rounded to three decimals; rounding back recovers the exact bytes.
Each class is split 80/20 in file order into train and test sets, and both
sets are interleaved with a fixed permutation so classes are mixed.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def write_idx(path, magic, dims, payload):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in dims)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + payload)


def main(src, dst):
    src, dst = Path(src), Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for digit in range(10):
        raw = json.loads((src / f"{digit}.json").read_text())["data"]
        pixels = bytes(int(round(v * 255)) for v in raw)
        count = len(pixels) // 784
        images = [pixels[i * 784:(i + 1) * 784] for i in range(count)]
        cut = int(count * 0.8)
        train += [(img, digit) for img in images[:cut]]
        test += [(img, digit) for img in images[cut:]]
    rng = random.Random(20230101)
    for name, rows in (("train", train), ("t10k", test)):
        rng.shuffle(rows)
        write_idx(dst / f"{name}-images-idx3-ubyte.gz", 0x803, (len(rows), 28, 28),
                  b"".join(img for img, _ in rows))
        write_idx(dst / f"{name}-labels-idx1-ubyte.gz", 0x801, (len(rows),),
                  bytes(label for _, label in rows))
        print(name, len(rows))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])

#!/usr/bin/env python3
"""Rebuild the bundled MNIST subset from the `mnist` npm package (v1.1.0).

The package ships 10000 MNIST digits as JSON arrays of byte/255 values rounded
to three decimals; the original bytes are recovered exactly with round(v*255).
Samples are shuffled with a fixed seed and split 8000 train / 2000 test, then
written as gzipped big-endian IDX files.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist
"""
import gzip
import json
import pathlib
import struct
import sys

import numpy as np


def write_idx(path, array):
    magic = 0x0800 | array.ndim
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", n) for n in array.shape)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + array.astype(np.uint8).tobytes())


def main(src, dst):
    src, dst = pathlib.Path(src), pathlib.Path(dst)
    images, labels = [], []
    for digit in range(10):
        data = np.asarray(json.loads((src / f"{digit}.json").read_text())["data"])
        pixels = np.rint(data * 255.0).astype(np.uint8).reshape(-1, 28, 28)
        assert np.allclose(np.round(pixels / 255.0, 3), data.reshape(-1, 28, 28))
        images.append(pixels)
        labels.append(np.full(len(pixels), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(20240601).permutation(len(labels))
    images, labels = images[order], labels[order]
    dst.mkdir(parents=True, exist_ok=True)
    write_idx(dst / "train-subset-images-idx3-ubyte.gz", images[:8000])
    write_idx(dst / "train-subset-labels-idx1-ubyte.gz", labels[:8000])
    write_idx(dst / "test-subset-images-idx3-ubyte.gz", images[8000:])
    write_idx(dst / "test-subset-labels-idx1-ubyte.gz", labels[8000:])


if __name__ == "__main__":
    main(*sys.argv[1:3])

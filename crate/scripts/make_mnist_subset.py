#!/usr/bin/env python3
"""Build a small MNIST subset in IDX format from data bundled in public packages.

Training cases come from the npm ``mnist`` package (about 1000 digits per class,
pixel intensities stored as floats in [0, 1]). Validation cases come from the
5000-image MNIST sample shipped inside the ``mlxtend`` wheel. Both archives can
be fetched from the package registries:

    npm pack mnist
    pip download --no-deps mlxtend

Usage:
    make_mnist_subset.py MNIST_TGZ MLXTEND_WHL OUT_DIR
"""
import gzip
import io
import json
import random
import struct
import sys
import tarfile
import zipfile
from pathlib import Path


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def npm_digits(tgz):
    cases = []
    with tarfile.open(tgz) as tar:
        for digit in range(10):
            member = tar.getmember(f"package/src/digits/{digit}.json")
            data = json.load(tar.extractfile(member))["data"]
            for start in range(0, len(data) - 783, 784):
                pixels = [min(255, max(0, round(v * 255))) for v in data[start:start + 784]]
                cases.append((pixels, digit))
    return cases


def mlxtend_digits(whl):
    cases = []
    with zipfile.ZipFile(whl) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    for line in io.StringIO(raw):
        fields = line.strip().split(",")
        if len(fields) != 785:
            continue
        pixels = [min(255, max(0, int(round(float(v))))) for v in fields[:784]]
        cases.append((pixels, int(float(fields[784]))))
    return cases


def main():
    tgz, whl, out = sys.argv[1], sys.argv[2], Path(sys.argv[3])
    out.mkdir(parents=True, exist_ok=True)
    train = npm_digits(tgz)
    random.Random(0).shuffle(train)
    train = train[:10000]
    val = mlxtend_digits(whl)
    write_images(out / "train-images-idx3-ubyte", [c[0] for c in train])
    write_labels(out / "train-labels-idx1-ubyte", [c[1] for c in train])
    write_images(out / "t10k-images-idx3-ubyte", [c[0] for c in val])
    write_labels(out / "t10k-labels-idx1-ubyte", [c[1] for c in val])
    print(f"train={len(train)} val={len(val)} -> {out}")


if __name__ == "__main__":
    main()

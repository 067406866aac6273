#!/usr/bin/env python3
"""Write a small MNIST subset in IDX format.

The source is the 5000-sample MNIST excerpt bundled with the mlxtend wheel
(mlxtend/data/data/mnist_5k.csv.gz, 500 images per digit). The output is a
class-balanced, seeded shuffle split into a training part and a held-out part.

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 tools/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl data/mnist-subset
"""
import argparse
import gzip
import pathlib
import random
import struct
import zipfile


def write_idx(out_dir, stem, rows, labels):
    with open(out_dir / f"{stem}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for r in rows:
            f.write(bytes(r))
    with open(out_dir / f"{stem}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("wheel")
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=1000)
    ap.add_argument("--test", type=int, default=500)
    ap.add_argument("--seed", type=int, default=1234)
    args = ap.parse_args()

    with zipfile.ZipFile(args.wheel) as z:
        text = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    by_class = {}
    for line in text.strip().split("\n"):
        vals = [int(v) for v in line.split(",")]
        by_class.setdefault(vals[-1], []).append(vals[:-1])

    rng = random.Random(args.seed)
    for rows in by_class.values():
        rng.shuffle(rows)
    per_train = args.train // 10
    per_test = args.test // 10
    train, test = [], []
    for label in sorted(by_class):
        rows = by_class[label]
        train += [(r, label) for r in rows[:per_train]]
        test += [(r, label) for r in rows[per_train:per_train + per_test]]
    rng.shuffle(train)
    rng.shuffle(test)

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out, "train", [r for r, _ in train], [l for _, l in train])
    write_idx(out, "test", [r for r, _ in test], [l for _, l in test])


if __name__ == "__main__":
    main()

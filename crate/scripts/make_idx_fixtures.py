#!/usr/bin/env python3
"""Convert the JSON digit/clothing bundles shipped by the npm packages
`mnist` and `fashion-mnist` into IDX files under data/.

    npm install --prefix /tmp/npmm mnist fashion-mnist
    python3 scripts/make_idx_fixtures.py /tmp/npmm/node_modules data
"""
import json
import random
import struct
import sys
from pathlib import Path


def write_idx(prefix, images, labels):
    n = len(images)
    with open(f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for img in images:
            f.write(bytes(img))
    with open(f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(labels))


def to_u8(values):
    return [max(0, min(255, round(v * 255))) for v in values]


def load_digits(root):
    items = []
    for d in range(10):
        flat = json.load(open(root / "mnist/src/digits" / f"{d}.json"))["data"]
        for i in range(0, len(flat) - 783, 784):
            items.append((to_u8(flat[i:i + 784]), d))
    return items


def load_fashion(root, per_class):
    items = []
    for c in range(10):
        rows = json.load(open(root / "fashion-mnist/src/clothes" / f"{c}.json"))["data"]
        for row in rows[:per_class]:
            items.append((to_u8(row), c))
    return items


def main():
    root, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20201015)

    digits = load_digits(root)[:10000]
    rng.shuffle(digits)
    train, test = digits[:8000], digits[8000:]
    write_idx(out / "digits-train", [x for x, _ in train], [y for _, y in train])
    write_idx(out / "digits-test", [x for x, _ in test], [y for _, y in test])

    fashion = load_fashion(root, 200)
    rng.shuffle(fashion)
    write_idx(out / "fashion-test", [x for x, _ in fashion], [y for _, y in fashion])


if __name__ == "__main__":
    main()

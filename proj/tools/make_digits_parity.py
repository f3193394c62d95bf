"""Writes tests/data/digits_parity.libsvm: sklearn's 8x8 digits, even vs odd.

Pixels (0..16) are mapped to [-1, 1]; even digits are +1.
"""
import pathlib
import sys

from sklearn.datasets import load_digits

out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data/digits_parity.libsvm")
d = load_digits()
with out.open("w", newline="\n") as f:
    for row, t in zip(d.data, d.target):
        feats = " ".join(f"{j + 1}:{v / 8.0 - 1.0:.6g}" for j, v in enumerate(row) if v / 8.0 - 1.0 != 0)
        f.write(("+1" if t % 2 == 0 else "-1") + (" " + feats if feats else "") + "\n")
print(f"wrote {len(d.target)} samples to {out}")

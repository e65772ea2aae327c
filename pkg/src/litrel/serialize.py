"""Deterministic on-disk array storage.

Arrays are stored as individual ``.npy`` files in a directory (the .npy
format carries no timestamps, so unchanged inputs reproduce byte-identical
artifacts, unlike zip-based ``.npz``).
"""

from __future__ import annotations

import os

import numpy as np


def save_arrays(directory: str, arrays: dict[str, np.ndarray]) -> None:
    os.makedirs(directory, exist_ok=True)
    for name, array in arrays.items():
        np.save(os.path.join(directory, name + ".npy"), array)


def load_arrays(directory: str) -> dict[str, np.ndarray]:
    out = {}
    for filename in sorted(os.listdir(directory)):
        if filename.endswith(".npy"):
            out[filename[:-4]] = np.load(os.path.join(directory, filename))
    return out

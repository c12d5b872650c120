"""Weight container, ESWT binary serialization, and deterministic init.

ESWT layout (all integers little-endian, no padding):

    magic "ESWT" | u32 version=1 | u64 entry_count
    per entry: u32 name_len | name UTF-8 | u32 ndim | u64 dims[ndim]
               | raw float32 data, little-endian

Entries keep insertion order; lookup is by name.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FileFormatError
from .network import NetworkSpec, weight_entries

MAGIC = b"ESWT"
VERSION = 1


@dataclass
class WeightStore:
    """Ordered map of parameter name -> float32 array."""

    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, name: str, array: np.ndarray) -> None:
        if name in self.entries:
            raise FileFormatError(f"duplicate weight name {name!r}")
        self.entries[name] = np.ascontiguousarray(array, dtype=np.float32)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def items(self):
        return self.entries.items()

    def total_elements(self) -> int:
        return sum(a.size for a in self.entries.values())


def save_eswt(store: WeightStore, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(store)))
        for name, arr in store.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_eswt(path: str | os.PathLike) -> WeightStore:
    with open(path, "rb") as fh:
        blob = fh.read()

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise FileFormatError(f"truncated ESWT file {path}: while reading {what}")
        chunk = blob[offset : offset + n]
        offset += n
        return chunk

    offset = 0
    if take(4, "magic") != MAGIC:
        raise FileFormatError(f"bad magic in {path}: not an ESWT file")
    version, count = struct.unpack("<IQ", take(12, "header"))
    if version != VERSION:
        raise FileFormatError(f"unsupported ESWT version {version} in {path}")
    store = WeightStore()
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4, "ndim"))
        dims = struct.unpack(f"<{ndim}Q", take(8 * ndim, "dims"))
        n_elem = 1
        for d in dims:
            n_elem *= d
        data = np.frombuffer(take(4 * n_elem, f"data of {name!r}"), dtype="<f4")
        if name in store:
            raise FileFormatError(f"duplicate weight name {name!r} in {path}")
        store.add(name, data.reshape(dims))
    if offset != len(blob):
        raise FileFormatError(f"{path}: {len(blob) - offset} trailing bytes after last entry")
    return store


def kaiming_init(spec: NetworkSpec, seed: int) -> WeightStore:
    """Deterministic Kaiming-normal initialization for every layer in ``spec``.

    Conv weights draw from Normal(0, sqrt(2 / fan_in)) with
    fan_in = Cin * kd * kh * kw; biases and norm betas are zero, norm gammas
    one.  Identical seeds give bit-identical stores.
    """
    rng = np.random.default_rng(seed)
    store = WeightStore()
    for entry in weight_entries(spec):
        if entry.role == "conv":
            fan_in = math.prod(entry.dims[1:])
            std = np.sqrt(2.0 / fan_in)
            arr = rng.standard_normal(entry.dims, dtype=np.float32) * np.float32(std)
        elif entry.role == "gamma":
            arr = np.ones(entry.dims, dtype=np.float32)
        else:  # bias / beta
            arr = np.zeros(entry.dims, dtype=np.float32)
        store.add(entry.name, arr)
    return store

"""Named parameter registry and the binary checkpoint format."""
from __future__ import annotations

import struct

import numpy as np

from lanegraph.autodiff.tensor import Tensor
from lanegraph.errors import CheckpointVersionError, ContractError

MAGIC = b"SPSC"
VERSION = 1


class ParamRegistry:
    """Ordered name -> Tensor map with per-parameter optimizer slots."""

    def __init__(self, seed=0):
        self._params: dict[str, Tensor] = {}
        self.state: dict[str, dict[str, np.ndarray]] = {}
        self.rng = np.random.default_rng(seed)

    def __iter__(self):
        return iter(self._params.items())

    def __len__(self):
        return len(self._params)

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name) -> Tensor:
        return self._params[name]

    def names(self):
        return list(self._params)

    def add(self, name, value) -> Tensor:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def uniform(self, name, shape, fan_in) -> Tensor:
        bound = 1.0 / np.sqrt(fan_in)
        return self.add(name, self.rng.uniform(-bound, bound, size=shape))

    def zeros(self, name, shape) -> Tensor:
        return self.add(name, np.zeros(shape))

    def ones(self, name, shape) -> Tensor:
        return self.add(name, np.ones(shape))

    def zero_grad(self):
        for _, p in self:
            p.grad = None

    def num_scalars(self):
        return int(sum(p.data.size for _, p in self))


def save_checkpoint(path, params: ParamRegistry, extra=None):
    """Write parameters, then optimizer slots and ``extra`` arrays, as records.

    Layout: ``SPSC`` | u32 version | records until EOF, each record being
    u32 name length, name bytes, u32 rank, u32 dims..., little-endian f64 data.
    """
    records = [(name, p.data) for name, p in params]
    for name, slots in params.state.items():
        for slot, arr in slots.items():
            records.append((f"optim.{slot}.{name}", arr))
    for name, arr in (extra or {}).items():
        records.append((name, np.asarray(arr, dtype=np.float64)))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        for name, arr in records:
            raw = name.encode("utf-8")
            arr = np.asarray(arr, dtype="<f8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr).tobytes())


def read_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointVersionError(f"{path}: not a checkpoint (bad magic {blob[:4]!r})")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise CheckpointVersionError(
            f"{path}: checkpoint version {version}, this build reads version {VERSION}"
        )
    out = {}
    pos = 8
    while pos < len(blob):
        (n,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        name = blob[pos:pos + n].decode("utf-8")
        pos += n
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        out[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(dims).copy()
        pos += 8 * count
    return out


def load_checkpoint(path, params: ParamRegistry) -> dict[str, np.ndarray]:
    """Load into ``params`` in place; returns records that are not parameters."""
    records = read_checkpoint(path)
    for name, p in params:
        if name not in records:
            raise ContractError(f"checkpoint {path} lacks parameter {name!r}")
        if records[name].shape != p.shape:
            raise ContractError(
                f"parameter {name!r}: checkpoint shape {records[name].shape}, model {p.shape}"
            )
        p.data = records.pop(name)
    params.state = {}
    rest = {}
    for key, arr in records.items():
        if key.startswith("optim."):
            _, slot, name = key.split(".", 2)
            params.state.setdefault(name, {})[slot] = arr
        else:
            rest[key] = arr
    return rest

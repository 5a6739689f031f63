"""Sampled fields on tensor grids and their on-disk formats."""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"KLAB"
FORMAT_VERSION = 1


@dataclass
class GridField:
    """Scalar field sampled on a tensor grid.

    Parameters
    ----------
    axes : tuple of ndarray
        Uniform 1-D node arrays, one per dimension, in the axis order of
        ``values``.
    values : ndarray
        Samples with ``values.shape == tuple(len(a) for a in axes)``.
    names : tuple of str
        Axis labels, e.g. ``("v", "x", "t")``.
    bc : dict
        Free-form boundary descriptor.
    """

    axes: tuple
    values: np.ndarray
    names: tuple = ()
    bc: dict = field(default_factory=dict)
    cfl: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        self.values = np.asarray(self.values, dtype=float)
        if not self.names:
            self.names = tuple(f"x{i}" for i in range(len(self.axes)))
        expect = tuple(len(a) for a in self.axes)
        if self.values.shape != expect:
            raise ValueError(f"values shape {self.values.shape} != grid {expect}")

    @property
    def spacings(self):
        return tuple(float(a[1] - a[0]) if len(a) > 1 else 0.0 for a in self.axes)

    @property
    def bounds(self):
        return tuple((float(a[0]), float(a[-1])) for a in self.axes)

    def axis(self, name):
        return self.axes[self.names.index(name)]

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def weights(self):
        """Tensor trapezoid weights."""
        w = np.ones(())
        for a in self.axes:
            wa = np.full(len(a), a[1] - a[0] if len(a) > 1 else 1.0)
            if len(a) > 1:
                wa[0] *= 0.5
                wa[-1] *= 0.5
            w = np.multiply.outer(w, wa)
        return w

    def to_csv(self, path):
        cols = [m.ravel() for m in self.mesh()]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\r\n")
            wr.writerow(list(self.names) + ["value"])
            for row in zip(*cols, self.values.ravel()):
                wr.writerow([repr(float(c)) for c in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            data = np.array([[float(c) for c in row] for row in rd])
        names = tuple(header[:-1])
        axes = tuple(np.unique(data[:, k]) for k in range(len(names)))
        vals = data[:, -1].reshape(tuple(len(a) for a in axes))
        return cls(axes, vals, names)

    def to_binary(self, path, dt=0.0, seed=0):
        write_binary(path, self.values, dt=dt, seed=seed)


def write_binary(path, array, dt=0.0, seed=0):
    """Write ``array`` in the KLAB column format.

    Layout: magic ``KLAB``, ``u32`` version, ``u32`` rank, ``rank`` x ``u64``
    dims, ``f64`` dt, ``u64`` seed, then little-endian float64 data in C
    order (path-major for ensembles).
    """
    arr = np.ascontiguousarray(array, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(struct.pack("<dQ", float(dt), int(seed) & 0xFFFFFFFFFFFFFFFF))
        fh.write(arr.tobytes())


def read_binary(path):
    """Inverse of :func:`write_binary`; returns ``(array, dt, seed)``."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError("not a KLAB file")
        version, ndim = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported KLAB version {version}")
        dims = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        dt, seed = struct.unpack("<dQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(dims)
    return data.copy(), dt, seed

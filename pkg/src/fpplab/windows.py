"""Finite windows of Z-indexed sequences, with boundary policies and masks."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class PolicyKind(Enum):
    EMPTY_STORE = "empty_store"   # declare the store empty at this edge
    ZERO_PAD = "zero"             # missing neighbors read as 0
    EXPLICIT = "explicit"         # neighbor values supplied
    UNBOUNDED = "unbounded"       # missing neighbors read as +inf


@dataclass(frozen=True)
class BoundaryPolicy:
    kind: PolicyKind
    values: tuple = ()

    @staticmethod
    def empty_store() -> "BoundaryPolicy":
        return BoundaryPolicy(PolicyKind.EMPTY_STORE)

    @staticmethod
    def zero() -> "BoundaryPolicy":
        return BoundaryPolicy(PolicyKind.ZERO_PAD)

    @staticmethod
    def explicit(*values: float) -> "BoundaryPolicy":
        return BoundaryPolicy(PolicyKind.EXPLICIT, tuple(float(v) for v in values))

    @staticmethod
    def unbounded() -> "BoundaryPolicy":
        return BoundaryPolicy(PolicyKind.UNBOUNDED)

    def neighbor(self, depth: int = 0) -> float:
        """Value of the missing neighbor `depth` steps beyond the edge."""
        if self.kind is PolicyKind.ZERO_PAD:
            return 0.0
        if self.kind is PolicyKind.UNBOUNDED:
            return np.inf
        if self.kind is PolicyKind.EXPLICIT:
            if depth < len(self.values):
                return self.values[depth]
            raise IndexError("explicit boundary exhausted")
        raise ValueError(f"{self.kind} supplies no neighbor values")


@dataclass
class Window:
    """A contiguous slice values[k - offset] of a Z-indexed sequence."""

    values: np.ndarray
    offset: int = 0
    left: BoundaryPolicy = field(default_factory=BoundaryPolicy.zero)
    right: BoundaryPolicy = field(default_factory=BoundaryPolicy.zero)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("windows are one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("window values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def start(self) -> int:
        return self.offset

    @property
    def stop(self) -> int:
        return self.offset + len(self.values)

    def index(self, k: int) -> float:
        return float(self.values[k - self.offset])

    def slice(self, start: int, stop: int) -> "Window":
        a, b = start - self.offset, stop - self.offset
        if a < 0 or b > len(self.values):
            raise IndexError("slice outside window")
        return Window(self.values[a:b].copy(), start, self.left, self.right)

    def to_json(self) -> str:
        def pol(p: BoundaryPolicy):
            return {"kind": p.kind.value, "values": list(p.values)}
        return json.dumps({"offset": self.offset, "values": self.values.tolist(),
                           "left": pol(self.left), "right": pol(self.right)},
                          sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "Window":
        d = json.loads(text)
        def pol(e):
            return BoundaryPolicy(PolicyKind(e["kind"]), tuple(e["values"]))
        return Window(np.asarray(d["values"], dtype=float), d["offset"],
                      pol(d["left"]), pol(d["right"]))

    def to_binary(self) -> bytes:
        head = struct.pack("<q i", self.offset, len(self.values))
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @staticmethod
    def from_binary(blob: bytes) -> "Window":
        offset, n = struct.unpack_from("<q i", blob)
        vals = np.frombuffer(blob, dtype="<f8", count=n,
                             offset=struct.calcsize("<q i"))
        return Window(vals.copy(), offset)


@dataclass
class MaskedWindow:
    """A window plus a per-entry validity mask.

    Valid entries are those the producing operation certifies as equal to the
    value a bi-infinite computation would give (exactly for blocking-certified
    maps, anchored for store maps; see each map's docstring).
    """

    window: Window
    valid: np.ndarray

    def __post_init__(self):
        self.valid = np.asarray(self.valid, dtype=bool)
        assert self.valid.shape == self.window.values.shape

    def __len__(self) -> int:
        return len(self.window)

    @property
    def values(self) -> np.ndarray:
        return self.window.values

    @property
    def offset(self) -> int:
        return self.window.offset

    def valid_slice(self) -> tuple[int, int]:
        """Largest contiguous [start, stop) of valid absolute indices."""
        idx = np.flatnonzero(self.valid)
        if len(idx) == 0:
            return (self.offset, self.offset)
        # the maps here produce one contiguous valid run; take the longest
        runs = np.split(idx, np.where(np.diff(idx) > 1)[0] + 1)
        best = max(runs, key=len)
        return (self.offset + int(best[0]), self.offset + int(best[-1]) + 1)

"""Lattice environments: per-vertex incoming edge weights and their generation.

A vertex (i, j) of a width x height grid owns its two incoming edge weights:
``w1[i, j]`` on the horizontal edge from (i-1, j) and ``w2[i, j]`` on the
vertical edge from (i, j-1).  Arrays are indexed [i, j] = [column, row].

Generation is counter-based: vertex (i, j) consumes the fixed block of four
uniforms at positions 4*(j*width + i) .. +3 of the stream (seed, stream 0), so
the same seed reproduces the same grid, draws are order-independent, and a
taller grid of the same width extends a shorter one without disturbing it.
Rows can therefore also be produced lazily for grids too large to hold.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .laws import ConstZero, WeightLaw, parse_law
from .rng import RngStream

_MAGIC = b"FPPENV1\x00"
_VERSION = 1
_UNIFORMS_PER_VERTEX = 4


class ModelFamily(Enum):
    SWFPP = "swfpp"
    SJR = "sjr"
    GENERAL = "general"


@dataclass(frozen=True)
class ModelKind:
    family: ModelFamily
    switch_prob: float | None = None   # SJR only: P(the horizontal edge is live)

    def __post_init__(self):
        if self.family is ModelFamily.SJR:
            if self.switch_prob is None or not 0.0 < self.switch_prob < 1.0:
                raise ValueError("SJR switch probability must lie in (0, 1)")
        elif self.switch_prob is not None:
            raise ValueError("switch probability only applies to SJR")

    @staticmethod
    def swfpp() -> "ModelKind":
        return ModelKind(ModelFamily.SWFPP)

    @staticmethod
    def sjr(alpha: float) -> "ModelKind":
        return ModelKind(ModelFamily.SJR, alpha)

    @staticmethod
    def general() -> "ModelKind":
        return ModelKind(ModelFamily.GENERAL)


@dataclass
class Environment:
    width: int
    height: int
    w1: np.ndarray          # shape (width, height)
    w2: np.ndarray
    model: ModelKind
    seed: int
    law: WeightLaw | None = None

    def __post_init__(self):
        assert self.w1.shape == (self.width, self.height)
        assert self.w2.shape == (self.width, self.height)

    def check_invariants(self) -> None:
        if self.model.family is ModelFamily.SWFPP:
            if not np.all(self.w2 == 0.0) or not np.all(self.w1 >= 0.0):
                raise ValueError("SWFPP requires w2 == 0 and w1 >= 0")
        elif self.model.family is ModelFamily.SJR:
            one_zero = (self.w1 == 0.0) | (self.w2 == 0.0)
            if not np.all(one_zero) or not np.all(self.w1 >= 0.0) or not np.all(self.w2 >= 0.0):
                raise ValueError("SJR requires one zero incoming weight per vertex")


def _vertex_uniform_rows(law_stream: RngStream, width: int, j0: int, j1: int) -> np.ndarray:
    """Uniform block for rows j0..j1-1: shape (j1-j0, width, 4)."""
    start = _UNIFORMS_PER_VERTEX * j0 * width
    n = _UNIFORMS_PER_VERTEX * (j1 - j0) * width
    u = law_stream.uniforms(n, start=start)
    return u.reshape(j1 - j0, width, _UNIFORMS_PER_VERTEX)


def weight_rows(model: ModelKind, law: WeightLaw, width: int, seed: int,
                j0: int, j1: int) -> tuple[np.ndarray, np.ndarray]:
    """(w1, w2) for rows j0..j1-1, shape (j1-j0, width) each, row-major in j.

    This is the single source of truth for grid randomness; whole-grid
    generation and streaming DP both call it.
    """
    u = _vertex_uniform_rows(RngStream(seed, 0), width, j0, j1)
    if model.family is ModelFamily.SWFPP:
        w1 = law.from_uniforms(u[..., 0], u[..., 1])
        return w1, np.zeros_like(w1)
    if model.family is ModelFamily.SJR:
        live = u[..., 2] < model.switch_prob
        w = law.from_uniforms(u[..., 0], u[..., 1])
        return np.where(live, w, 0.0), np.where(live, 0.0, w)
    w1 = law.from_uniforms(u[..., 0], u[..., 1])
    w2 = law.from_uniforms(u[..., 2], u[..., 3])
    return w1, w2


def generate_environment(model: ModelKind, law: WeightLaw, width: int, height: int,
                         seed: int) -> Environment:
    if width < 1 or height < 1:
        raise ValueError("dims must be >= 1")
    if model.family in (ModelFamily.SWFPP, ModelFamily.SJR):
        # the directed models need nonnegative weights; every law here is
        # nonnegative by construction, but keep the contract explicit
        if isinstance(law, WeightLaw) and float(law.cdf(-1e-12)) > 0.0:
            raise ValueError("SWFPP/SJR require nonnegative weights")
    w1r, w2r = weight_rows(model, law, width, seed, 0, height)
    env = Environment(width, height, np.ascontiguousarray(w1r.T),
                      np.ascontiguousarray(w2r.T), model, seed, law)
    env.check_invariants()
    return env


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_MODEL_TAGS = {ModelFamily.SWFPP: 1, ModelFamily.SJR: 2, ModelFamily.GENERAL: 3}
_TAGS_MODEL = {v: k for k, v in _MODEL_TAGS.items()}


def write_environment(env: Environment, path) -> None:
    """Binary layout: magic, version, dims, model tag (+switch prob), seed;
    then row-major float64 bodies, w1 first then w2."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIIId q", _VERSION, env.width, env.height,
                             _MODEL_TAGS[env.model.family],
                             env.model.switch_prob or 0.0, env.seed))
        fh.write(np.ascontiguousarray(env.w1.T, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(env.w2.T, dtype="<f8").tobytes())


def read_environment(path) -> Environment:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not an environment file")
        version, width, height, tag, alpha, seed = struct.unpack(
            "<IIIId q", fh.read(struct.calcsize("<IIIId q")))
        if version != _VERSION:
            raise ValueError(f"unsupported version {version}")
        n = width * height
        w1 = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(height, width).T.copy()
        w2 = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(height, width).T.copy()
    family = _TAGS_MODEL[tag]
    model = ModelKind(family, alpha if family is ModelFamily.SJR else None)
    return Environment(width, height, w1, w2, model, seed)


def environment_to_json(env: Environment) -> str:
    return json.dumps({
        "width": env.width, "height": env.height, "seed": env.seed,
        "model": env.model.family.value, "switch_prob": env.model.switch_prob,
        "w1": env.w1.T.tolist(), "w2": env.w2.T.tolist(),
    }, sort_keys=True)


def environment_from_json(text: str) -> Environment:
    d = json.loads(text)
    family = ModelFamily(d["model"])
    model = ModelKind(family, d["switch_prob"] if family is ModelFamily.SJR else None)
    return Environment(d["width"], d["height"],
                       np.asarray(d["w1"], dtype=float).T.copy(),
                       np.asarray(d["w2"], dtype=float).T.copy(),
                       model, d["seed"])

"""Discrete-time TASEP engines and the particle/passage-time dictionary.

Positions are nondecreasing reals with +/-inf sentinels allowed at the window
edges; min with +inf is the identity, so the update formulas stay branch-free
exactly as the half-infinite initial conditions require.

parallel_step: every particle caps at its front neighbor's OLD position,
    eta'_k = (eta_k + W_k) ^ eta_{k+1}.
sequential_step: the sweep runs front-to-back, so each particle caps at its
    front neighbor's NEW position, eta'_k = (eta_k + W_k) ^ eta'_{k+1}.
    (Gaps of this step are exactly the low-index-first tandem update v_map;
    the cross-module test pins the convention.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import Environment, ModelFamily
from .laws import WeightLaw
from .percolation import passage_field
from .rng import RngStream
from .windows import Window


@dataclass
class ParticleConfig:
    positions: np.ndarray     # nondecreasing; +/-inf only at the edges

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        interior = self.positions[np.isfinite(self.positions)]
        if np.any(np.diff(self.positions) < 0):
            raise ValueError("positions must be nondecreasing")

    def __len__(self) -> int:
        return len(self.positions)

    def gaps(self) -> np.ndarray:
        return np.diff(self.positions)


@dataclass
class OccupationConfig:
    """Binary occupation on a Z-window; inter-particle distances = gaps + 1
    under the exclusion embedding eta_hat_k = eta_k + k."""

    occupied: np.ndarray
    offset: int = 0

    @staticmethod
    def from_positions(pos: np.ndarray, offset: int = 0) -> "OccupationConfig":
        pos = np.asarray(pos)
        if np.any(np.diff(pos) < 1):
            raise ValueError("occupation configs need strictly spaced particles")
        width = int(pos[-1] - pos[0]) + 1
        occ = np.zeros(width, dtype=bool)
        occ[(pos - pos[0]).astype(int)] = True
        return OccupationConfig(occ, offset + int(pos[0]))

    def positions(self) -> np.ndarray:
        return np.flatnonzero(self.occupied) + self.offset

    def store_gaps(self) -> np.ndarray:
        """Exclusion distances minus one: the store-model gap variables."""
        return np.diff(self.positions()) - 1.0


def parallel_step(eta: ParticleConfig, W: Window | np.ndarray,
                  right_sentinel: float = np.inf) -> ParticleConfig:
    w = W.values if isinstance(W, Window) else np.asarray(W, dtype=float)
    pos = eta.positions
    front = np.concatenate([pos[1:], [right_sentinel]])
    return ParticleConfig(np.minimum(pos + w, front))


def sequential_step(eta: ParticleConfig, W: Window | np.ndarray,
                    right_sentinel: float = np.inf) -> ParticleConfig:
    """Front-to-back sweep: suffix recursion, vectorized.

    eta'_k = (eta_k + W_k) ^ eta'_{k+1} unrolls to
    min_{l >= k} (eta_l + W_l) ^ sentinel, a reversed running minimum.
    """
    w = W.values if isinstance(W, Window) else np.asarray(W, dtype=float)
    pos = eta.positions
    moved = pos + w
    sfx = np.flip(np.minimum.accumulate(np.flip(np.minimum(moved, right_sentinel))))
    return ParticleConfig(sfx)


def run(kind: str, init: ParticleConfig, T: int, weight_law: WeightLaw,
        seed: int, right_sentinel: float = np.inf) -> list[ParticleConfig]:
    """T steps with fresh i.i.d. jump rows; returns the whole trajectory."""
    step = {"parallel": parallel_step, "sequential": sequential_step}[kind]
    rng = RngStream(seed, 0)
    traj = [init]
    n = len(init)
    cur = init
    for t in range(T):
        w = weight_law.sample(rng.split(t), size=n)
        cur = step(cur, w, right_sentinel)
        traj.append(cur)
    return traj


def passage_identity_residual(env: Environment, k_depth: int, t_steps: int) -> float:
    """max |eta_{-m, t} - L(0, (t - m, m))| over the covered range; exactly 0.

    Stacked start (eta_{k,0} = 0 for k <= 0, +inf for k >= 1) run under the
    parallel step with jump of particle -m at step t equal to the horizontal
    weight into column t+1-m of row m; positions then coincide with the
    passage times along the antidiagonal index.
    """
    if env.model.family is not ModelFamily.SWFPP:
        raise ValueError("the particle identity is for SWFPP environments")
    if t_steps + 1 > env.width or k_depth + 1 > env.height:
        raise ValueError("environment too small for the requested range")
    field = passage_field(env)
    m_idx = np.arange(k_depth + 1)             # particle -m at slot m
    pos = np.zeros(k_depth + 1)
    worst = 0.0
    for t in range(t_steps + 1):
        if t > 0:
            cols = t - m_idx                    # t+1-m-1 = column of the step-t weight minus...
            w = np.where(cols >= 0, env.w1[np.clip(cols, 0, None), m_idx], 0.0)
            front = np.concatenate([[np.inf], pos[:-1]])   # particle -(m-1) is in front of -m
            pos = np.minimum(pos + w, front)
        ms = m_idx[m_idx <= min(t, k_depth)]
        li = t - ms
        diffs = np.abs(pos[ms] - field.grid[li, ms])
        worst = max(worst, float(diffs.max())) if len(diffs) else worst
    return worst


def multiclass_invariance_experiment(mean_vec, weight_law: WeightLaw, window_len: int,
                                     T: int, seed: int) -> dict:
    """Parallel TASEP with the multi-line gap law: before/after marginals.

    Gaps are sampled from the A-kind multi-line distribution, particles run T
    parallel steps with i.i.d. jumps from `weight_law`, and the report carries
    the trimmed before/after gap samples per class plus ordering diagnostics;
    the stats layer turns these into KS/chi-square verdicts.
    """
    from .multiline import MAP_A, MeanVector, sample_multiline

    mv = mean_vec if isinstance(mean_vec, MeanVector) else MeanVector(tuple(mean_vec), MAP_A)
    sample = sample_multiline(mv, weight_law, window_len, seed)
    n = len(mv)
    rng = RngStream(seed, 99)
    # the classes are coupled: every line's particles move with the SAME jump
    # rows, which is exactly the joint invariance being exercised
    jump_rows = [weight_law.sample(rng.split(t), size=window_len + 1) for t in range(T)]
    before, after = [], []
    for k in range(n):
        gaps0 = sample.lines[k]
        cur = ParticleConfig(np.concatenate([[0.0], np.cumsum(gaps0)]))
        for t in range(T):
            cur = parallel_step(cur, jump_rows[t])
        gT = cur.gaps()
        tr = slice(max(sample.valid_from, int(0.1 * window_len)), int(0.9 * window_len))
        before.append(gaps0[tr])
        after.append(gT[tr])
    ordering_before = all(np.all(before[k - 1] >= before[k]) for k in range(1, n))
    ordering_after = all(np.all(after[k - 1] >= after[k]) for k in range(1, n))
    return {"before": before, "after": after, "T": T,
            "ordering_before": bool(ordering_before),
            "ordering_after": bool(ordering_after)}

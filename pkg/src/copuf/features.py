"""
Attack-side challenge-to-feature transforms.

The plain transform yields the n non-constant parity entries; the
constant term is dropped because the network bias absorbs it.  For
feed-forward geometries the challenge is split at the loop end positions
(excluding the end bits themselves, which the attacker cannot observe)
and each sub-challenge is transformed independently; the concatenation
has n - k entries for k end positions.
"""
from __future__ import annotations

import numpy as np

from .composites import (
    ApufInstance,
    FfApufInstance,
    IpufInstance,
    MnApufInstance,
    OaxFfInstance,
    PufInstance,
    XorFfInstance,
)
from .core import validate_challenge


def _sub_parity(signs: np.ndarray) -> np.ndarray:
    return np.cumprod(signs[:, ::-1], axis=1)[:, ::-1]


def plain_features(c: np.ndarray) -> np.ndarray:
    """Parity features phi[0..n-1] of the whole challenge (constant term
    omitted).  Accepts (n,) or (N, n); returns float rows in {-1, +1}."""
    c = validate_challenge(c)
    single = c.ndim == 1
    signs = 1.0 - 2.0 * np.atleast_2d(c).astype(np.float64)
    out = _sub_parity(signs)
    return out[0] if single else out


def ff_features(c: np.ndarray, end_positions) -> np.ndarray:
    """Concatenated sub-challenge parities for a feed-forward geometry.

    The challenge is divided at each 1-based end position; the end bits
    are excluded and every sub-challenge is transformed on its own.
    Output dimension is n - k.
    """
    c = validate_challenge(c)
    single = c.ndim == 1
    rows = np.atleast_2d(c)
    n = rows.shape[1]
    ends = tuple(sorted(end_positions))
    if len(set(ends)) != len(ends):
        raise ValueError(f"duplicate end positions: {ends}")
    if ends and (ends[0] < 1 or ends[-1] > n):
        raise ValueError(f"end positions out of range 1..{n}: {ends}")

    blocks = []
    start = 0  # 0-based start of the current sub-challenge
    for e in ends + (n + 1,):
        stop = min(e - 1, n)  # exclude the end bit itself
        if stop > start:
            signs = 1.0 - 2.0 * rows[:, start:stop].astype(np.float64)
            blocks.append(_sub_parity(signs))
        start = e
    out = np.concatenate(blocks, axis=1) if blocks else np.empty((rows.shape[0], 0))
    return out[0] if single else out


def feature_dim(n: int, end_positions=()) -> int:
    return n - len(tuple(end_positions))


def feature_map_for(inst: PufInstance):
    """Feature transform an attacker would use against an instance.

    Feed-forward based designs assume the (homogeneous) loop geometry is
    known and use the sub-challenge transform; the auxiliary-driven and
    interpose designs expose only the raw n-bit challenge, so the plain
    transform applies.  Returns (callable, dim).
    """
    if isinstance(inst, FfApufInstance):
        ends = inst.end_positions
    elif isinstance(inst, XorFfInstance):
        ends = inst.members[0].end_positions
    elif isinstance(inst, OaxFfInstance):
        member = (inst.or_members + inst.and_members + inst.xor_members)[0]
        ends = member.end_positions
    elif isinstance(inst, (ApufInstance, MnApufInstance, IpufInstance)):
        return plain_features, inst.n
    else:
        raise TypeError(f"unknown instance type {type(inst).__name__}")
    return (lambda c: ff_features(c, ends)), feature_dim(inst.n, ends)

"""
Reliability and uniformity measurement protocols.

Reliability is reported through its complement, the bit error rate: a
fixed set of uniformly random challenges is queried repeatedly under
noise and compared against a reference response per challenge.  The
default reference is the noise-free golden response (a simulation
privilege; unambiguous and lower variance); a majority-vote reference
over the noisy repeats is available for comparison.  Uniformity is the
fraction of 1-responses over random challenges, noise free.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .composites import PufInstance, arch_tag, respond
from .core import GOLDEN, calibrated_noise


@dataclass(frozen=True)
class MetricsReport:
    arch: str
    ber: float
    uniformity: float
    challenges_used: int
    repeats: int
    sigma_noise: float
    seed: int
    reference: str  # "golden" or "majority"

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"ber out of range: {self.ber}")
        if not 0.0 <= self.uniformity <= 1.0:
            raise ValueError(f"uniformity out of range: {self.uniformity}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def _challenges(inst, n_challenges: int, seed: int) -> np.ndarray:
    return np.random.default_rng([seed, 0]).integers(
        0, 2, size=(n_challenges, inst.n), dtype=np.uint8
    )


def measure_ber(
    inst: PufInstance,
    sigma: float,
    n_challenges: int = 10_000,
    repeats: int = 11,
    seed: int = 0,
    reference: str = "golden",
) -> float:
    """Fraction of noisy responses differing from the per-challenge
    reference, over ``n_challenges`` challenges queried ``repeats`` times.

    ``sigma`` is nominal; the pinned calibration constant is applied.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if reference not in ("golden", "majority"):
        raise ValueError(f"unknown reference mode {reference!r}")
    challenges = _challenges(inst, n_challenges, seed)
    noise = calibrated_noise(sigma)
    rng = np.random.default_rng([seed, 1])
    if sigma == 0:
        rng = None
    noisy = np.empty((repeats, n_challenges), dtype=np.uint8)
    for rep in range(repeats):
        noisy[rep] = respond(inst, challenges, noise, rng)
    if reference == "golden":
        ref = np.asarray(respond(inst, challenges, GOLDEN, None), dtype=np.uint8)
    else:
        ref = (noisy.sum(axis=0) * 2 > repeats).astype(np.uint8)
    return float((noisy != ref[None, :]).mean())


def measure_uniformity(inst: PufInstance, n_challenges: int = 10_000, seed: int = 0) -> float:
    """Fraction of 1-responses over random challenges, noise free."""
    challenges = _challenges(inst, n_challenges, seed)
    return float(np.asarray(respond(inst, challenges, GOLDEN, None)).mean())


def measure(
    inst: PufInstance,
    sigma: float,
    n_challenges: int = 10_000,
    repeats: int = 11,
    seed: int = 0,
    reference: str = "golden",
) -> MetricsReport:
    """BER and uniformity under the standard protocol, as one report."""
    return MetricsReport(
        arch=arch_tag(inst),
        ber=measure_ber(inst, sigma, n_challenges, repeats, seed, reference),
        uniformity=measure_uniformity(inst, n_challenges, seed),
        challenges_used=n_challenges,
        repeats=repeats,
        sigma_noise=sigma,
        seed=seed,
        reference=reference,
    )

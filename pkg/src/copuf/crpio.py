"""
Seeded challenge/response dataset generation and bit-exact persistence.

Binary layout, little-endian throughout:

    header (42 bytes):
        8s  magic          b"COPUFCRP"
        u16 format version
        u16 n              stage count
        u16 k              overwritten-position count (0 for plain designs)
        u64 instance seed
        f64 sigma          nominal noise sigma used at collection
        u64 count          record count
        u32 checksum       crc32 of the 38 header bytes before it
    records (count times):
        ceil(n/8) challenge bytes, bit 0 of byte 0 = challenge bit 1
        1 response byte (0 or 1)

Features are never stored; transforms are recomputed from the raw
challenges so one dataset serves any feature map.
"""
from __future__ import annotations

import csv
import hashlib
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .composites import PufInstance, arch_tag, respond
from .core import calibrated_noise, validate_challenge

MAGIC = b"COPUFCRP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHHHQdQ")  # + u32 checksum appended
HEADER_SIZE = _HEADER.size + 4


class CrpFormatError(ValueError):
    """Corrupt, truncated or incompatible dataset file."""


@dataclass
class CrpSet:
    """Packed challenge/response dataset with provenance header.

    ``arch`` is an in-memory annotation only; the binary header does not
    persist it, so it is excluded from equality.
    """

    n: int
    k: int
    instance_seed: int
    sigma: float
    challenges: np.ndarray  # (count, n) uint8
    responses: np.ndarray  # (count,) uint8
    version: int = FORMAT_VERSION
    arch: str | None = field(default=None, compare=False)

    def __post_init__(self):
        self.challenges = validate_challenge(self.challenges, self.n)
        self.responses = np.asarray(self.responses, dtype=np.uint8)
        if self.challenges.ndim != 2:
            raise ValueError("challenges must be a 2-D array")
        if self.responses.shape != (self.challenges.shape[0],):
            raise ValueError("responses must match the challenge count")
        if not np.isin(self.responses, (0, 1)).all():
            raise ValueError("responses must be 0 or 1")

    @property
    def count(self) -> int:
        return self.challenges.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CrpSet):
            return NotImplemented
        return (
            self.version == other.version
            and self.n == other.n
            and self.k == other.k
            and self.instance_seed == other.instance_seed
            and self.sigma == other.sigma
            and np.array_equal(self.challenges, other.challenges)
            and np.array_equal(self.responses, other.responses)
        )

    def sha256(self) -> str:
        """Content fingerprint over the serialized byte stream."""
        return hashlib.sha256(to_bytes(self)).hexdigest()


def generate_crps(inst: PufInstance, count: int, sigma: float, seed: int,
                  instance_seed: int | None = None) -> CrpSet:
    """Evaluate ``count`` uniformly random challenges once each.

    ``sigma`` is the nominal noise level; the pinned calibration constant
    is applied at evaluation.  Deterministic in (instance, count, sigma,
    seed): the challenge stream and the noise stream are derived
    sub-streams of ``seed``.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    challenges = np.random.default_rng([seed, 0]).integers(
        0, 2, size=(count, inst.n), dtype=np.uint8
    )
    noise = calibrated_noise(sigma)
    rng = np.random.default_rng([seed, 1]) if sigma > 0 else None
    responses = np.asarray(respond(inst, challenges, noise, rng), dtype=np.uint8)
    k = getattr(inst, "k", 0)
    if not isinstance(k, int):
        k = 0
    return CrpSet(
        n=inst.n,
        k=k,
        instance_seed=instance_seed if instance_seed is not None else 0,
        sigma=sigma,
        challenges=challenges,
        responses=responses,
        arch=arch_tag(inst),
    )


def split(crps: CrpSet, train_n: int, val_n: int, test_n: int):
    """Disjoint contiguous slices in generation order (generation is
    already i.i.d., so no shuffle is needed)."""
    if train_n + val_n + test_n > crps.count:
        raise ValueError(
            f"split sizes {train_n}+{val_n}+{test_n} exceed record count {crps.count}"
        )

    def piece(a, b):
        return CrpSet(
            n=crps.n, k=crps.k, instance_seed=crps.instance_seed, sigma=crps.sigma,
            challenges=crps.challenges[a:b].copy(), responses=crps.responses[a:b].copy(),
            version=crps.version, arch=crps.arch,
        )

    return (
        piece(0, train_n),
        piece(train_n, train_n + val_n),
        piece(train_n + val_n, train_n + val_n + test_n),
    )


def record_size(n: int) -> int:
    return (n + 7) // 8 + 1


def to_bytes(crps: CrpSet) -> bytes:
    head = _HEADER.pack(
        MAGIC, crps.version, crps.n, crps.k,
        crps.instance_seed, crps.sigma, crps.count,
    )
    head += struct.pack("<I", zlib.crc32(head))
    packed = np.packbits(crps.challenges, axis=1, bitorder="little")
    body = np.concatenate([packed, crps.responses[:, None]], axis=1)
    return head + body.tobytes()


def from_bytes(data: bytes) -> CrpSet:
    if len(data) < HEADER_SIZE:
        raise CrpFormatError(f"truncated file: {len(data)} bytes < header size {HEADER_SIZE}")
    magic, version, n, k, inst_seed, sigma, count = _HEADER.unpack(data[: _HEADER.size])
    (checksum,) = struct.unpack("<I", data[_HEADER.size: HEADER_SIZE])
    if magic != MAGIC:
        raise CrpFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CrpFormatError(f"version mismatch: file {version}, supported {FORMAT_VERSION}")
    if checksum != zlib.crc32(data[: _HEADER.size]):
        raise CrpFormatError("header checksum failure")
    rsize = record_size(n)
    expected = HEADER_SIZE + count * rsize
    if len(data) != expected:
        raise CrpFormatError(f"size mismatch: {len(data)} bytes, expected {expected}")
    body = np.frombuffer(data[HEADER_SIZE:], dtype=np.uint8).reshape(count, rsize)
    challenges = np.unpackbits(body[:, :-1], axis=1, bitorder="little", count=n)
    responses = body[:, -1].copy()
    if not np.isin(responses, (0, 1)).all():
        raise CrpFormatError("corrupt response byte")
    return CrpSet(
        n=n, k=k, instance_seed=inst_seed, sigma=sigma,
        challenges=challenges, responses=responses, version=version,
    )


def write_crps(crps: CrpSet, path) -> None:
    Path(path).write_bytes(to_bytes(crps))


def read_crps(path) -> CrpSet:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CrpFormatError(f"cannot read {path}: {exc}") from exc
    return from_bytes(data)


def write_csv(crps: CrpSet, path) -> None:
    """Interoperability export: challenge as a 0/1 string plus response."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["challenge", "response"])
        for row, r in zip(crps.challenges, crps.responses):
            writer.writerow(["".join(str(int(b)) for b in row), int(r)])

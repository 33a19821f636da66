"""
Challenge-obfuscated architectures built on the plain arbiter chain:
feed-forward chains with loop configurations, XOR and OR/AND/XOR
compositions of them, auxiliary-driven MSB obfuscation, and the
interpose construction.

Feed-forward model.  A loop taps the racing signals at its arbiter stage
``s`` and overwrites one or more later challenge positions ("ends") with
the arbitrated bit.  Evaluation uses a block-local parity transform: the
challenge positions are split into blocks terminating at (and including)
each end position, and parities are taken within blocks only,

    psi[i] = prod_{j=i}^{B(i)} (1 - 2 c'[j]),

where B(i) is the next end position at or after i (the last stage
otherwise) and c' is the working challenge with arbitrated bits written
into the end positions.  The intermediate arbiter for a loop at stage s
sees the partial delay sum over stages 1..s of the same transform (with
its own, not-yet-decided end bits cleared), plus a dedicated offset.
Under this transform the response equals one of 2^k linear models, with
the branch selected by the intermediate arbiter bits; with zero loops it
degenerates exactly to the plain chain.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    GOLDEN,
    ApufInstance,
    NoiseModel,
    apuf_respond,
    arbitrate,
    validate_challenge,
)

#: Scale of the dedicated offset carried by each intermediate arbiter,
#: drawn N(0, ARBITER_BIAS_SCALE^2) at instance creation.  Calibrated
#: (together with core.NOISE_SCALE) so stock single-arbiter loop
#: geometries show the characteristic sub-0.5 uniformity of this
#: construction, around 0.40 at n=64.
ARBITER_BIAS_SCALE = 6.0

#: Stock loop geometries, id -> ((arbiter_stage, (end, ...)), ...).
LOOP_CONFIGS: dict[str, tuple[tuple[int, tuple[int, ...]], ...]] = {
    "Loop_A": ((15, (25,)),),
    "Loop_B": ((15, (25, 30)),),
    "Loop_C": ((15, (25, 30, 35)),),
    "Loop_D": ((8, (62,)), (16, (63,)), (32, (64,))),
    "Loop_E": ((15, (25, 30, 35, 40)),),
    "Loop_F": ((15, (25, 30, 35, 40, 45)),),
    "Loop_G": ((15, (25, 30, 35, 40, 45, 50)),),
}


class GeometryError(ValueError):
    """Invalid loop geometry (bad stages, duplicate ends, ...)."""


def parse_loops(text: str) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """Parse a loop geometry string, e.g. ``"15->25,30"`` or
    ``"8->62;16->63;32->64"``.  The unicode arrow is accepted too."""
    loops = []
    for part in text.replace("→", "->").split(";"):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"(\d+)\s*->\s*([\d,\s]+)", part)
        if m is None:
            raise GeometryError(f"cannot parse loop spec {part!r} (expected 's->e1,e2')")
        start = int(m.group(1))
        ends = tuple(int(e) for e in m.group(2).split(","))
        loops.append((start, ends))
    if not loops:
        raise GeometryError(f"no loops found in {text!r}")
    return tuple(loops)


def format_loops(loops) -> str:
    return ";".join(f"{s}->{','.join(str(e) for e in ends)}" for s, ends in loops)


def resolve_loops(spec: str | None) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """Resolve a loop config id (``Loop_A``..``Loop_G``) or an explicit
    ``s->e1,e2`` string; ``None`` means no loops."""
    if spec is None or spec == "":
        return ()
    if spec in LOOP_CONFIGS:
        return LOOP_CONFIGS[spec]
    if spec.lower().startswith("loop_"):
        raise GeometryError(
            f"unknown loop config id {spec!r}; valid ids: {', '.join(sorted(LOOP_CONFIGS))}"
        )
    return parse_loops(spec)


@dataclass(frozen=True)
class LoopSpec:
    """One intermediate arbiter: tap stage, overwritten end positions
    (1-based, all > arbiter_stage), and the arbiter's offset weight."""

    arbiter_stage: int
    end_positions: tuple[int, ...]
    arbiter_bias: float

    def __post_init__(self):
        ends = tuple(sorted(self.end_positions))
        object.__setattr__(self, "end_positions", ends)
        if not ends:
            raise GeometryError("a loop needs at least one end position")
        if self.arbiter_stage < 1:
            raise GeometryError(f"arbiter stage must be >= 1, got {self.arbiter_stage}")
        if ends[0] <= self.arbiter_stage:
            raise GeometryError(
                f"end position {ends[0]} must exceed arbiter stage {self.arbiter_stage}"
            )
        if len(set(ends)) != len(ends):
            raise GeometryError(f"duplicate end positions in {ends}")


def _check_loops(loops: tuple[LoopSpec, ...], n: int) -> None:
    all_ends = [e for lp in loops for e in lp.end_positions]
    if len(set(all_ends)) != len(all_ends):
        raise GeometryError(f"end positions shared between loops: {sorted(all_ends)}")
    if any(e > n for e in all_ends):
        raise GeometryError(f"end position beyond stage count {n}: {sorted(all_ends)}")
    if any(lp.arbiter_stage >= n for lp in loops):
        raise GeometryError("arbiter stage must be < n")
    stages = [lp.arbiter_stage for lp in loops]
    if stages != sorted(stages):
        raise GeometryError("loops must be ordered by ascending arbiter stage")


@dataclass(frozen=True)
class FfApufInstance:
    """Feed-forward chain: a base arbiter chain plus ordered loops."""

    base: ApufInstance
    loops: tuple[LoopSpec, ...]

    def __post_init__(self):
        _check_loops(self.loops, self.base.n)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def k(self) -> int:
        """Total count of overwritten challenge positions."""
        return sum(len(lp.end_positions) for lp in self.loops)

    @property
    def end_positions(self) -> tuple[int, ...]:
        return tuple(sorted(e for lp in self.loops for e in lp.end_positions))

    @classmethod
    def from_seed(cls, seed, n: int, loops, mu: float = 0.0, sigma: float = 1.0) -> "FfApufInstance":
        """Derive weights and per-loop arbiter offsets from one seed.
        ``loops`` is a geometry: ((arbiter_stage, (ends...)), ...)."""
        rng = np.random.default_rng(seed)
        w = rng.normal(mu, sigma, n + 1)
        tag = seed if isinstance(seed, int) else None
        base = ApufInstance(n=n, weights=w, seed=tag, mu=mu, sigma=sigma)
        specs = tuple(
            LoopSpec(s, tuple(ends), rng.normal(0.0, ARBITER_BIAS_SCALE))
            for s, ends in loops
        )
        return cls(base=base, loops=specs)


def block_parity(c: np.ndarray, ends: tuple[int, ...], n: int) -> np.ndarray:
    """Block-local parity transform of a working challenge batch (N, n).

    Blocks terminate at (and include) each end position; entries are
    reversed cumulative products of (1-2c) within each block.  With no
    ends this is the plain parity vector without its constant term.
    """
    signs = 1.0 - 2.0 * c.astype(np.float64)
    psi = np.empty_like(signs)
    start = 0
    for e in tuple(sorted(ends)) + (n,):
        stop = min(e, n)
        if stop > start:
            blk = signs[:, start:stop]
            psi[:, start:stop] = np.cumprod(blk[:, ::-1], axis=1)[:, ::-1]
        start = stop
    return psi


def ff_respond(
    inst: FfApufInstance,
    c: np.ndarray,
    noise: NoiseModel = GOLDEN,
    rng: np.random.Generator | None = None,
) -> int | np.ndarray:
    """Feed-forward response for one challenge or a batch.

    One noise vector is drawn per evaluation and shared between every
    intermediate tap and the final chain (the same physical delay
    elements are traversed); each arbiter offset gets its own noise term.
    Input bits at end positions are ignored: they are cleared and then
    overwritten by the arbitrated bits, in ascending arbiter order.
    """
    c = validate_challenge(c, inst.n)
    single = c.ndim == 1
    work = np.atleast_2d(c).copy()
    N, n = work.shape
    ends = inst.end_positions
    for e in ends:
        work[:, e - 1] = 0

    if noise.sigma_noise > 0:
        if rng is None:
            raise ValueError("a random generator is required for noisy evaluation")
        eta = rng.normal(0.0, noise.sigma_noise, (N, n + 1))
        bias_eta = rng.normal(0.0, noise.sigma_noise, (N, len(inst.loops)))
    else:
        eta = np.zeros((N, n + 1))
        bias_eta = np.zeros((N, len(inst.loops)))

    w = inst.base.weights
    for li, lp in enumerate(inst.loops):
        psi = block_parity(work, ends, n)
        s = lp.arbiter_stage
        tap = ((w[:s] + eta[:, :s]) * psi[:, :s]).sum(axis=1)
        tap += lp.arbiter_bias + bias_eta[:, li]
        bit = (tap < 0).astype(np.uint8)
        for e in lp.end_positions:
            work[:, e - 1] = bit

    psi = block_parity(work, ends, n)
    delta = ((w[:n] + eta[:, :n]) * psi).sum(axis=1) + w[n] + eta[:, n]
    out = arbitrate(delta)
    return int(out[0]) if single else out


@dataclass(frozen=True)
class XorFfInstance:
    """XOR of z feed-forward chains with identical loop geometry and
    independent weights."""

    members: tuple[FfApufInstance, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError("member list must not be empty")
        n = self.members[0].n
        if any(m.n != n for m in self.members):
            raise ValueError("all members must share the stage count")

    @property
    def n(self) -> int:
        return self.members[0].n

    @property
    def z(self) -> int:
        return len(self.members)

    @classmethod
    def from_seed(cls, seed: int, z: int, n: int, loops) -> "XorFfInstance":
        members = tuple(
            FfApufInstance.from_seed([seed, m], n, loops) for m in range(z)
        )
        return cls(members=members)


def xor_ff_respond(inst, c, noise: NoiseModel = GOLDEN, rng=None):
    """XOR of member responses; each member consumes an independent slice
    of the noise stream."""
    out = None
    for m in inst.members:
        r = ff_respond(m, c, noise, rng)
        out = r if out is None else out ^ r
    return out


@dataclass(frozen=True)
class OaxFfInstance:
    """OR/AND/XOR composition: r = OR(x members) ^ AND(y members)
    ^ XOR(z members).  Empty OR and AND groups contribute 0, so absent
    groups are neutral and (0,0,z) degenerates to the plain XOR
    composition."""

    or_members: tuple[FfApufInstance, ...]
    and_members: tuple[FfApufInstance, ...]
    xor_members: tuple[FfApufInstance, ...]

    def __post_init__(self):
        members = self.or_members + self.and_members + self.xor_members
        if not members:
            raise ValueError("at least one member group must be nonempty")
        n = members[0].n
        if any(m.n != n for m in members):
            raise ValueError("all members must share the stage count")

    @property
    def n(self) -> int:
        return (self.or_members + self.and_members + self.xor_members)[0].n

    @property
    def xyz(self) -> tuple[int, int, int]:
        return (len(self.or_members), len(self.and_members), len(self.xor_members))

    @classmethod
    def from_seed(cls, seed: int, x: int, y: int, z: int, n: int, loops) -> "OaxFfInstance":
        # Member index runs across groups in (or, and, xor) order so a
        # (0, 0, z) instance reuses exactly the seeds of the z-XOR build.
        idx = 0
        groups = []
        for count in (x, y, z):
            g = tuple(
                FfApufInstance.from_seed([seed, idx + m], n, loops) for m in range(count)
            )
            groups.append(g)
            idx += count
        return cls(*groups)


def oax_ff_respond(inst, c, noise: NoiseModel = GOLDEN, rng=None):
    """OR/AND/XOR combined response.  Members are evaluated in (or, and,
    xor) order, consuming the noise stream sequentially, so a (0,0,z)
    instance follows bitwise the z-XOR composition under shared streams."""
    c = validate_challenge(c, inst.n)
    single = c.ndim == 1
    N = 1 if single else c.shape[0]

    def group_eval(members):
        return [np.atleast_1d(ff_respond(m, c, noise, rng)) for m in members]

    r_or = np.zeros(N, dtype=np.uint8)
    for r in group_eval(inst.or_members):
        r_or |= r
    r_and = np.zeros(N, dtype=np.uint8)
    for i, r in enumerate(group_eval(inst.and_members)):
        r_and = r.copy() if i == 0 else (r_and & r)
    r_xor = np.zeros(N, dtype=np.uint8)
    for r in group_eval(inst.xor_members):
        r_xor ^= r
    out = r_or ^ r_and ^ r_xor
    return int(out[0]) if single else out


@dataclass(frozen=True)
class MnApufInstance:
    """Main chain whose three most significant challenge bits are driven
    by standalone auxiliary chains.

    Auxiliary i (sizes S1 >= S2 >= S3 conventionally) reads the most
    significant S_i bits of the raw challenge and drives 1-based position
    n - i (the MSB for i = 0).  The aux subset rule is recorded in the
    instance descriptor so experiments are self-describing.
    """

    main: ApufInstance
    aux: tuple[ApufInstance, ...]

    SUBSET_RULE = "msb-suffix"

    def __post_init__(self):
        if len(self.aux) != 3:
            raise ValueError("exactly three auxiliary chains are required")
        if any(a.n > self.main.n for a in self.aux):
            raise ValueError("auxiliary sizes must not exceed the main stage count")

    @property
    def n(self) -> int:
        return self.main.n

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.aux)

    @property
    def driven_positions(self) -> tuple[int, ...]:
        n = self.main.n
        return (n, n - 1, n - 2)

    @classmethod
    def from_seed(cls, seed: int, n: int, sizes=(32, 16, 8)) -> "MnApufInstance":
        main = ApufInstance.from_seed([seed, 0], n)
        aux = tuple(
            ApufInstance.from_seed([seed, i + 1], S) for i, S in enumerate(sizes)
        )
        return cls(main=main, aux=aux)


def mn_respond(inst, c, noise: NoiseModel = GOLDEN, rng=None):
    """Auxiliary outputs overwrite the MSB-side positions, then the main
    chain evaluates the modified challenge.  Every auxiliary reads the raw
    input challenge and draws independent noise; the main chain draws its
    own shared vector."""
    c = validate_challenge(c, inst.n)
    single = c.ndim == 1
    raw = np.atleast_2d(c)
    work = raw.copy()
    n = inst.n
    for i, a in enumerate(inst.aux):
        sub = raw[:, n - a.n:]
        bit = np.atleast_1d(apuf_respond(a, sub, noise, rng))
        work[:, n - 1 - i] = bit
    out = np.atleast_1d(apuf_respond(inst.main, work, noise, rng))
    return int(out[0]) if single else out


@dataclass(frozen=True)
class IpufInstance:
    """Interpose construction: the XOR of x lower chains produces one bit
    that is inserted at position ``interpose_pos`` of the (n+1)-bit
    challenge consumed by y upper chains, whose XOR is the response."""

    lower: tuple[ApufInstance, ...]
    upper: tuple[ApufInstance, ...]
    interpose_pos: int

    def __post_init__(self):
        if not self.lower or not self.upper:
            raise ValueError("lower and upper chains must be nonempty")
        n = self.lower[0].n
        if any(m.n != n for m in self.lower):
            raise ValueError("lower chains must share the stage count")
        if any(m.n != n + 1 for m in self.upper):
            raise ValueError("upper chains must have n+1 stages")
        if not 1 <= self.interpose_pos <= n + 1:
            raise ValueError(f"interpose position {self.interpose_pos} out of range 1..{n + 1}")

    @property
    def n(self) -> int:
        return self.lower[0].n

    @property
    def xy(self) -> tuple[int, int]:
        return (len(self.lower), len(self.upper))

    @classmethod
    def from_seed(cls, seed: int, x: int, y: int, n: int, interpose_pos: int = 33) -> "IpufInstance":
        lower = tuple(ApufInstance.from_seed([seed, 0, m], n) for m in range(x))
        upper = tuple(ApufInstance.from_seed([seed, 1, m], n + 1) for m in range(y))
        return cls(lower=lower, upper=upper, interpose_pos=interpose_pos)


def interpose_challenge(c: np.ndarray, bits: np.ndarray, pos: int) -> np.ndarray:
    """Insert one bit per row at 1-based position ``pos``: the result is
    c[1..pos-1] ++ bit ++ c[pos..n], one bit longer than the input."""
    c = np.atleast_2d(c)
    bits = np.atleast_1d(bits).astype(np.uint8)
    return np.concatenate([c[:, : pos - 1], bits[:, None], c[:, pos - 1:]], axis=1)


def remove_interposed(c_upper: np.ndarray, pos: int) -> np.ndarray:
    """Inverse of ``interpose_challenge``."""
    return np.delete(np.atleast_2d(c_upper), pos - 1, axis=1)


def ipuf_respond(inst, c, noise: NoiseModel = GOLDEN, rng=None):
    """Lower XOR bit interposed into the upper challenge; upper XOR is
    the response.  Every chain draws independent noise."""
    c = validate_challenge(c, inst.n)
    single = c.ndim == 1
    work = np.atleast_2d(c)
    N = work.shape[0]
    r_x = np.zeros(N, dtype=np.uint8)
    for m in inst.lower:
        r_x ^= np.atleast_1d(apuf_respond(m, work, noise, rng))
    upper_c = interpose_challenge(work, r_x, inst.interpose_pos)
    r_y = np.zeros(N, dtype=np.uint8)
    for m in inst.upper:
        r_y ^= np.atleast_1d(apuf_respond(m, upper_c, noise, rng))
    return int(r_y[0]) if single else r_y


PufInstance = ApufInstance | FfApufInstance | XorFfInstance | OaxFfInstance | MnApufInstance | IpufInstance

_RESPOND = {
    ApufInstance: apuf_respond,
    FfApufInstance: ff_respond,
    XorFfInstance: xor_ff_respond,
    OaxFfInstance: oax_ff_respond,
    MnApufInstance: mn_respond,
    IpufInstance: ipuf_respond,
}


def respond(inst: PufInstance, c, noise: NoiseModel = GOLDEN, rng=None):
    """Architecture dispatch for response evaluation."""
    try:
        fn = _RESPOND[type(inst)]
    except KeyError:
        raise TypeError(f"unknown instance type {type(inst).__name__}") from None
    return fn(inst, c, noise, rng)


def arch_tag(inst: PufInstance) -> str:
    return {
        ApufInstance: "apuf",
        FfApufInstance: "ff",
        XorFfInstance: "xor-ff",
        OaxFfInstance: "oax-ff",
        MnApufInstance: "mn",
        IpufInstance: "ipuf",
    }[type(inst)]


# ---------------------------------------------------------------------------
# Instance descriptors: self-describing JSON files written by the CLI `gen`
# command and consumed by every other command.  Instances are re-derived
# from (seed, geometry), never stored as raw weights.

DESCRIPTOR_VERSION = 1


def instance_descriptor(inst: PufInstance, seed: int, sigma_default: float = 0.05,
                        loops_id: str | None = None) -> dict:
    d = {
        "format_version": DESCRIPTOR_VERSION,
        "arch": arch_tag(inst),
        "n": inst.n,
        "seed": seed,
        "sigma_default": sigma_default,
    }
    if isinstance(inst, FfApufInstance):
        d["loops"] = format_loops((lp.arbiter_stage, lp.end_positions) for lp in inst.loops)
    elif isinstance(inst, XorFfInstance):
        d["z"] = inst.z
        d["loops"] = format_loops(
            (lp.arbiter_stage, lp.end_positions) for lp in inst.members[0].loops
        )
    elif isinstance(inst, OaxFfInstance):
        d["x"], d["y"], d["z"] = inst.xyz
        member = (inst.or_members + inst.and_members + inst.xor_members)[0]
        d["loops"] = format_loops((lp.arbiter_stage, lp.end_positions) for lp in member.loops)
    elif isinstance(inst, MnApufInstance):
        d["sizes"] = list(inst.sizes)
        d["aux_subset_rule"] = MnApufInstance.SUBSET_RULE
    elif isinstance(inst, IpufInstance):
        d["x"], d["y"] = inst.xy
        d["interpose_pos"] = inst.interpose_pos
    if loops_id:
        d["loops_id"] = loops_id
    return d


def instance_from_descriptor(d: dict) -> PufInstance:
    if d.get("format_version") != DESCRIPTOR_VERSION:
        raise ValueError(f"unsupported descriptor version {d.get('format_version')!r}")
    arch, n, seed = d["arch"], int(d["n"]), int(d["seed"])
    if arch == "apuf":
        return ApufInstance.from_seed(seed, n)
    if arch == "ff":
        return FfApufInstance.from_seed(seed, n, parse_loops(d["loops"]))
    if arch == "xor-ff":
        return XorFfInstance.from_seed(seed, int(d["z"]), n, parse_loops(d["loops"]))
    if arch == "oax-ff":
        return OaxFfInstance.from_seed(
            seed, int(d["x"]), int(d["y"]), int(d["z"]), n, parse_loops(d["loops"])
        )
    if arch == "mn":
        rule = d.get("aux_subset_rule", MnApufInstance.SUBSET_RULE)
        if rule != MnApufInstance.SUBSET_RULE:
            raise ValueError(f"unsupported aux subset rule {rule!r}")
        return MnApufInstance.from_seed(seed, n, tuple(d["sizes"]))
    if arch == "ipuf":
        return IpufInstance.from_seed(seed, int(d["x"]), int(d["y"]), n, int(d["interpose_pos"]))
    raise ValueError(f"unknown architecture {arch!r}")


def write_descriptor(path, descriptor: dict) -> None:
    Path(path).write_text(json.dumps(descriptor, indent=2, sort_keys=True) + "\n")


def read_descriptor(path) -> dict:
    return json.loads(Path(path).read_text())


def load_instance(path) -> tuple[PufInstance, dict]:
    d = read_descriptor(path)
    return instance_from_descriptor(d), d

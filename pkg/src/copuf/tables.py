"""
Bundled experiment recipes mirroring the reference evaluation grid
(metrics tables 2/4/5 and modeling-attack tables 9/10/12/13).

Each recipe pins the architecture, dataset sizes and training
hyperparameters for one row; ``target`` records the published reference
value (test accuracy for attack rows, BER for metrics rows) so batch
summaries can show the gap.  Rows marked ``heavy`` need hours or
millions of CRPs; they ship as configs and are skipped unless explicitly
requested.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .mlp import choose_l, hidden_sizes


@dataclass(frozen=True)
class Recipe:
    row_id: str
    kind: str  # "metrics" or "attack"
    arch: str
    n: int = 64
    loops: str | None = None  # Loop_A..Loop_G or explicit "s->e1,e2"
    x: int = 0
    y: int = 0
    z: int = 0
    sizes: tuple[int, ...] = ()
    interpose_pos: int = 33
    sigma: float = 0.05  # protocol sigma for metrics rows
    collect_sigma: float = 0.0  # noise while collecting attack CRPs
    train_n: int = 0
    val_n: int = 0
    test_n: int = 1000
    epochs: int = 100
    batch_size: int = 20
    l: int | None = None  # hidden size index; None -> choose_l default
    learning_rate: float = 1e-3
    target: float | None = None
    heavy: bool = False

    @property
    def total_crps(self) -> int:
        return self.train_n + self.val_n + self.test_n

    def hidden(self) -> tuple[int, int, int]:
        from .composites import resolve_loops

        l = self.l
        if l is None:
            k = sum(len(e) for _, e in resolve_loops(self.loops)) if self.loops else 0
            l = choose_l(self.arch, k=k, x=self.x, y=self.y, z=self.z)
        return hidden_sizes(l)


def _ff(row, loops, **kw):
    return Recipe(row_id=row, arch="ff", loops=loops, **kw)


TABLES: dict[str, tuple[Recipe, ...]] = {
    # Reliability / uniformity of the auxiliary-driven and interpose designs.
    "table2": (
        Recipe("M64_32_16_8", "metrics", "mn", sizes=(32, 16, 8), target=0.223),
        Recipe("ipuf_3_3", "metrics", "ipuf", x=3, y=3, target=0.279),
        Recipe("ipuf_4_4", "metrics", "ipuf", x=4, y=4, target=0.323),
        Recipe("ipuf_5_5", "metrics", "ipuf", x=5, y=5, target=0.362),
        Recipe("ipuf_1_7", "metrics", "ipuf", x=1, y=7, target=0.389),
    ),
    # Reliability / uniformity of single feed-forward chains.
    "table4": tuple(
        Recipe(f"ff_{cfg}", "metrics", "ff", loops=cfg, target=t)
        for cfg, t in (
            ("Loop_B", 0.071), ("Loop_C", 0.081), ("Loop_D", 0.201),
            ("Loop_E", 0.073), ("Loop_F", 0.080), ("Loop_G", 0.075),
        )
    ),
    # Reliability / uniformity of XOR compositions plus the OR/AND/XOR
    # comparison point at six members.
    "table5": tuple(
        Recipe(f"xor_ff_A_z{z}", "metrics", "xor-ff", loops="Loop_A", z=z, target=t)
        for z, t in ((2, 0.127), (3, 0.225), (4, 0.255), (5, 0.357), (6, 0.402))
    ) + (
        Recipe("oax_ff_A_231", "metrics", "oax-ff", loops="Loop_A", x=2, y=3, z=1, target=0.192),
    ),
    # Attack rows: feed-forward chains and the auxiliary-driven design.
    "table9": (
        _ff("Loop_B", "Loop_B", kind="attack", train_n=20_000, val_n=5_000,
            epochs=100, batch_size=20, target=0.955),
        _ff("Loop_C", "Loop_C", kind="attack", train_n=20_000, val_n=5_000,
            epochs=100, batch_size=20, target=0.913),
        _ff("Loop_E", "Loop_E", kind="attack", train_n=200_000, val_n=50_000,
            epochs=50, batch_size=200, target=0.921, heavy=True),
        _ff("Loop_F", "Loop_F", kind="attack", train_n=200_000, val_n=50_000,
            epochs=50, batch_size=200, target=0.928, heavy=True),
        _ff("Loop_G", "Loop_G", kind="attack", train_n=200_000, val_n=50_000,
            epochs=50, batch_size=200, target=0.893, heavy=True),
        _ff("Loop_D", "Loop_D", kind="attack", train_n=200_000, val_n=50_000,
            epochs=100, batch_size=20, l=4, target=0.919, heavy=True),
        Recipe("M64_32_16_8", "attack", "mn", sizes=(32, 16, 8), train_n=200_000,
               val_n=50_000, epochs=100, batch_size=20, target=0.939),
    ),
    # Attack rows: XOR compositions.
    "table10": (
        Recipe("A_z2", "attack", "xor-ff", loops="Loop_A", z=2, train_n=20_000,
               val_n=5_000, epochs=100, batch_size=20, target=0.937),
        Recipe("A_z3", "attack", "xor-ff", loops="Loop_A", z=3, train_n=40_000,
               val_n=10_000, epochs=100, batch_size=20, target=0.919),
        Recipe("A_z4", "attack", "xor-ff", loops="Loop_A", z=4, train_n=100_000,
               val_n=25_000, epochs=100, batch_size=20, target=0.935, heavy=True),
        Recipe("A_z5", "attack", "xor-ff", loops="Loop_A", z=5, train_n=400_000,
               val_n=100_000, epochs=100, batch_size=200, target=0.901, heavy=True),
        Recipe("A_z6", "attack", "xor-ff", loops="Loop_A", z=6, train_n=500_000,
               val_n=125_000, epochs=100, batch_size=200, target=0.528, heavy=True),
        Recipe("B_z2", "attack", "xor-ff", loops="Loop_B", z=2, train_n=100_000,
               val_n=25_000, epochs=100, batch_size=20, target=0.932, heavy=True),
    ),
    # Attack rows: interpose designs.
    "table12": (
        Recipe("ipuf_3_3", "attack", "ipuf", x=3, y=3, train_n=240_000, val_n=60_000,
               epochs=100, batch_size=1000, learning_rate=3e-3, target=0.967),
        Recipe("ipuf_4_4", "attack", "ipuf", x=4, y=4, train_n=320_000, val_n=80_000,
               epochs=100, batch_size=1000, l=7, learning_rate=3e-3, target=0.957,
               heavy=True),
        Recipe("ipuf_5_5", "attack", "ipuf", x=5, y=5, train_n=6_000_000,
               val_n=1_500_000, epochs=200, batch_size=10_000, l=8,
               learning_rate=3e-3, target=0.953, heavy=True),
        Recipe("ipuf_1_7", "attack", "ipuf", x=1, y=7, train_n=6_000_000,
               val_n=1_500_000, epochs=100, batch_size=10_000, l=9,
               learning_rate=3e-3, target=0.960, heavy=True),
    ),
    # Larger-scale compositions; collection sigma as published.
    "table13": (
        Recipe("oax_A_007", "attack", "oax-ff", loops="Loop_A", x=0, y=0, z=7,
               collect_sigma=0.02, train_n=700_000, val_n=175_000, epochs=50,
               batch_size=200, l=8, target=0.496, heavy=True),
        Recipe("oax_A_124", "attack", "oax-ff", loops="Loop_A", x=1, y=2, z=4,
               collect_sigma=0.02, train_n=700_000, val_n=175_000, epochs=50,
               batch_size=200, l=8, target=0.913, heavy=True),
        Recipe("oax_A_133", "attack", "oax-ff", loops="Loop_A", x=1, y=3, z=3,
               collect_sigma=0.02, train_n=700_000, val_n=175_000, epochs=50,
               batch_size=200, l=8, target=0.950, heavy=True),
        Recipe("ff128_k5", "attack", "ff", n=128, loops="15->80,85,90,95,100",
               collect_sigma=0.05, train_n=200_000, val_n=5_000, epochs=50,
               batch_size=200, l=6, target=0.663, heavy=True),
    ),
}


def get_table(table_id: str) -> tuple[Recipe, ...]:
    try:
        return TABLES[table_id]
    except KeyError:
        raise KeyError(
            f"unknown table {table_id!r}; available: {', '.join(sorted(TABLES))}"
        ) from None


def select_rows(table_id: str, row_ids=None, include_heavy=False):
    rows = get_table(table_id)
    if row_ids:
        wanted = set(row_ids)
        unknown = wanted - {r.row_id for r in rows}
        if unknown:
            raise KeyError(
                f"unknown rows {sorted(unknown)} in {table_id}; "
                f"available: {', '.join(r.row_id for r in rows)}"
            )
        rows = tuple(r for r in rows if r.row_id in wanted)
    elif not include_heavy:
        rows = tuple(r for r in rows if not r.heavy)
    return rows


def with_sigma(recipe: Recipe, sigma: float | None) -> Recipe:
    """Override the noise level: the protocol sigma for metrics rows, the
    collection sigma for attack rows."""
    if sigma is None:
        return recipe
    if recipe.kind == "metrics":
        return replace(recipe, sigma=sigma)
    return replace(recipe, collect_sigma=sigma)

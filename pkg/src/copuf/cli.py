"""
Command-line workbench: instance generation, reliability/uniformity
measurement, dataset generation, modeling attacks, and bundled
reproduction recipes.

Exit codes: 0 success, 2 configuration error, 3 I/O or data-format
error, 4 training divergence.

Option precedence: command-line flags > --config file entries >
architecture defaults.  The resolved configuration is echoed into every
report record.  The default output directory honors $COPUF_OUT.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import attack as attack_mod
from . import composites, crpio, metrics, reports, tables
from .features import feature_map_for
from .mlp import DivergenceError, MlpConfig, choose_l, hidden_sizes

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGED = 4


class ConfigError(ValueError):
    pass


def _outdir(args) -> Path:
    out = args.outdir or os.environ.get("COPUF_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _resolve(args, key, default=None):
    """flags > config file > default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in args._config:
        return args._config[key]
    return default


def _parse_int_list(text: str, name: str, count: int | None = None) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in str(text).split(","))
    except ValueError:
        raise ConfigError(f"{name} must be comma-separated integers, got {text!r}")
    if count is not None and len(values) != count:
        raise ConfigError(f"{name} needs {count} values, got {len(values)}")
    return values


# ---------------------------------------------------------------------- gen

def _build_instance(arch, n, seed, loops_spec, z, xyz, sizes, xy, interpose):
    loops = composites.resolve_loops(loops_spec) if loops_spec else ()
    if arch == "apuf":
        return composites.ApufInstance.from_seed(seed, n)
    if arch == "ff":
        if not loops:
            raise ConfigError("--loops is required for arch ff")
        return composites.FfApufInstance.from_seed(seed, n, loops)
    if arch == "xor-ff":
        if not loops:
            raise ConfigError("--loops is required for arch xor-ff")
        return composites.XorFfInstance.from_seed(seed, int(z), n, loops)
    if arch == "oax-ff":
        if not loops:
            raise ConfigError("--loops is required for arch oax-ff")
        x, y, zz = _parse_int_list(xyz, "--xyz", 3)
        return composites.OaxFfInstance.from_seed(seed, x, y, zz, n, loops)
    if arch == "mn":
        s = _parse_int_list(sizes, "--sizes", 3)
        return composites.MnApufInstance.from_seed(seed, n, s)
    if arch == "ipuf":
        x, y = _parse_int_list(xy, "--xy", 2)
        return composites.IpufInstance.from_seed(seed, x, y, n, int(interpose))
    raise ConfigError(f"unknown architecture {arch!r}")


def cmd_gen(args) -> int:
    arch = _resolve(args, "arch")
    if arch is None:
        raise ConfigError("--arch is required")
    n = int(_resolve(args, "n", 64))
    seed = int(_resolve(args, "seed", 1))
    sigma = float(_resolve(args, "sigma", 0.05))
    loops_spec = _resolve(args, "loops")
    inst = _build_instance(
        arch, n, seed, loops_spec,
        _resolve(args, "z", 2), _resolve(args, "xyz", "1,1,1"),
        _resolve(args, "sizes", "32,16,8"), _resolve(args, "xy", "3,3"),
        _resolve(args, "interpose", 33),
    )
    loops_id = loops_spec if loops_spec in composites.LOOP_CONFIGS else None
    descriptor = composites.instance_descriptor(inst, seed, sigma, loops_id=loops_id)
    out = Path(_resolve(args, "out") or (_outdir(args) / f"{arch}_n{n}_s{seed}.json"))
    composites.write_descriptor(out, descriptor)
    print(json.dumps({"instance": str(out), **descriptor}, sort_keys=True))
    return EXIT_OK


# ------------------------------------------------------------------ metrics

def cmd_metrics(args) -> int:
    inst, descriptor = composites.load_instance(args.instance)
    sigma = float(_resolve(args, "sigma", descriptor.get("sigma_default", 0.05)))
    seed = int(_resolve(args, "seed", 0))
    repeats = int(_resolve(args, "repeats", 11))
    n_challenges = int(_resolve(args, "challenges", 10_000))
    reference = _resolve(args, "reference", "golden")
    outdir = _outdir(args)

    report = metrics.measure(inst, sigma, n_challenges, repeats, seed, reference)
    record = reports.new_record("metrics", {
        "instance": str(args.instance),
        "descriptor": descriptor,
        "resolved": {"sigma": sigma, "seed": seed, "repeats": repeats,
                     "challenges": n_challenges, "reference": reference},
        "result": report.to_dict(),
    })
    path = Path(_resolve(args, "report") or outdir / "reports.jsonl")
    reports.append_jsonl(path, record)

    sweep = _resolve(args, "sweep")
    if sweep:
        sigmas = [float(s) for s in str(sweep).split(",")]
        bers = [metrics.measure_ber(inst, s, n_challenges, repeats, seed, reference)
                for s in sigmas]
        stem = outdir / f"ber_sweep_{Path(args.instance).stem}"
        reports.write_sweep_csv(
            stem.with_suffix(".csv"),
            [{"sigma": s, "ber": b} for s, b in zip(sigmas, bers)],
            ["sigma", "ber"],
        )
        reports.render_ber_sweep_figure(
            stem.with_suffix(".png"), sigmas, bers, title=report.arch
        )
    print(json.dumps(record["result"], sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------- crps

def cmd_crps(args) -> int:
    inst, descriptor = composites.load_instance(args.instance)
    count = int(_resolve(args, "count"))
    sigma = float(_resolve(args, "sigma", 0.0))
    seed = int(_resolve(args, "seed", 0))
    crps = crpio.generate_crps(inst, count, sigma, seed,
                               instance_seed=int(descriptor["seed"]))
    out = Path(_resolve(args, "out") or _outdir(args) / f"{Path(args.instance).stem}.crp")
    crpio.write_crps(crps, out)
    csv_path = _resolve(args, "csv")
    if csv_path:
        crpio.write_csv(crps, csv_path)
    print(json.dumps({
        "dataset": str(out), "count": count, "sigma": sigma, "seed": seed,
        "sha256": crps.sha256(),
    }, sort_keys=True))
    return EXIT_OK


# ------------------------------------------------------------------- attack

def _attack_config(args, inst, descriptor, dim) -> MlpConfig:
    hidden_spec = _resolve(args, "hidden")
    if hidden_spec:
        hidden = _parse_int_list(hidden_spec, "--hidden")
    else:
        l = _resolve(args, "l", "auto")
        if l == "auto":
            loops = composites.resolve_loops(descriptor.get("loops")) if descriptor.get("loops") else ()
            k = sum(len(e) for _, e in loops)
            l_val = choose_l(
                descriptor["arch"], k=k,
                x=int(descriptor.get("x", 0)), y=int(descriptor.get("y", 0)),
                z=int(descriptor.get("z", 0)),
                variant=_resolve(args, "l_variant", "default"),
            )
        else:
            l_val = int(l)
        hidden = hidden_sizes(l_val)
    return MlpConfig(
        input_dim=dim,
        hidden=hidden,
        epochs=int(_resolve(args, "epochs", 100)),
        batch_size=int(_resolve(args, "batch_size", 20)),
        learning_rate=float(_resolve(args, "lr", 1e-3)),
        seed=int(_resolve(args, "seed", 0)),
    )


def cmd_attack(args) -> int:
    inst, descriptor = composites.load_instance(args.instance)
    train_set = crpio.read_crps(args.train)
    val_set = crpio.read_crps(args.val)
    test_set = crpio.read_crps(args.test)
    feature_map, dim = feature_map_for(inst)
    cfg = _attack_config(args, inst, descriptor, dim)
    outdir = _outdir(args)

    runs = int(_resolve(args, "runs", 1))

    def one_run(seed):
        return attack_mod.run_attack(inst, train_set, val_set, test_set,
                                     cfg.with_overrides(seed=seed))

    if runs == 1:
        model, report = one_run(cfg.seed)
        all_accs = [report.test_accuracy]
    else:
        model, report, all_accs = attack_mod.best_of(runs, cfg.seed, one_run)

    record = reports.new_record("attack", {
        "instance": str(args.instance),
        "descriptor": descriptor,
        "resolved": {**report.config, "runs": runs},
        "result": {
            "test_accuracy": report.test_accuracy,
            "best_val_accuracy": report.best_val_accuracy,
            "best_epoch": report.best_epoch,
            "wall_seconds": report.wall_seconds,
            "all_run_accuracies": all_accs,
        },
        "datasets": report.datasets,
    })
    path = Path(_resolve(args, "report") or outdir / "reports.jsonl")
    reports.append_jsonl(path, record)

    stem = outdir / f"attack_{record['uuid'][:8]}"
    reports.write_curves_csv(stem.with_suffix(".csv"),
                             report.train_loss_curve, report.val_accuracy_curve)
    reports.render_training_figure(
        stem.with_suffix(".png"),
        report.train_loss_curve, report.val_accuracy_curve,
        title=f"{descriptor['arch']} test acc {report.test_accuracy:.3f}",
    )
    print(json.dumps(record["result"], sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- reproduce

def _run_recipe(recipe: tables.Recipe, outdir: Path, seed_base: int):
    inst = _build_instance(
        recipe.arch, recipe.n, seed_base, recipe.loops, recipe.z,
        f"{recipe.x},{recipe.y},{recipe.z}", ",".join(map(str, recipe.sizes)) or "32,16,8",
        f"{recipe.x},{recipe.y}", recipe.interpose_pos,
    )
    if recipe.kind == "metrics":
        rep = metrics.measure(inst, recipe.sigma, seed=seed_base + 1)
        return {"row": recipe.row_id, "kind": "metrics", "target": recipe.target,
                **rep.to_dict()}
    crps = crpio.generate_crps(inst, recipe.total_crps, recipe.collect_sigma,
                               seed_base + 1, instance_seed=seed_base)
    train_set, val_set, test_set = crpio.split(
        crps, recipe.train_n, recipe.val_n, recipe.test_n
    )
    cfg = MlpConfig(
        input_dim=feature_map_for(inst)[1],
        hidden=recipe.hidden(),
        epochs=recipe.epochs,
        batch_size=recipe.batch_size,
        learning_rate=recipe.learning_rate,
        seed=seed_base + 2,
    )
    _, report = attack_mod.run_attack(inst, train_set, val_set, test_set, cfg)
    stem = outdir / f"{recipe.row_id}"
    reports.write_curves_csv(stem.with_suffix(".csv"),
                             report.train_loss_curve, report.val_accuracy_curve)
    reports.render_training_figure(
        stem.with_suffix(".png"), report.train_loss_curve, report.val_accuracy_curve,
        title=f"{recipe.row_id} acc {report.test_accuracy:.3f}",
    )
    return {"row": recipe.row_id, "kind": "attack", "target": recipe.target,
            "test_accuracy": report.test_accuracy,
            "best_val_accuracy": report.best_val_accuracy,
            "wall_seconds": report.wall_seconds, "config": report.config}


def cmd_reproduce(args) -> int:
    table_id = args.table
    rows = _resolve(args, "rows")
    row_ids = rows.split(",") if rows else None
    try:
        selected = tables.select_rows(table_id, row_ids, bool(args.include_heavy))
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    sigma = _resolve(args, "sigma")
    selected = tuple(tables.with_sigma(r, float(sigma) if sigma is not None else None)
                     for r in selected)
    seed_base = int(_resolve(args, "seed", 1))
    outdir = _outdir(args)

    if args.dry_run:
        for r in selected:
            plan = {
                "row": r.row_id, "kind": r.kind, "arch": r.arch, "n": r.n,
                "loops": r.loops, "sigma": r.sigma, "heavy": r.heavy,
            }
            if r.kind == "attack":
                plan.update(train=r.train_n, val=r.val_n, test=r.test_n,
                            epochs=r.epochs, batch=r.batch_size,
                            hidden=list(r.hidden()), lr=r.learning_rate,
                            collect_sigma=r.collect_sigma)
            print(json.dumps(plan, sort_keys=True))
        return EXIT_OK

    results = []
    path = Path(_resolve(args, "report") or outdir / "reports.jsonl")
    for r in selected:
        print(f"[{table_id}] running {r.row_id} ...", file=sys.stderr)
        result = _run_recipe(r, outdir, seed_base)
        record = reports.new_record("reproduce", {
            "table": table_id, "seed": seed_base, **result,
        })
        reports.append_jsonl(path, record)
        results.append(result)
        print(json.dumps(result, sort_keys=True, default=float))

    attack_rows = [r for r in results if r["kind"] == "attack"]
    if attack_rows:
        reports.write_sweep_csv(
            outdir / f"{table_id}_summary.csv", attack_rows,
            ["row", "test_accuracy", "target", "wall_seconds"],
        )
        reports.render_batch_accuracy_figure(
            outdir / f"{table_id}_summary.png",
            [r["row"] for r in attack_rows],
            [r["test_accuracy"] for r in attack_rows],
            title=table_id,
        )
    return EXIT_OK


# --------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copuf",
        description="Simulation and modeling-attack workbench for "
                    "challenge-obfuscated arbiter PUFs.",
    )
    parser.add_argument("--config", help="JSON file with default option values")
    parser.add_argument("--outdir", help="output directory (default $COPUF_OUT or .)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write an instance descriptor")
    p.add_argument("--arch", choices=["apuf", "ff", "xor-ff", "oax-ff", "mn", "ipuf"])
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--loops", help="Loop_A..Loop_G or explicit 's->e1,e2;...'")
    p.add_argument("--z", type=int, help="member count for xor-ff")
    p.add_argument("--xyz", help="x,y,z member counts for oax-ff")
    p.add_argument("--sizes", help="auxiliary sizes S1,S2,S3 for mn")
    p.add_argument("--xy", help="x,y chain counts for ipuf")
    p.add_argument("--interpose", type=int, help="interpose position (default 33)")
    p.add_argument("--sigma", type=float, help="default noise sigma recorded in the descriptor")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("metrics", help="measure BER and uniformity")
    p.add_argument("instance")
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--challenges", type=int)
    p.add_argument("--reference", choices=["golden", "majority"])
    p.add_argument("--sweep", help="comma-separated sigmas for a BER sweep figure")
    p.add_argument("--report", help="JSON-lines report file")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("crps", help="generate a challenge/response dataset")
    p.add_argument("instance")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--csv", help="also export as CSV")
    p.set_defaults(func=cmd_crps)

    p = sub.add_parser("attack", help="train the attack network on datasets")
    p.add_argument("--instance", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--l", help="hidden size index or 'auto'")
    p.add_argument("--hidden", help="explicit hidden widths, e.g. '8' or '4,8,4' "
                                    "(overrides --l)")
    p.add_argument("--l-variant", dest="l_variant",
                   choices=["default", "low", "xy", "plus1", "minus1"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int, help="multi-start count, keep the best run")
    p.add_argument("--report", help="JSON-lines report file")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("reproduce", help="run bundled recipe rows")
    p.add_argument("table", help="table2, table4, table5, table9, table10, table12, table13")
    p.add_argument("--rows", help="comma-separated row ids (default: all non-heavy)")
    p.add_argument("--sigma", type=float, help="override the recipes' noise sigma")
    p.add_argument("--seed", type=int)
    p.add_argument("--include-heavy", action="store_true")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--report", help="JSON-lines report file")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._config = _load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (crpio.CrpFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, composites.GeometryError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

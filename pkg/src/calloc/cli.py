"""Command-line entry point: ``calloc gen|train|attack|eval|report|gradcheck``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import AttackConfig, attack_mask, craft
from .baselines import DNNTrainConfig, KNNLocalizer, train_dnn, train_fgsm_dnn
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .curriculum import TrainerConfig, load_config_file, train_full
from .data import (
    DatasetError,
    SyntheticBuildingConfig,
    building_config,
    denormalize,
    generate_synthetic_building,
    load_csv,
    save_csv,
    write_fingerprints,
)
from .evaluation import (
    ALL_DEVICES,
    EvalGrid,
    emit_report,
    load_report_csv,
    load_report_json,
    localization_error,
    parse_range,
    run_grid,
)
from .model import REFERENCE_CLASSES, REFERENCE_N_IN, CallocModel, ModelConfig, model_grad_check


def _known(cls, values: dict, prefix: str) -> dict:
    """Config entries for ``cls``; ``prefix.key`` beats a bare ``key``."""
    names = {f.name for f in fields(cls)}
    out = {k: v for k, v in values.items() if k in names}
    for k, v in values.items():
        if k.startswith(prefix + ".") and k[len(prefix) + 1 :] in names:
            out[k[len(prefix) + 1 :]] = v
    return out


def _read_config(path) -> dict:
    return load_config_file(path) if path else {}


def _train_arrays(ds):
    return ds.train.normalized().astype(np.float32), ds.labels(ds.train.rp_ids)


def _load_model(path, ds):
    model = load_checkpoint(path, _train_arrays(ds))
    if model.dims()[0] != ds.n_aps:
        raise CheckpointError(f"model expects {model.dims()[0]} APs but {ds.name} has {ds.n_aps}")
    if model.dims()[3] != ds.n_rps:
        raise CheckpointError(f"model predicts {model.dims()[3]} RPs but {ds.name} has {ds.n_rps}")
    return model


# -- subcommands -----------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.building is not None:
        base = building_config(args.building, seed=args.seed)
        n_aps = args.aps if args.aps is not None else base.n_aps
        length = args.path if args.path is not None else base.path_length_m
        name = base.name
    else:
        if args.aps is None or args.path is None:
            raise ValueError("gen needs --aps and --path (or --building)")
        n_aps, length, name = args.aps, args.path, Path(args.out).name or "building"
    overrides = {}
    if args.noise is not None:
        overrides["measurement_sigma_db"] = args.noise
    config = SyntheticBuildingConfig(n_aps=n_aps, path_length_m=length, rng_seed=args.seed, name=args.name or name, **overrides)
    ds = generate_synthetic_building(config)
    out = save_csv(ds, args.out)
    print(f"wrote {ds.name}: {ds.n_aps} APs, {ds.n_rps} RPs, {len(ds.train)} train / {len(ds.test)} test rows -> {out}")
    return 0


def cmd_train(args) -> int:
    ds = load_csv(args.data)
    cfg = _read_config(args.config)
    x, y = _train_arrays(ds)
    if args.arch == "calloc":
        values = {**_known(TrainerConfig, cfg, "train"), "seed": args.seed}
        if args.no_curriculum:
            values["curriculum"] = False
        config = TrainerConfig.from_mapping(values)
        model, log = train_full(ds, config)
        records = log.records
    else:
        config = DNNTrainConfig(**{**_known(DNNTrainConfig, cfg, "dnn"), "seed": args.seed})
        records = []
        trainer = train_dnn if args.arch == "dnn" else train_fgsm_dnn
        model = trainer(x, y, ds.n_rps, config, log=records)
    size = save_checkpoint(model, args.out)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
    last = records[-1] if records else {}
    print(f"trained {args.arch} on {ds.name}: {len(records)} epochs, final loss {last.get('loss', float('nan')):.4f}; {size} bytes -> {args.out}")
    return 0


def _attack_config(args, cfg: dict) -> AttackConfig:
    values = _known(AttackConfig, cfg, "attack")
    for key, arg in (
        ("kind", "kind"),
        ("epsilon", "eps"),
        ("phi_percent", "phi"),
        ("mode", "mode"),
        ("steps", "steps"),
        ("alpha", "alpha"),
        ("mu", "mu"),
        ("targeting", "target"),
        ("per_sample_mask", "per_sample_mask"),
    ):
        v = getattr(args, arg)
        if v is not None:
            values[key] = v
    values["seed"] = args.seed
    return AttackConfig(**values)


def cmd_attack(args) -> int:
    ds = load_csv(args.input)
    cfg = _read_config(args.config)
    config = _attack_config(args, cfg)
    model = _load_model(args.model, ds)
    part = ds.test if args.split == "test" else ds.train
    x = part.normalized().astype(np.float32)
    y = ds.labels(part.rp_ids)
    mask = attack_mask(config, len(x), ds.train.rss)
    ap_means = ds.train.normalized().mean(axis=0)
    x_adv = craft(model, x, y, config, mask, ap_means) if len(x) else x
    rows_hit = np.broadcast_to(mask, x.shape).any(axis=1)
    attacked = type(part)(denormalize(x_adv), part.rp_ids, part.devices, part.samples)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    positions = {int(r): (float(p[0]), float(p[1])) for r, p in zip(ds.rp_ids, ds.rp_positions)}
    write_fingerprints(out, attacked, ds.ap_ids, positions, extra={"attacked": rows_hit.astype(int).tolist()})
    manifest = {
        "attack": config.to_dict(),
        "dataset": ds.name,
        "split": args.split,
        "model_arch": model.arch,
        "n_rows": len(x),
        "n_targeted_aps": int(np.broadcast_to(mask, x.shape)[0].sum()) if len(x) else 0,
    }
    manifest_path = out.with_name(out.stem + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"crafted {config.kind} ({config.mode}) eps={config.epsilon} phi={config.phi_percent}: {len(x)} rows -> {out}")
    if len(x):
        clean = localization_error(ds.rp_ids[model.predict(x)], part.rp_ids, ds).mean()
        attacked_err = localization_error(ds.rp_ids[model.predict(x_adv)], part.rp_ids, ds).mean()
        print(f"mean localization error: clean {clean:.2f} m, attacked {attacked_err:.2f} m")
    return 0


def _grid_from(args, cfg: dict) -> EvalGrid:
    values = _known(EvalGrid, cfg, "grid")
    for key in ("epsilons", "phis"):
        if isinstance(values.get(key), str):
            values[key] = parse_range(values[key])
    for key in ("devices", "attacks", "seeds"):
        if isinstance(values.get(key), (str, int)):
            values[key] = [v.strip() for v in str(values[key]).split(",")]
    if "seeds" in values:
        values["seeds"] = [int(v) for v in values["seeds"]]
    if args.eps is not None:
        values["epsilons"] = parse_range(args.eps)
    if args.phi is not None:
        values["phis"] = parse_range(args.phi)
    if args.attack is not None:
        values["attacks"] = [a.strip().lower() for a in args.attack.split(",") if a.strip()]
    if args.devices is not None:
        values["devices"] = [d.strip() for d in args.devices.split(",") if d.strip()]
    if args.grid_seeds is not None:
        values["seeds"] = [int(s) for s in args.grid_seeds.split(",")]
    else:
        values.setdefault("seeds", [args.seed])
    for key, arg in (("mode", "mode"), ("targeting", "target"), ("steps", "steps"), ("alpha", "alpha"), ("mu", "mu")):
        v = getattr(args, arg)
        if v is not None:
            values[key] = v
    if "mode" in values:
        values["mode"] = {"manip": "manipulation", "spoof": "spoofing"}.get(values["mode"], values["mode"])
    return EvalGrid(**values)


def cmd_eval(args) -> int:
    cfg = _read_config(args.config)
    grid = _grid_from(args, cfg)
    datasets = [load_csv(d) for d in args.data]
    if grid.devices == ("each",):
        devices = sorted({d for ds in datasets for d in ds.test.devices.tolist()})
        grid = EvalGrid(**{**grid.to_dict(), "devices": devices})
    models, surrogates = {}, {}
    for ds in datasets:
        if args.arch == "knn":
            x, y = _train_arrays(ds)
            models[ds.name] = KNNLocalizer(x, y, k=args.k)
            if args.surrogate:
                surrogates[ds.name] = _load_model(args.surrogate, ds)
        else:
            if not args.model:
                raise ValueError("eval needs --model (or --arch knn)")
            models[ds.name] = _load_model(args.model, ds)
    reports = run_grid(models, datasets, grid, surrogate=surrogates or None, per_sample=args.per_sample)
    config = {
        "grid": grid.to_dict(),
        "arch": args.arch if args.arch == "knn" else next(iter(models.values())).arch,
        "datasets": [ds.name for ds in datasets],
        "knn_k": args.k if args.arch == "knn" else None,
        "surrogate": bool(surrogates),
    }
    written = emit_report(reports, args.out, config=config)
    print(f"{len(reports)} cells -> {', '.join(str(p) for p in written)}")
    return 0


def cmd_report(args) -> int:
    path = Path(args.input)
    if path.is_dir():
        path = path / "report.json" if (path / "report.json").exists() else path / "report.csv"
    if path.suffix == ".json":
        reports, _ = load_report_json(path)
    else:
        reports = load_report_csv(path)
    if not reports:
        raise ValueError(f"{path}: empty report")
    groups: dict = {}
    for r in reports:
        groups.setdefault((r.attack, r.building, r.device, r.mode, r.seed), []).append(r)
    metric = args.metric
    for (attack, building, device, mode, seed), cells in groups.items():
        epsilons = sorted({c.eps for c in cells})
        phis = sorted({c.phi for c in cells})
        table = {(c.eps, c.phi): getattr(c, metric) for c in cells}
        print(f"\n{attack} / {building} / {device} / {mode} / seed {seed}: {metric} (clean {cells[0].clean_mean_m:.2f} m)")
        print("eps\\phi " + " ".join(f"{p:>7g}" for p in phis))
        for e in epsilons:
            print(f"{e:<7g} " + " ".join(f"{table[(e, p)]:7.2f}" if (e, p) in table else "      -" for p in phis))
    return 0


def cmd_gradcheck(args) -> int:
    model = CallocModel(ModelConfig(args.n_in, args.classes), seed=args.seed)
    report = model_grad_check(model, n_samples=args.samples, seed=args.seed, tolerance=args.tolerance)
    print(f"max relative error {report.max_rel_error:.3e} over {report.n_checked} coordinates ({report.n_skipped} skipped at relu kinks)")
    for name, err in sorted(report.per_tensor.items()):
        print(f"  {name:24s} {err:.3e}")
    ok = report.max_rel_error < args.tolerance
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="calloc", description="Adversarially robust Wi-Fi RSS indoor localization.")
    p.add_argument("--version", action="version", version=f"calloc {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    g = sub.add_parser("gen", help="generate a synthetic building dataset")
    g.add_argument("--aps", type=int, help="number of access points")
    g.add_argument("--path", type=float, help="walking path length in meters (RPs 1 m apart)")
    g.add_argument("--building", type=int, choices=range(1, 6), help="use the size of building 1-5")
    g.add_argument("--noise", type=float, help="per-scan measurement noise in dB")
    g.add_argument("--name", help="dataset name (default from --building)")
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a localizer and write a checkpoint")
    t.add_argument("--data", required=True, help="dataset directory or manifest")
    t.add_argument("--config", help="flat JSON config file")
    t.add_argument("--arch", choices=("calloc", "dnn", "advdnn"), default="calloc")
    t.add_argument("--no-curriculum", action="store_true", help="NC ablation: clean data only")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--log", help="per-epoch JSONL log path")
    t.set_defaults(func=cmd_train)

    def attack_args(q):
        q.add_argument("--mode", choices=("manip", "spoof", "manipulation", "spoofing"))
        q.add_argument("--steps", type=int)
        q.add_argument("--alpha", type=float)
        q.add_argument("--mu", type=float)
        q.add_argument("--target", choices=("random", "strongest"))
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--config", help="flat JSON config file")

    a = sub.add_parser("attack", help="craft adversarial fingerprints into a CSV")
    a.add_argument("--in", dest="input", required=True, help="dataset directory or manifest")
    a.add_argument("--model", required=True, help="victim checkpoint")
    a.add_argument("--kind", choices=("fgsm", "pgd", "mim"))
    a.add_argument("--eps", type=float)
    a.add_argument("--phi", type=float)
    a.add_argument("--split", choices=("test", "train"), default="test")
    a.add_argument("--per-sample-mask", action="store_true", default=None)
    attack_args(a)
    a.add_argument("--out", required=True, help="output CSV")
    a.set_defaults(func=cmd_attack)

    e = sub.add_parser("eval", help="evaluate a model over an eps x phi x device grid")
    e.add_argument("--model", help="checkpoint to evaluate")
    e.add_argument("--data", required=True, action="append", help="dataset directory (repeat for several buildings)")
    e.add_argument("--arch", choices=("model", "knn"), default="model", help="'knn' evaluates the KNN baseline")
    e.add_argument("--k", type=int, default=3, help="KNN neighbours")
    e.add_argument("--surrogate", help="checkpoint whose gradients attack a gradient-free localizer")
    e.add_argument("--attack", help="comma list of fgsm,pgd,mim")
    e.add_argument("--eps", help="start:stop:step or comma list")
    e.add_argument("--phi", help="start:stop:step or comma list")
    e.add_argument("--devices", help=f"'{ALL_DEVICES}' (pooled, default), 'each', or a comma list")
    e.add_argument("--grid-seeds", help="comma list of attack seeds (default: --seed)")
    e.add_argument("--per-sample", action="store_true", help="also write per_sample.csv")
    attack_args(e)
    e.add_argument("--out", required=True, help="report directory")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="print heatmap-style tables from a report")
    r.add_argument("--in", dest="input", required=True, help="report.json, report.csv, or their directory")
    r.add_argument("--metric", choices=("mean_m", "median_m", "p95_m", "max_m"), default="mean_m")
    r.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    r.set_defaults(func=cmd_report)

    c = sub.add_parser("gradcheck", help="finite-difference check of the model's gradients")
    c.add_argument("--n-in", type=int, default=REFERENCE_N_IN)
    c.add_argument("--classes", type=int, default=REFERENCE_CLASSES)
    c.add_argument("--samples", type=int, default=100)
    c.add_argument("--tolerance", type=float, default=1e-3)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, CheckpointError, DatasetError, FloatingPointError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"calloc {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end for codebooks, inversion, sweeps, experiments and
study-stimulus export.

Configuration is a flat ``key = value`` text file; command-line flags
override file values, and every produced artifact gets a JSON manifest
recording the exact settings and seed, so identical invocations give
byte-identical outputs.

Exit codes: 0 success, 2 missing input, 3 invalid configuration,
4 internal numerical failure.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .classify import ExperimentConfig
from .codebook import KMeansConfig, kmeans_fit, load_codebook, save_codebook
from .encoding import KernelMapConfig
from .experiment import (
    PipelineConfig,
    SceneCorpus,
    collect_pool_and_pairs,
    format_results_table,
    run_experiment,
    write_split_records,
)
from .hog import HogConfig
from .image import GridSpec, load_image, save_image
from .inversion import (
    NumericalError,
    high_freq_energy,
    load_inverter,
    reconstruct,
    save_inverter,
    select_ridge_lambda,
    train_inverter,
)

STUDY_K_VALUES = (32, 128, 512, 2048)


class UsageError(ValueError):
    """Bad flags or config values; maps to exit code 3."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def load_config_file(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file {path} does not exist")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _numbers(text, cast):
    return tuple(cast(t) for t in text.replace(",", " ").split())


def _setting(args, cfg, key, cast, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in cfg:
        try:
            return cast(cfg[key])
        except ValueError as exc:
            raise UsageError(f"config key {key}: {exc}") from exc
    return default


def build_pipeline(args, cfg):
    grid = GridSpec(
        patch_size=_setting(args, cfg, "patch_size", int, 64),
        stride=_setting(args, cfg, "stride", int, 8),
    )
    seed = _setting(args, cfg, "seed", int, 0)
    kmeans = KMeansConfig(
        k=_setting(args, cfg, "k", int, 512),
        max_iterations=_setting(args, cfg, "kmeans_max_iter", int, 100),
        restarts=_setting(args, cfg, "kmeans_restarts", int, 3),
        seed=seed,
        tolerance=_setting(args, cfg, "kmeans_tolerance", float, 1e-6),
    )
    kernel = KernelMapConfig(
        n=_setting(args, cfg, "kernel_n", int, 3),
        gamma=_setting(args, cfg, "kernel_gamma", float, 0.5),
        period=_setting(args, cfg, "kernel_period", float, 0.5),
    )
    experiment = ExperimentConfig(
        train_per_class=_setting(args, cfg, "train_per_class", int, 100),
        splits=_setting(args, cfg, "splits", int, 25),
        cv_folds=_setting(args, cfg, "cv_folds", int, 10),
        cost_grid=tuple(_numbers(cfg.get("cost_grid", "0.01 0.1 1 10 100"), float)),
        seed=seed,
    )
    return PipelineConfig(
        grid=grid,
        hog=HogConfig(),
        kmeans=kmeans,
        kernel=kernel,
        experiment=experiment,
        descriptor_pool=_setting(args, cfg, "descriptor_pool", int, 200_000),
        inverter_pairs=_setting(args, cfg, "inverter_pairs", int, 50_000),
        inverter_lambda_grid=tuple(
            _numbers(cfg.get("inverter_lambda_grid", "0.01 0.1 1 10"), float)
        ),
    )


def _config(args):
    return load_config_file(args.config) if args.config else {}


def _corpus(args, cfg):
    root = args.data or cfg.get("data_root")
    if not root:
        raise UsageError("no dataset: pass --data or set data_root in the config")
    return SceneCorpus(root)


def _all_paths(corpus):
    return [p for cls in corpus.classes for p in corpus.paths(cls)]


def _write_manifest(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _settings_snapshot(pipe):
    return {
        "patch_size": pipe.grid.patch_size,
        "stride": pipe.grid.stride,
        "kmeans": {
            "k": pipe.kmeans.k,
            "max_iterations": pipe.kmeans.max_iterations,
            "restarts": pipe.kmeans.restarts,
            "tolerance": pipe.kmeans.tolerance,
        },
        "kernel": {"n": pipe.kernel.n, "gamma": pipe.kernel.gamma, "period": pipe.kernel.period},
    }


def cmd_build_codebook(args):
    cfg = _config(args)
    pipe = build_pipeline(args, cfg)
    corpus = _corpus(args, cfg)
    rng = np.random.default_rng([pipe.kmeans.seed, 0xC0DE])
    pool, _, _ = collect_pool_and_pairs(
        corpus, _all_paths(corpus), pipe.grid, pipe.hog, pipe.descriptor_pool, 0, rng
    )
    cb = kmeans_fit(pool, pipe.kmeans)
    out = args.out or f"codebook-k{pipe.kmeans.k}.cb"
    save_codebook(out, cb)
    _write_manifest(out + ".manifest.json", {
        "kind": "codebook",
        "k": cb.k,
        "dim": cb.dim,
        "seed": pipe.kmeans.seed,
        "descriptor_count": int(pool.shape[0]),
        "final_objective": cb.objective,
        "settings": _settings_snapshot(pipe),
    })
    print(f"wrote {out} (k={cb.k}, dim={cb.dim}, objective={cb.objective:.6g})")


def cmd_train_inverter(args):
    cfg = _config(args)
    pipe = build_pipeline(args, cfg)
    corpus = _corpus(args, cfg)
    rng = np.random.default_rng([pipe.kmeans.seed, 0x1284])
    _, pair_desc, pair_patch = collect_pool_and_pairs(
        corpus, _all_paths(corpus), pipe.grid, pipe.hog, 0, pipe.inverter_pairs, rng
    )
    if args.ridge_lambda is not None:
        lam, holdout = args.ridge_lambda, None
    else:
        lam, scores = select_ridge_lambda(
            pair_desc, pair_patch, grid=pipe.inverter_lambda_grid, seed=pipe.kmeans.seed
        )
        holdout = scores[lam]
    inv = train_inverter(pair_desc, pair_patch, lam)
    out = args.out or f"inverter-p{pipe.grid.patch_size}.inv"
    save_inverter(out, inv)
    _write_manifest(out + ".manifest.json", {
        "kind": "inverter",
        "dim": inv.dim,
        "patch_size": inv.patch_size,
        "pairs": int(pair_desc.shape[0]),
        "ridge_lambda": float(lam),
        "holdout_mse": holdout,
        "seed": pipe.kmeans.seed,
        "settings": _settings_snapshot(pipe),
    })
    print(f"wrote {out} (patch={inv.patch_size}, lambda={lam:g})")


def cmd_reconstruct(args):
    cfg = _config(args)
    inv = load_inverter(args.inverter)
    cb = load_codebook(args.codebook) if args.codebook else None
    stride = args.stride or int(cfg.get("stride", 8))
    grid = GridSpec(inv.patch_size, stride)
    img = load_image(args.image)
    rec = reconstruct(img, grid, inv, cb=cb)
    out = args.out or "reconstruction.png"
    save_image(out, rec)
    mse = float(np.mean(np.square(rec - img)))
    print(f"wrote {out} (mse={mse:.6f}, high_freq={high_freq_energy(rec):.6f})")


def _sweep_artifacts(corpus, pipe, grid, rng, want_codebook):
    """Inverter (and optionally a codebook) fit on the corpus at this grid."""
    n_pool = pipe.descriptor_pool if want_codebook else 0
    pool, pair_desc, pair_patch = collect_pool_and_pairs(
        corpus, _all_paths(corpus), grid, pipe.hog, n_pool, pipe.inverter_pairs, rng
    )
    lam, _ = select_ridge_lambda(pair_desc, pair_patch, grid=pipe.inverter_lambda_grid,
                                 seed=pipe.kmeans.seed)
    inv = train_inverter(pair_desc, pair_patch, lam)
    cb = kmeans_fit(pool, pipe.kmeans) if want_codebook else None
    return inv, cb


def cmd_sweep(args):
    cfg = _config(args)
    pipe = build_pipeline(args, cfg)
    corpus = _corpus(args, cfg)
    img = load_image(args.image)
    values = list(_numbers(args.values, int))
    if not values:
        raise UsageError("--values must list at least one value")
    os.makedirs(args.out, exist_ok=True)

    rows = []
    base = pipe.grid
    if args.axis == "patch":
        for v in values:
            grid = GridSpec(v, min(base.stride, v))
            rng = np.random.default_rng([pipe.kmeans.seed, v])
            inv, cb = _sweep_artifacts(corpus, pipe, grid, rng, want_codebook=args.k is not None)
            rows.append((v, reconstruct(img, grid, inv, pipe.hog, cb)))
    elif args.axis == "stride":
        rng = np.random.default_rng([pipe.kmeans.seed, base.patch_size])
        inv, cb = _sweep_artifacts(corpus, pipe, base, rng, want_codebook=args.k is not None)
        for v in values:
            grid = GridSpec(base.patch_size, v)
            rows.append((v, reconstruct(img, grid, inv, pipe.hog, cb)))
    elif args.axis == "codebook":
        rng = np.random.default_rng([pipe.kmeans.seed, base.patch_size])
        pool, pair_desc, pair_patch = collect_pool_and_pairs(
            corpus, _all_paths(corpus), base, pipe.hog,
            pipe.descriptor_pool, pipe.inverter_pairs, rng,
        )
        lam, _ = select_ridge_lambda(pair_desc, pair_patch, grid=pipe.inverter_lambda_grid,
                                     seed=pipe.kmeans.seed)
        inv = train_inverter(pair_desc, pair_patch, lam)
        for v in values:
            cb = kmeans_fit(pool, replace(pipe.kmeans, k=v))
            rows.append((v, reconstruct(img, base, inv, pipe.hog, cb)))
    else:
        raise UsageError(f"unknown sweep axis {args.axis!r}")

    lines = [f"{'axis':>8}  {'value':>6}  {'mse':>10}  {'high_freq':>10}"]
    for v, rec in rows:
        save_image(os.path.join(args.out, f"{args.axis}-{v}.png"), rec)
        mse = float(np.mean(np.square(rec - img)))
        lines.append(f"{args.axis:>8}  {v:>6}  {mse:>10.6f}  {high_freq_energy(rec):>10.6f}")
    table = "\n".join(lines) + "\n"
    with open(os.path.join(args.out, "metrics.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    print(table, end="")


def cmd_run_experiment(args):
    cfg = _config(args)
    pipe = build_pipeline(args, cfg)
    corpus = _corpus(args, cfg)
    result = run_experiment(corpus, pipe, shuffle_labels=args.shuffle_labels)
    out = args.out or "experiment-results"
    os.makedirs(out, exist_ok=True)
    write_split_records(os.path.join(out, "records.jsonl"), result)
    table = format_results_table(result)
    with open(os.path.join(out, "results.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    print(table, end="")


def _pick_stimuli(corpus, count, rng):
    """Round-robin over classes in seeded per-class order, count images total."""
    queues = {cls: [corpus.paths(cls)[i] for i in rng.permutation(len(corpus.paths(cls)))]
              for cls in corpus.classes}
    picks = []
    while len(picks) < count and any(queues.values()):
        for cls in corpus.classes:
            if queues[cls] and len(picks) < count:
                picks.append((cls, queues[cls].pop()))
    return picks


def cmd_export_study(args):
    cfg = _config(args)
    pipe = build_pipeline(args, cfg)
    corpus = _corpus(args, cfg)
    inv = load_inverter(args.inverter)
    codebooks = {}
    for k in STUDY_K_VALUES:
        path = os.path.join(args.codebooks, f"codebook-k{k}.cb")
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing codebook artifact {path}")
        codebooks[k] = load_codebook(path)
    grid = GridSpec(inv.patch_size, pipe.grid.stride)
    rng = np.random.default_rng([pipe.kmeans.seed, 0x57DD])

    count = args.count if args.count is not None else int(cfg.get("export_count", 30))
    per_class = args.examples_per_class if args.examples_per_class is not None \
        else int(cfg.get("export_examples_per_class", 3))
    stimuli_dir = os.path.join(args.out, "stimuli")
    examples_dir = os.path.join(args.out, "examples")
    os.makedirs(stimuli_dir, exist_ok=True)
    os.makedirs(examples_dir, exist_ok=True)

    picks = _pick_stimuli(corpus, count, rng)
    manifest = []
    for cls, path in picks:
        stem = os.path.splitext(os.path.basename(path))[0]
        image_id = f"{cls}/{stem}"
        img = corpus.load(path)
        renderings = {"original": img, "noquant": reconstruct(img, grid, inv, pipe.hog)}
        for k, cb in codebooks.items():
            renderings[f"k{k}"] = reconstruct(img, grid, inv, pipe.hog, cb)
        for condition, rendering in renderings.items():
            fname = f"{cls}--{stem}--{condition}.png"
            save_image(os.path.join(stimuli_dir, fname), rendering)
            manifest.append({
                "file": f"stimuli/{fname}",
                "image_id": image_id,
                "condition": condition,
                "true_class": cls,
            })
    with open(os.path.join(args.out, "manifest.jsonl"), "w", encoding="utf-8") as fh:
        for row in manifest:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    picked_paths = {p for _, p in picks}
    with open(os.path.join(args.out, "examples.jsonl"), "w", encoding="utf-8") as fh:
        for cls in corpus.classes:
            spare = [p for p in corpus.paths(cls) if p not in picked_paths]
            candidates = spare if len(spare) >= per_class else list(corpus.paths(cls))
            order = rng.permutation(len(candidates))
            for i, j in enumerate(order[:per_class]):
                fname = f"{cls}--example{i}.png"
                save_image(os.path.join(examples_dir, fname), corpus.load(candidates[j]))
                fh.write(json.dumps({"class": cls, "file": f"examples/{fname}"},
                                    sort_keys=True) + "\n")
    print(f"wrote {len(manifest)} stimuli for {len(picks)} images to {args.out}")


def _build_parser():
    parser = _Parser(prog="bovw", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")

    p = sub.add_parser("build-codebook", help="learn a k-means codebook from a dataset")
    common(p)
    p.add_argument("--data", help="dataset root (one sub-directory per class)")
    p.add_argument("--k", type=int)
    p.add_argument("--patch-size", dest="patch_size", type=int)
    p.add_argument("--stride", type=int)
    p.set_defaults(func=cmd_build_codebook)

    p = sub.add_parser("train-inverter", help="fit the descriptor-to-patch inverter")
    common(p)
    p.add_argument("--data")
    p.add_argument("--patch-size", dest="patch_size", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--ridge-lambda", dest="ridge_lambda", type=float,
                   help="fix the ridge weight instead of selecting by held-out MSE")
    p.set_defaults(func=cmd_train_inverter)

    p = sub.add_parser("reconstruct", help="invert one image through the pipeline")
    common(p)
    p.add_argument("--image", required=True)
    p.add_argument("--inverter", required=True)
    p.add_argument("--codebook", help="quantize against this codebook (omit: no quantization)")
    p.add_argument("--stride", type=int)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", help="reconstruction sweep over patch, stride or codebook size")
    common(p)
    p.add_argument("--axis", required=True, choices=["patch", "stride", "codebook"])
    p.add_argument("--values", required=True, help="comma-separated values for the axis")
    p.add_argument("--image", required=True)
    p.add_argument("--data", help="corpus used to fit sweep artifacts")
    p.add_argument("--k", type=int, help="quantize patch/stride sweeps with a size-k codebook")
    p.add_argument("--patch-size", dest="patch_size", type=int)
    p.add_argument("--stride", type=int)
    p.set_defaults(func=cmd_sweep, out="sweep-out")

    p = sub.add_parser("run-experiment", help="repeated-split classification experiment")
    common(p)
    p.add_argument("--data")
    p.add_argument("--k", type=int)
    p.add_argument("--patch-size", dest="patch_size", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--shuffle-labels", action="store_true",
                   help="permute training labels (chance-level control)")
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("export-study", help="render the human-study stimulus set")
    common(p)
    p.add_argument("--data")
    p.add_argument("--inverter", required=True)
    p.add_argument("--codebooks", required=True,
                   help="directory holding codebook-k{32,128,512,2048}.cb")
    p.add_argument("--count", type=int, help="number of stimulus images (default 30)")
    p.add_argument("--examples-per-class", dest="examples_per_class", type=int)
    p.add_argument("--stride", type=int)
    p.set_defaults(func=cmd_export_study, out="study-out")

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help()
            return 3
        args.func(args)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

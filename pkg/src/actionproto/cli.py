"""Command-line entry point: ``actionproto <stage> [options]``.

Each stage reads the previous stage's files from the output directory, checks
their fingerprint against the active config, and writes CSV/JSON data plus a
PNG figure rendered from that data. Exit codes: 0 ok, 2 config error, 3 I/O
error, 4 domain error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import plotting
from .clustering import (classes_from_labels, cluster_effects, histogram_table,
                         noise_dimension_experiment)
from .config import PipelineConfig, dumps_toml, load_config, with_seed
from .dqn import LearningCurve, ComparisonReport, train_seeds
from .errors import ActionProtoError, ConfigError, FingerprintMismatch, UnknownGenerator
from .exploration import (filter_overshoot, fingerprint, load_jsonl, sample_motions,
                          save_jsonl)
from .prototypes import (GENERATORS, PrototypeFile, baseline_fixed_rgng, baseline_random,
                         baseline_uniform, baseline_uniform_grid, generate_prototypes,
                         prototype_budget, row_sizes)
from .stairworld import StairWorld, max_return

log = logging.getLogger("actionproto")

EXIT_CONFIG, EXIT_IO, EXIT_DOMAIN = 2, 3, 4
LOG_ENV = "ACTIONPROTO_LOG"
_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


# -- helpers ----------------------------------------------------------------

def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _rows_csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(v) if isinstance(v, float) else str(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def _expected_fp(cfg: PipelineConfig) -> str:
    return fingerprint(cfg.sim, cfg.exploration.feature_subset)


def _check_fp(found: str, cfg: PipelineConfig, path) -> None:
    expected = _expected_fp(cfg)
    if found != expected:
        raise FingerprintMismatch(
            f"{path}: fingerprint {found} does not match config fingerprint {expected}")


def _require(path: Path) -> Path:
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    return path


def _out(args, cfg: PipelineConfig) -> Path:
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_samples(path: Path, cfg: PipelineConfig):
    s = load_jsonl(_require(path))
    _check_fp(s.config_fingerprint, cfg, path)
    return s


def _load_prototypes(path: Path, cfg: PipelineConfig) -> PrototypeFile:
    p = PrototypeFile.load(_require(path))
    _check_fp(p.fingerprint, cfg, path)
    return p


# -- stages -----------------------------------------------------------------

def cmd_sample(cfg: PipelineConfig, out: Path) -> Path:
    e = cfg.exploration
    s = sample_motions(e.n_samples, e.seed, e.feature_subset, cfg.sim)
    path = out / "samples.jsonl"
    save_jsonl(s, path)
    plotting.effect_scatter(s.effects(), np.zeros(len(s), dtype=int), e.feature_subset,
                            out / "samples_effects.png")
    print(f"samples: n={len(s)} seed={s.rng_seed} fingerprint={s.config_fingerprint} -> {path}")
    return path


def cmd_cluster(cfg: PipelineConfig, out: Path, samples: Path) -> Path:
    raw = _load_samples(samples, cfg)
    kept, removed = filter_overshoot(raw, cfg.exploration.overshoot_filter)
    c = cfg.clustering
    classes, labeled, report = cluster_effects(kept, c.max_clusters, c.seed,
                                               standardize=c.standardize, bin_rule=c.bin_rule)
    path = out / "labeled.jsonl"
    save_jsonl(labeled, path)
    doc = report.to_dict()
    doc["removed_by_filter"] = removed
    doc["n_samples"] = len(kept)
    doc["classes"] = [{"k": k.index, "size": len(k), "effect_mean": k.effect_mean.tolist(),
                       "effect_std": k.effect_std.tolist(),
                       "motion_mean": k.motion_mean.tolist()} for k in classes]
    _write_json(out / "clustering_report.json", doc)

    effects = labeled.effects()
    for j, feat in enumerate(labeled.feature_subset):
        rows = histogram_table(effects[:, j], c.bin_rule)
        _write_text(out / f"histogram_{feat}.csv",
                    _rows_csv(["bin_left", "bin_right", "count"], rows))
        plotting.histogram(rows, out / f"histogram_{feat}.png", feat)
    labels = np.array(labeled.labels())
    plotting.effect_classes(labeled.motions(), labels, out / "effect_classes.png")
    plotting.effect_scatter(effects, labels, labeled.feature_subset, out / "effect_space.png")
    sil = ", ".join(f"{k}:{v:.3f}" for k, v in report.silhouette_by_k.items())
    print(f"cluster: method={report.method} k={report.chosen_k} removed={removed}"
          + (f" silhouette={{{sil}}}" if sil else "") + f" -> {path}")
    return path


def _effect_budget(cfg: PipelineConfig, classes):
    cap = cfg.prototypes.max_per_class or None
    return prototype_budget(classes, max_per_class=cap)


def cmd_prototypes(cfg: PipelineConfig, out: Path, labeled_path: Path, generator: str,
                   rows: int = 0, cols: int = 0, count: int = 0,
                   per_class: int = 0) -> Path:
    if generator not in GENERATORS:
        raise UnknownGenerator(f"{generator!r}; choose from {list(GENERATORS)}")
    labeled = _load_samples(labeled_path, cfg)
    classes = classes_from_labels(labeled)
    motions = labeled.motions()
    p = cfg.prototypes
    params: dict = {"seed": p.seed}
    budget_rows: list[dict] = []
    if generator == "effect":
        budget = _effect_budget(cfg, classes)
        protos = generate_prototypes(classes, budget, motions, p.gng, p.seed,
                                     p.snap_to_members)
        budget_rows = budget.rows()
        params.update(gng=asdict(p.gng), snap_to_members=p.snap_to_members)
    elif generator == "fixed_rgng":
        per_class = per_class or p.fixed_per_class
        protos = baseline_fixed_rgng(classes, per_class, motions, p.gng, p.seed,
                                     p.snap_to_members)
        params.update(per_class=per_class, gng=asdict(p.gng), snap_to_members=p.snap_to_members)
    else:
        # baselines default to the effect-based prototype count
        matched = _effect_budget(cfg, classes).total
        if generator == "random":
            n = count or p.random_count or matched
            protos = baseline_random(n, cfg.sim, p.seed)
            params["count"] = n
        else:
            r, c = rows or p.uniform_rows, cols or p.uniform_cols
            if r and c:
                protos = baseline_uniform_grid(r, c, cfg.sim)
                params.update(rows=r, cols=c)
            else:
                protos = baseline_uniform(matched, cfg.sim)
                params.update(count=matched, row_sizes=row_sizes(matched))
    pf = PrototypeFile(generator, protos, params, budget_rows, _expected_fp(cfg))
    path = out / f"prototypes_{generator}.json"
    pf.save(path)
    plotting.prototypes(motions, np.array(labeled.labels()), protos,
                        out / f"prototypes_{generator}.png",
                        title=f"{generator}: {len(protos)} prototypes")
    print(f"prototypes: generator={generator} n={len(protos)} -> {path}")
    return path


def _seeds(cfg: PipelineConfig, seeds):
    return list(seeds) if seeds else list(cfg.rl.train.seeds)


def cmd_train(cfg: PipelineConfig, out: Path, proto_path: Path, seeds=None) -> Path:
    pf = _load_prototypes(proto_path, cfg)
    curve, _ = train_seeds(cfg.rl_sim, pf.motions(), cfg.rl.train, _seeds(cfg, seeds),
                           label=pf.generator)
    path = out / f"curve_{pf.generator}.csv"
    _write_text(path, curve.to_csv())
    plotting.learning_curves({pf.generator: curve}, {}, out / f"curve_{pf.generator}.png",
                             ceiling=max_return(cfg.rl.num_steps),
                             warmup=cfg.rl.train.warmup_steps)
    print(f"train: {pf.generator} final mean return={curve.mean[-1]:.3f} -> {path}")
    return path


def cmd_compare(cfg: PipelineConfig, out: Path, proto_paths: list[Path],
                seeds=None) -> Path:
    seeds = _seeds(cfg, seeds)
    files = [_load_prototypes(p, cfg) for p in proto_paths]
    names = [f.generator for f in files]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate generators among prototype files: {names}")
    curves: dict[str, LearningCurve] = {}
    for f in files:
        log.info("training arm %s (%d prototypes)", f.generator, len(f.prototypes))
        curves[f.generator], _ = train_seeds(cfg.rl_sim, f.motions(), cfg.rl.train, seeds,
                                             label=f.generator)
        _write_text(out / f"curve_{f.generator}.csv", curves[f.generator].to_csv())
    offsets = {n: (cfg.rl.exploration_offset if n == "effect" else 0) for n in names}
    report = ComparisonReport(curves, offsets, max_return(cfg.rl.num_steps),
                              {f.generator: len(f.prototypes) for f in files},
                              cfg.rl.train.warmup_steps)
    path = out / "comparison.json"
    doc = report.to_dict()
    doc["seeds"] = seeds
    doc["train"] = cfg.rl.train.to_dict()
    _write_json(path, doc)
    _write_text(out / "comparison_long.csv", report.long_csv())
    plotting.learning_curves(curves, offsets, out / "learning_curves.png",
                             ceiling=report.ceiling, warmup=cfg.rl.train.warmup_steps)
    for name, s in report.summary().items():
        print(f"compare: {name} final={s['final_mean_return']:.3f} "
              f"steps_to_threshold={s['steps_to_threshold']}")
    return path


def cmd_trajectories(cfg: PipelineConfig, out: Path, proto_path: Path) -> Path:
    pf = _load_prototypes(proto_path, cfg)
    world = StairWorld(cfg.sim)
    tdir = out / f"trajectories_{pf.generator}"
    tdir.mkdir(exist_ok=True)
    trajs = []
    width = len(str(max(len(pf.prototypes) - 1, 0)))
    for i, m in enumerate(pf.motions()):
        _, tr, _, _ = world.step(world.reset(), m, check_bounds=False)
        _write_text(tdir / f"prototype_{i:0{width}d}.csv", tr.to_csv())
        trajs.append(tr)
    plotting.trajectories(trajs, cfg.sim.geometry, out / f"trajectories_{pf.generator}.png")
    print(f"trajectories: {len(trajs)} CSVs -> {tdir}")
    return tdir


def cmd_noise(cfg: PipelineConfig, out: Path, samples: Path) -> Path:
    raw = _load_samples(samples, cfg)
    kept, _ = filter_overshoot(raw, cfg.exploration.overshoot_filter)
    c = cfg.clustering
    rep = noise_dimension_experiment(kept, c.max_clusters, c.seed, c.noise_scale)
    path = out / "noise_report.json"
    _write_json(path, rep.to_dict())
    print(f"noise: k without noise={rep.base_k} with noise={rep.noisy_k} -> {path}")
    return path


# -- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config file")
    common.add_argument("--seed", type=int, help="override every stage seed")
    common.add_argument("--out", type=Path, help="output directory")

    p = argparse.ArgumentParser(prog="actionproto", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("sample", parents=[common], help="uniform motion exploration")

    sp = sub.add_parser("cluster", parents=[common], help="cluster effects into classes")
    sp.add_argument("--samples", type=Path, help="default: <out>/samples.jsonl")

    sp = sub.add_parser("prototypes", parents=[common], help="generate action prototypes")
    sp.add_argument("--labeled", type=Path, help="default: <out>/labeled.jsonl")
    sp.add_argument("--generator", default="effect", help=f"one of {', '.join(GENERATORS)}")
    sp.add_argument("--rows", type=int, default=0, help="uniform: angle rows of a plain lattice")
    sp.add_argument("--cols", type=int, default=0, help="uniform: magnitude columns")
    sp.add_argument("--count", type=int, default=0,
                    help="random/uniform: prototype count (default: effect-based total)")
    sp.add_argument("--per-class", type=int, default=0,
                    help="fixed_rgng: nodes per class (default from config)")

    sp = sub.add_parser("train", parents=[common], help="train DQN on one prototype set")
    sp.add_argument("--prototypes", type=Path, required=True)
    sp.add_argument("--seeds", type=int, nargs="+")

    sp = sub.add_parser("compare", parents=[common], help="train and compare prototype sets")
    sp.add_argument("--prototypes", type=Path, nargs="+",
                    help="default: the effect/random/uniform files in <out>")
    sp.add_argument("--seeds", type=int, nargs="+")

    sp = sub.add_parser("trajectories", parents=[common], help="simulate each prototype")
    sp.add_argument("--prototypes", type=Path, required=True)

    sp = sub.add_parser("noise", parents=[common], help="noise-dimension clustering check")
    sp.add_argument("--samples", type=Path, help="default: <out>/samples.jsonl")

    sp = sub.add_parser("pipeline", parents=[common], help="run every stage in order")
    sp.add_argument("--seeds", type=int, nargs="+")

    sp = sub.add_parser("show-config", parents=[common], help="print the effective config")
    return p


def run(args) -> None:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=str(args.out))
    if args.command == "show-config":
        sys.stdout.write(dumps_toml(cfg))
        return
    out = _out(args, cfg)
    cmd = args.command
    if cmd == "sample":
        cmd_sample(cfg, out)
    elif cmd == "cluster":
        cmd_cluster(cfg, out, args.samples or out / "samples.jsonl")
    elif cmd == "prototypes":
        cmd_prototypes(cfg, out, args.labeled or out / "labeled.jsonl", args.generator,
                       args.rows, args.cols, args.count, args.per_class)
    elif cmd == "train":
        cmd_train(cfg, out, args.prototypes, args.seeds)
    elif cmd == "compare":
        paths = args.prototypes or [out / f"prototypes_{g}.json"
                                    for g in ("effect", "random", "uniform")]
        cmd_compare(cfg, out, paths, args.seeds)
    elif cmd == "trajectories":
        cmd_trajectories(cfg, out, args.prototypes)
    elif cmd == "noise":
        cmd_noise(cfg, out, args.samples or out / "samples.jsonl")
    elif cmd == "pipeline":
        samples = cmd_sample(cfg, out)
        labeled = cmd_cluster(cfg, out, samples)
        cmd_noise(cfg, out, samples)
        protos = [cmd_prototypes(cfg, out, labeled, g) for g in GENERATORS]
        cmd_trajectories(cfg, out, protos[0])
        cmd_compare(cfg, out, [protos[0], protos[2], protos[3]], args.seeds)


def main(argv=None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=level if level in _LEVELS else "WARNING",
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ActionProtoError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return 0


if __name__ == "__main__":
    sys.exit(main())

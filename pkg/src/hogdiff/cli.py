"""``hogdiff`` command line: stats, filter, train, sample, eval, ablate, verify.

Exit codes: 0 success, 1 failed property check, 2 usage or configuration
error, 3 numerical divergence.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import datasets, pipeline, sde, verify
from .evaluation import eval_report
from .graph_core import Graph, InvalidGraphError
from .score_model import ScoreNetConfig, load_checkpoint, save_checkpoint
from .topology import FILTER_KINDS, FilterSpec, apply_filter, ho_statistics

CONFIG_VERSION = 1
EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3

_SECTIONS = {
    "version": None, "seed": None,
    "dataset": {"path", "generator", "count", "data_seed", "holdout"},
    "windows": {"K", "T", "splits"},
    "filters": None,
    "schedule": {"gou", "vp"},
    "model": {"hidden_dim", "n_gcn_layers", "n_attn_layers", "time_dim", "rw_steps", "sp_cutoff", "activation"},
    "train": {"steps", "batch_size", "lr", "grad_clip", "c1", "c2", "features", "feature_cap",
              "lam_scale", "t_eps"},
    "sample": {"steps", "num", "quantize_between", "rule"},
    "eval": {"kernel", "sigma"},
}
_REQUIRED = ("version", "seed", "dataset")


class ConfigError(ValueError):
    pass


def _keys(section: str, d, allowed):
    if not isinstance(d, dict):
        raise ConfigError(f"section {section!r} must be an object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    return d


def load_config(path) -> dict:
    """Parse and validate a config file; returns the raw sections plus ``run``."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    _keys("config", raw, _SECTIONS)
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    if raw["version"] != CONFIG_VERSION:
        raise ConfigError(f"config version {raw['version']!r} is not {CONFIG_VERSION}")
    for sec, allowed in _SECTIONS.items():
        if allowed is not None and sec in raw:
            _keys(sec, raw[sec], allowed)
    ds = raw["dataset"]
    if ("path" in ds) == ("generator" in ds):
        raise ConfigError("dataset needs exactly one of 'path' or 'generator'")

    win = raw.get("windows", {})
    sched = raw.get("schedule", {})
    tr = raw.get("train", {})
    sm = raw.get("sample", {})
    K = win.get("K", 2)
    T = win.get("T", 1.0)
    filters = raw.get("filters", [{"kind": "cell"}] * (K - 1))
    if not isinstance(filters, list):
        raise ConfigError("'filters' must be a list")
    try:
        gou = sde.NoiseSchedule(kind="gou", T=T, **_keys("schedule.gou", sched.get("gou", {}),
                                                          {"theta_min", "theta_max", "sigma2"}))
        vp = sde.NoiseSchedule(kind="vp", **_keys("schedule.vp", sched.get("vp", {}),
                                                   {"beta_min", "beta_max", "T"}))
        run = pipeline.RunConfig(
            K=K, T=T, splits=tuple(win.get("splits", [k / K for k in range(1, K)])),
            filters=tuple(FilterSpec(**_keys("filters[]", f, {"kind", "p", "L_max", "base"})) for f in filters),
            schedule=gou, vp_schedule=vp, model=ScoreNetConfig(**raw.get("model", {})),
            features=tr.get("features", "degree_onehot"), feature_cap=tr.get("feature_cap", 8),
            lam_scale=tr.get("lam_scale"), train_steps=tr.get("steps", 2000),
            batch_size=tr.get("batch_size", 16), lr=tr.get("lr", 1e-3), grad_clip=tr.get("grad_clip", 1.0),
            c1=tr.get("c1", 1.0), c2=tr.get("c2", 1.0), t_eps=tr.get("t_eps", 1e-3),
            sample_steps=sm.get("steps", 500), quantize_between=sm.get("quantize_between", True),
            rule=sm.get("rule", "binary"), seed=int(raw["seed"]),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return {"raw": raw, "run": run}


def config_digest(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_split(ds: dict, base_dir: Path):
    """Training graphs and held-out reference graphs described by a dataset section."""
    holdout = int(ds.get("holdout", 0))
    if "path" in ds:
        graphs = datasets.load(base_dir / ds["path"])
    else:
        gens = {"community_small": datasets.gen_community_small, "sbm": datasets.gen_sbm}
        if ds["generator"] not in gens:
            raise ConfigError(f"unknown generator {ds['generator']!r}")
        graphs = gens[ds["generator"]](int(ds.get("count", 100)) + holdout, int(ds.get("data_seed", 0)))
    if holdout >= len(graphs):
        raise ConfigError("holdout leaves no training graphs")
    cut = len(graphs) - holdout
    return graphs[:cut], graphs[cut:]


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(path: Path, command: str, digest: str, seed: int, files, extra=None):
    man = {
        "version": CONFIG_VERSION, "command": command, "config_sha256": digest, "seed": seed,
        "files": {f.name: _sha(f) for f in sorted(files)}, **(extra or {}),
    }
    path.write_text(json.dumps(man, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _write_curve(path: Path, losses):
    path.write_text("".join(f"{float(v)!r}\n" for v in losses), encoding="utf-8")


# -- commands ------------------------------------------------------------------

def cmd_stats(args) -> int:
    graphs = datasets.load(args.input)
    if not graphs:
        raise ConfigError(f"{args.input} holds no graphs")
    stats = ho_statistics(graphs, max_simplex_p=args.max_p, L_max=args.lmax)
    record = {"dataset": str(args.input), "graphs": len(graphs), **stats}
    if args.format == "json":
        print(json.dumps(record, sort_keys=True))
    else:
        for key in ["graphs", *stats]:
            print(f"{key:>14}  {record[key]}")
    return EXIT_OK


def cmd_filter(args) -> int:
    spec = FilterSpec(kind=args.kind, p=args.p, L_max=args.lmax)
    if spec.kind == "noise":
        raise ConfigError("noise has no deterministic filtered graph")
    graphs = datasets.load(args.input)
    out, kept, total = [], 0, 0
    for g in graphs:
        f = apply_filter(g, spec)
        A = np.where(f.edge_keep, g.A, 0.0)
        # dropped nodes stay in the file as isolated nodes with zeroed features
        out.append(Graph(A=A, X=g.X * f.node_keep[:, None], mask=g.mask))
        kept += len(f.kept_edges())
        total += len(g.edges())
    datasets.save(out, args.output)
    frac = kept / total if total else 0.0
    print(f"kept_edge_fraction={frac:.6f} kept_edges={kept} total_edges={total}")
    return EXIT_OK


def _train_into(cfg: dict, out_dir: Path, threads: int) -> int:
    run = cfg["run"]
    train_graphs, reference = load_split(cfg["raw"]["dataset"], Path(cfg["base_dir"]))
    out_dir.mkdir(parents=True, exist_ok=True)
    prep = pipeline.prepare(train_graphs, run)
    files = []
    train_path = out_dir / "train.graphs.jsonl"
    datasets.save(datasets.pad_dataset(train_graphs), train_path, eigenbases=list(prep.U0))
    files.append(train_path)
    if reference:
        ref_path = out_dir / "reference.graphs.jsonl"
        datasets.save(reference, ref_path)
        files.append(ref_path)
    digest = config_digest(cfg["raw"])
    for k in range(1, run.K + 1):
        model, losses = pipeline.train_segment(k, prep, run, threads=threads)
        curve = out_dir / f"loss_segment{k}.txt"
        _write_curve(curve, losses)
        files.append(curve)
        if model is not None:
            ck = out_dir / f"segment{k}.ckpt"
            save_checkpoint(ck, model.params, model.net,
                            extra={"segment": k, "kind": model.kind, "config_sha256": digest})
            files.append(ck)
        if len(losses):
            print(f"segment {k}: {len(losses)} steps, final loss {np.mean(losses[-max(1, len(losses) // 10):]):.4f}")
    _write_manifest(out_dir / "manifest.json", "train", digest, run.seed, files,
                    {"lam_scale": prep.lam_scale, "K": run.K})
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args.config)
    return _train_into(cfg, Path(args.out_dir), args.threads)


def _config(path):
    cfg = load_config(path)
    cfg["base_dir"] = str(Path(path).resolve().parent)
    return cfg


def cmd_sample(args) -> int:
    cfg = _config(args.config)
    run = cfg["run"]
    ckpt_dir = Path(args.ckpt_dir)
    manifest = json.loads((ckpt_dir / "manifest.json").read_text(encoding="utf-8"))
    digest = config_digest(cfg["raw"])
    if manifest["config_sha256"] != digest:
        raise ConfigError("config does not match the one the checkpoints were trained with")
    graphs = datasets.load(ckpt_dir / "train.graphs.jsonl")
    run = dataclasses.replace(run, lam_scale=manifest["lam_scale"])
    prep = pipeline.prepare(graphs, run)
    models = []
    for k in range(1, run.K + 1):
        ck = ckpt_dir / f"segment{k}.ckpt"
        if not ck.exists():
            models.append(None)
            continue
        params, net, extra = load_checkpoint(ck)
        models.append(pipeline.SegmentModel(k=k, kind=extra["kind"], params=params, net=net))
    if any(m is None for m in models[:-1]) or (models[-1] is None and prep.noise_boundary != run.K - 1):
        raise ConfigError(f"missing checkpoints in {ckpt_dir}")
    num = args.num if args.num is not None else int(cfg["raw"].get("sample", {}).get("num", 64))
    seed = args.seed if args.seed is not None else run.seed
    res = pipeline.sample(models, prep, run, num, seed=seed, threads=args.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    datasets.save(res.graphs, out)
    _write_manifest(out.parent / (out.name + ".manifest.json"), "sample", digest, seed, [out],
                    {"requested": num, "failed": res.failed})
    print(f"wrote {len(res.graphs)} graphs to {out} ({res.failed} failed)")
    return EXIT_OK


def cmd_eval(args) -> int:
    gen = datasets.load(args.generated)
    ref = datasets.load(args.reference)
    if not gen or not ref:
        raise ConfigError("generated and reference sets must be non-empty")
    report = eval_report(gen, ref, kernel=args.kernel, sigma=args.sigma)
    print(report.table())
    if args.output:
        Path(args.output).write_text(json.dumps(report.records(), sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config(args.config)
    run = cfg["run"]
    guides = [g.strip() for g in args.guides.split(",") if g.strip()]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [run.seed]
    train_graphs, reference = load_split(cfg["raw"]["dataset"], Path(cfg["base_dir"]))
    if not reference:
        raise ConfigError("ablation needs a dataset holdout for evaluation")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = pipeline.run_ablation(guides, train_graphs, reference, run, seeds=seeds,
                                 n_samples=args.num, threads=args.threads)
    rows, files = [], []
    print(f"{'guide':>10} {'seed':>5} {'seg1 loss':>10} {'Deg.':>9} {'Clus.':>9} {'Orbit':>9}")
    for r in runs:
        for k, c in enumerate(r.curves, start=1):
            p = out_dir / f"curve_{r.guide}_seed{r.seed}_segment{k}.txt"
            _write_curve(p, c)
            files.append(p)
        tail = r.curves[0][-max(1, len(r.curves[0]) // 10):]
        row = {"guide": r.guide, "seed": r.seed, "segment1_final_loss": float(np.mean(tail)),
               "failed": r.failed, "report": r.report.records() if r.report else None}
        rows.append(row)
        v = r.report.values if r.report else {}
        print(f"{r.guide:>10} {r.seed:>5} {row['segment1_final_loss']:10.4f} "
              f"{v.get('Deg.', float('nan')):9.5f} {v.get('Clus.', float('nan')):9.5f} "
              f"{v.get('Orbit', float('nan')):9.5f}")
    table = out_dir / "ablation.json"
    table.write_text(json.dumps(rows, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    files.append(table)
    _write_manifest(out_dir / "manifest.json", "ablate", config_digest(cfg["raw"]), run.seed, files)
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify.run_suite(args.suite)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.suite}.{r.name}  {r.detail}")
    failed = [f"{r.suite}.{r.name}" for r in results if not r.passed]
    if failed:
        print("failing checks: " + ", ".join(failed))
        return EXIT_PROPERTY
    return EXIT_OK


# -- entry point -----------------------------------------------------------------

def _threads(value) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    env = os.environ.get("HOGDIFF_THREADS")
    parser = argparse.ArgumentParser(prog="hogdiff", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=_threads, default=None,
                        help="worker threads (default: $HOGDIFF_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="higher-order structure counts of a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--max-p", type=int, default=4)
    p.add_argument("--lmax", type=int, default=8)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("filter", help="write the filtered skeleton of each graph")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", required=True, choices=[k for k in FILTER_KINDS if k != "noise"])
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--lmax", type=int, default=8)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("train", help="train every segment's score network")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="generate graphs from trained checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--ckpt-dir", required=True)
    p.add_argument("--num", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="MMD report between two graph files")
    p.add_argument("--generated", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--kernel", choices=("gaussian_emd", "gaussian_tv"), default="gaussian_emd")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="compare topological guides")
    p.add_argument("--config", required=True)
    p.add_argument("--guides", default="cell,periphery,noise")
    p.add_argument("--seeds", default=None, help="comma-separated seeds (default: config seed)")
    p.add_argument("--num", type=int, default=64)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("verify", help="run built-in property checks")
    p.add_argument("--suite", choices=("sde", "topology", "model", "all"), default="all")
    p.set_defaults(func=cmd_verify)

    parser.set_defaults(_env_threads=env)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is None:
        try:
            args.threads = _threads(args._env_threads) if args._env_threads else 1
        except (ValueError, argparse.ArgumentTypeError):
            print("error: HOGDIFF_THREADS must be a positive integer", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except (pipeline.TrainingDivergence, sde.DivergenceError) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValueError, KeyError, OSError, InvalidGraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

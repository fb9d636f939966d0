"""Batch command line front-end: gen -> simulate -> dataset -> eval/render.

Every stage is reproducible from (config, seed): per-design seeds derive
from the run seed via splitmix64, outputs are written to unique paths and
registered in sorted manifests, so results are identical for any worker
count.

Exit codes: 0 success, 2 configuration error, 3 partial batch failure.
"""

from __future__ import annotations

import argparse
import logging
import multiprocessing
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import metrics as mt
from . import model, raster, render, stressio
from .config import ConfigError, PipelineConfig, load_config, validate_config
from .design import derive_seed, generate_tree
from .solver import TreeSolver

log = logging.getLogger("emstress")


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO,
             "debug": logging.DEBUG}.get(os.environ.get("EMSTRESS_LOG", "info"),
                                         logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _resolve_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    validate_config(cfg)
    return cfg


def _design_path(out: Path, design_id: int) -> Path:
    return out / "designs" / f"design_{design_id:06d}.emtree"


def _stress_path(out: Path, design_id: int) -> Path:
    return out / "stress" / f"design_{design_id:06d}.emstress"


def pred_filename(design_id: int, time_years: float) -> str:
    return f"d{design_id:06d}_t{time_years:g}.npy"


# --- gen --------------------------------------------------------------------

def cmd_gen(cfg: PipelineConfig) -> int:
    out = Path(cfg.out_dir)
    (out / "designs").mkdir(parents=True, exist_ok=True)
    gen_cfg = cfg.gen_config()
    params = cfg.physical_params()
    rows = []
    for i in range(cfg.n_designs):
        seed_i = derive_seed(cfg.seed, i)
        tree = generate_tree(seed_i, gen_cfg, params, design_id=i)
        violations = model.validate_tree(tree, params, j_max=cfg.j_max)
        if violations:
            raise RuntimeError(f"generated design {i} is invalid: {violations}")
        path = _design_path(out, i)
        model.save_tree(tree, path)
        rows.append((i, str(path), seed_i))
        log.debug("gen design %d: %d branches", i, len(tree.branches))
    with open(out / "designs" / "manifest.tsv", "w") as f:
        f.write("design_id\tpath\tseed\n")
        for did, path, seed in rows:
            f.write(f"{did}\t{path}\t{seed}\n")
    with open(out / "designs" / "config_resolved.txt", "w") as f:
        f.write(cfg.to_text())
    log.info("generated %d designs under %s", cfg.n_designs, out / "designs")
    return 0


def _read_design_manifest(out: Path) -> list[tuple[int, str]]:
    manifest = out / "designs" / "manifest.tsv"
    if not manifest.exists():
        raise ConfigError(f"no design manifest at {manifest}; run gen first")
    rows = []
    with open(manifest) as f:
        next(f)
        for line in f:
            did, path, _seed = line.rstrip("\n").split("\t")
            rows.append((int(did), path))
    return rows


# --- simulate ----------------------------------------------------------------

def _simulate_one(task):
    design_id, tree_path, stress_path, cfg_dict = task
    cfg = PipelineConfig(**cfg_dict)
    t0 = time.perf_counter()
    try:
        tree = model.load_tree(tree_path)
        solver = TreeSolver(tree, cfg.physical_params(), cfg.solver_config())
        field = solver.solve_transient(cfg.report_times)
        stressio.save_stress(field, stress_path)
        return design_id, time.perf_counter() - t0, None
    except Exception as exc:  # isolate per-design failures
        return design_id, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}"


def cmd_simulate(cfg: PipelineConfig) -> int:
    out = Path(cfg.out_dir)
    (out / "stress").mkdir(parents=True, exist_ok=True)
    designs = _read_design_manifest(out)
    tasks = [(did, path, str(_stress_path(out, did)), asdict(cfg))
             for did, path in designs]
    if cfg.workers > 1 and len(tasks) > 1:
        with multiprocessing.get_context("spawn").Pool(cfg.workers) as pool:
            results = pool.map(_simulate_one, tasks)
    else:
        results = [_simulate_one(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    failures = [(did, err) for did, _, err in results if err]
    with open(out / "stress" / "manifest.tsv", "w") as f:
        f.write("design_id\tpath\twall_seconds\tstatus\n")
        for did, secs, err in results:
            status = "error: " + err if err else "ok"
            f.write(f"{did}\t{_stress_path(out, did)}\t{secs:.3f}\t{status}\n")
    with open(out / "stress" / "config_resolved.txt", "w") as f:
        f.write(cfg.to_text())
    for did, err in failures:
        log.error("design %d failed: %s", did, err)
    log.info("simulated %d designs (%d failed)", len(results), len(failures))
    return 3 if failures else 0


# --- dataset ------------------------------------------------------------------

def cmd_dataset(cfg: PipelineConfig) -> int:
    out = Path(cfg.out_dir)
    designs = _read_design_manifest(out)
    samples: list[ds.SamplePair] = []
    for did, tree_path in designs:
        spath = _stress_path(out, did)
        if not spath.exists():
            raise ConfigError(f"missing stress file {spath}; run simulate first")
        tree = model.load_tree(tree_path)
        field = stressio.load_stress(spath)
        mask = raster.footprint_mask(tree)
        current = raster.rasterize_current(tree)
        for ty in cfg.report_times:
            stress_img = raster.rasterize_stress(tree, field, ty)
            samples.append(ds.SamplePair(design_id=did, time_years=float(ty),
                                         current=current.data.copy(),
                                         stress=stress_img.data, mask=mask))
    design_ids = sorted({s.design_id for s in samples})
    train_ids, test_ids = ds.split_by_design(design_ids, cfg.test_fraction,
                                             cfg.split_seed)
    train = [s for s in samples if s.design_id in set(train_ids)]
    stats = raster.standardize_fit(train)
    path = out / "dataset.emds"
    ds.write_dataset(samples, stats, path)
    digest = ds.read_dataset(path).sha256
    with open(out / "dataset.sha256", "w") as f:
        f.write(digest + "\n")
    with open(out / "split_manifest.txt", "w") as f:
        for did in train_ids:
            f.write(f"train {did}\n")
        for did in test_ids:
            f.write(f"test {did}\n")
    with open(out / "dataset_config_resolved.txt", "w") as f:
        f.write(cfg.to_text())
    log.info("wrote %d samples to %s (sha256 %s)", len(samples), path, digest[:16])
    return 0


# --- eval ---------------------------------------------------------------------

def cmd_eval(pred_dir: str, dataset_path: str, out_dir: str) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = ds.read_dataset(dataset_path)
    pred = Path(pred_dir)
    scores, baseline_scores, skipped = [], [], []
    for s in data.samples:
        pfile = pred / pred_filename(s.design_id, s.time_years)
        if not pfile.exists():
            skipped.append(f"{pfile.name}: missing prediction")
            continue
        p = np.load(pfile)
        if p.shape != s.stress.shape:
            skipped.append(f"{pfile.name}: shape {p.shape} mismatch")
            continue
        if np.any(p[~s.mask] != 0):
            skipped.append(f"{pfile.name}: footprint mask mismatch "
                           "(nonzero outside wires)")
            continue
        try:
            scores.append(mt.SampleScore(
                design_id=s.design_id, time_years=s.time_years,
                rmse=mt.rmse(p, s.stress, s.mask),
                nrmse=mt.nrmse(p, s.stress, s.mask)))
            base = mt.baseline_mean_predictor(s.stress, s.mask)
            baseline_scores.append(mt.nrmse(base, s.stress, s.mask))
        except mt.MetricError as exc:
            skipped.append(f"{pfile.name}: {exc}")
    if not scores:
        log.error("no evaluable samples")
        report_text = "no evaluable samples\n" + "\n".join(skipped) + "\n"
        (out / "report.txt").write_text(report_text)
        return 0
    report = mt.aggregate(scores,
                          baseline_nrmse=float(np.mean(baseline_scores)),
                          skipped=skipped)
    (out / "report.csv").write_text(report.csv_text())
    (out / "report.txt").write_text(report.summary_text())
    log.info("evaluated %d samples, mean NRMSE %.3f%% (baseline %.3f%%)",
             len(scores), 100 * report.mean_nrmse, 100 * report.baseline_nrmse)
    return 0


# --- render -------------------------------------------------------------------

def cmd_render(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    inp = Path(args.input)
    if inp.suffix == ".npy":
        data = np.load(inp)
        name = inp.stem
    elif inp.suffix == ".emds":
        if args.design is None or args.time is None:
            raise ConfigError("rendering from a dataset needs --design and --time")
        sample = ds.read_dataset(inp).lookup(args.design, args.time)
        data = sample.current if args.channel == "current" else sample.stress
        name = f"d{args.design:06d}_t{args.time:g}_{args.channel}"
    elif inp.suffix == ".emstress":
        if not args.tree or args.time is None:
            raise ConfigError("rendering a stress file needs --tree and --time")
        tree = model.load_tree(args.tree)
        field = stressio.load_stress(inp)
        data = raster.rasterize_stress(tree, field, args.time).data
        name = f"{inp.stem}_t{args.time:g}"
    else:
        raise ConfigError(f"unknown input type {inp.suffix!r}")
    png = out / f"{name}.png"
    lo, hi = render.render_field(data, png, palette=args.palette)
    log.info("rendered %s (min=%g max=%g)", png, lo, hi)
    return 0


# --- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emstress",
                                description="EM stress dataset pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value pipeline config file")
        sp.add_argument("--seed", type=int, help="override run seed")
        sp.add_argument("--workers", type=int, help="override worker count")
        sp.add_argument("--out", help="override output directory")

    common(sub.add_parser("gen", help="generate random designs"))
    common(sub.add_parser("simulate", help="solve stress for generated designs"))
    common(sub.add_parser("dataset", help="rasterize and package the dataset"))

    ev = sub.add_parser("eval", help="score predictions against a dataset")
    ev.add_argument("--pred", required=True, help="directory of .npy predictions")
    ev.add_argument("--dataset", required=True, help="EMDS dataset file")
    ev.add_argument("--out", default="eval_out")
    ev.add_argument("--config", help=argparse.SUPPRESS)

    rd = sub.add_parser("render", help="render a field to a heatmap PNG")
    rd.add_argument("--input", required=True,
                    help=".emds, .emstress or .npy input")
    rd.add_argument("--tree", help="EMTREE file (for .emstress input)")
    rd.add_argument("--design", type=int)
    rd.add_argument("--time", type=float, help="aging time in years")
    rd.add_argument("--channel", choices=["current", "stress"], default="stress")
    rd.add_argument("--palette", action="store_true", help="use the fixed color palette")
    rd.add_argument("--out", default=".")
    rd.add_argument("--config", help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(_resolve_config(args))
        if args.command == "simulate":
            return cmd_simulate(_resolve_config(args))
        if args.command == "dataset":
            return cmd_dataset(_resolve_config(args))
        if args.command == "eval":
            return cmd_eval(args.pred, args.dataset, args.out)
        if args.command == "render":
            return cmd_render(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())

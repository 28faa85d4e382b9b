"""Command-line front end: train dictionaries, upscale images, benchmark
solvers over an image set, and run synthetic recovery experiments.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import hashlib
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dictionary, engine, image, linalg
from .solvers import SOLVER_NAMES, SolverConfig, solve

THREADS_ENV = "SPARSE_SR_THREADS"


@dataclass
class BenchmarkReport:
    """Solver x image PSNR grid plus the per-solver average."""

    solver_names: list
    image_names: list
    psnr: list  # psnr[s][i], dB
    average: list  # average[s], dB
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_grid(cls, solver_names, image_names, grid, metadata=None) -> "BenchmarkReport":
        if len(grid) != len(solver_names) or any(len(row) != len(image_names) for row in grid):
            raise ValueError("PSNR grid shape must be len(solvers) x len(images)")
        avg = [float(np.mean(row)) for row in grid]
        return cls(list(solver_names), list(image_names), [list(r) for r in grid], avg, metadata or {})


@dataclass
class SynthReport:
    """Per-solver outcome of the synthetic recovery experiment."""

    solver_names: list
    success_rate: list
    mean_rel_error: list
    mean_runtime_s: list

    def to_csv(self) -> str:
        lines = ["solver,success_rate,mean_rel_error,mean_runtime_s"]
        for i, name in enumerate(self.solver_names):
            lines.append(
                f"{name},{self.success_rate[i]:.2f},{self.mean_rel_error[i]:.3e},"
                f"{self.mean_runtime_s[i]:.4f}"
            )
        return "\n".join(lines)


def _fmt_db(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.2f}"


def report_to_csv(report: BenchmarkReport) -> str:
    """Render the PSNR grid: one row per solver, two decimals, inf as 'inf'."""
    lines = ["solver," + ",".join(report.image_names) + ",average"]
    for s, name in enumerate(report.solver_names):
        cells = [_fmt_db(v) for v in report.psnr[s]] + [_fmt_db(report.average[s])]
        lines.append(name + "," + ",".join(cells))
    return "\n".join(lines)


def _worker_count(n_tasks: int) -> int:
    raw = os.environ.get(THREADS_ENV, "0")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def run_benchmark(cd, images, solver_names, solver_cfgs=None, seed: int = 0) -> BenchmarkReport:
    """Degrade each ground-truth image, superresolve it back with every
    solver, and score PSNR against the original.

    `images` is a list of (name, array) pairs. Cells run on a thread pool
    capped by SPARSE_SR_THREADS (0 = auto); any cell failure aborts the whole
    report with its coordinates.
    """
    if not images:
        raise ValueError("benchmark needs at least one image")
    if not solver_names:
        raise ValueError("benchmark needs at least one solver")
    solver_cfgs = solver_cfgs or {}
    scale = cd.scale

    prepared = []
    for name, img in images:
        img = image._as_image(img)
        h = (img.shape[0] // scale) * scale
        w = (img.shape[1] // scale) * scale
        cropped = img[:h, :w]
        prepared.append((name, cropped, image.degrade(cropped, scale)))

    def cell(task):
        s, i = task
        solver = solver_names[s]
        name, truth, lr = prepared[i]
        cfg = engine.UpscaleConfig(solver_name=solver, solver_cfg=solver_cfgs.get(solver))
        return engine.psnr(engine.upscale(lr, cd, cfg), truth).psnr_db

    tasks = [(s, i) for s in range(len(solver_names)) for i in range(len(prepared))]
    grid = [[math.nan] * len(prepared) for _ in solver_names]
    with ThreadPoolExecutor(max_workers=_worker_count(len(tasks))) as pool:
        futures = {task: pool.submit(cell, task) for task in tasks}
    for s, i in tasks:  # in input order, so the first failure is deterministic
        try:
            grid[s][i] = futures[(s, i)].result()
        except Exception as exc:
            raise RuntimeError(
                f"benchmark cell failed (solver={solver_names[s]}, image={prepared[i][0]}): {exc}"
            ) from exc

    digest_src = f"{solver_names}|{[n for n, _, _ in prepared]}|{scale}|{seed}"
    metadata = {
        "scale": scale,
        "seed": seed,
        "config_digest": hashlib.sha256(digest_src.encode()).hexdigest()[:16],
        "timestamp": time.time(),
    }
    return BenchmarkReport.from_grid(
        solver_names, [n for n, _, _ in prepared], grid, metadata
    )


def _load_image_dir(dirpath) -> list:
    paths = sorted(Path(dirpath).glob("*.pgm"))
    if not paths:
        raise ValueError(f"no .pgm images found in {dirpath}")
    return [(p.stem, image.read_pgm(p)) for p in paths]


def _solver_list(raw: str) -> list:
    names = [s.strip().lower() for s in raw.split(",") if s.strip()]
    for name in names:
        if name not in SOLVER_NAMES:
            raise ValueError(f"unknown solver '{name}': valid names are {', '.join(SOLVER_NAMES)}")
    if not names:
        raise ValueError("empty solver list")
    return names


# ---------------------------------------------------------------- commands


def cmd_train(args) -> int:
    images = _load_image_dir(args.hr_dir)
    p, stride, scale = args.patch_size, args.stride, args.scale
    hr_pool, lr_pool = [], []
    for _, hr in images:
        h = (hr.shape[0] // scale) * scale
        w = (hr.shape[1] // scale) * scale
        hr = hr[:h, :w]
        lr = image.degrade(hr, scale)
        mid = image.bicubic_resize(lr, w, h)
        hr_grid = image.extract_patches(hr, p, stride)
        hr_pool.append(hr_grid.patches - hr_grid.patches.mean(axis=0, keepdims=True))
        lr_pool.append(image.lr_features(mid, p, stride))
    hr_samples = np.hstack(hr_pool)
    lr_samples = np.hstack(lr_pool)

    rng = linalg.Rng(args.seed)
    total = hr_samples.shape[1]
    if total > args.max_samples:
        keep = sorted(rng.sample_indices(total, args.max_samples))
        hr_samples = hr_samples[:, keep]
        lr_samples = lr_samples[:, keep]
    num_atoms = args.atoms
    if num_atoms > hr_samples.shape[1]:
        print(
            f"note: only {hr_samples.shape[1]} samples available, reducing atoms from {num_atoms}",
            file=sys.stderr,
        )
        num_atoms = hr_samples.shape[1]

    cd = dictionary.coupled_train(
        hr_samples,
        lr_samples,
        num_atoms,
        args.sparsity,
        args.iters,
        rng,
        scale=scale,
        overlap_hr=p - stride,
    )
    dictionary.save_dictionary(cd, args.out)
    final_err = cd.error_trace[-1] if cd.error_trace else float("nan")
    print(f"trained {cd.num_atoms} atoms on {hr_samples.shape[1]} samples")
    print(f"final_representation_error={final_err:.6g}")
    print(f"saved {args.out}")
    return 0


def cmd_upscale(args) -> int:
    cd = dictionary.load_dictionary(args.dict)
    lr = image.read_pgm(args.input)
    overrides = {"sparsity_k": cd.sparsity_k}
    if args.lam is not None:
        overrides["lam"] = args.lam
    if args.max_iters is not None:
        overrides["max_iters"] = args.max_iters
    cfg = engine.UpscaleConfig(
        solver_name=args.solver,
        solver_cfg=SolverConfig.defaults(args.solver, **overrides),
        back_projection_iters=args.bp_iters,
    )
    out = engine.upscale(lr, cd, cfg)
    image.write_pgm(out, args.output)
    print(f"wrote {args.output}")
    if args.reference is not None:
        ref = image.read_pgm(args.reference)
        report = engine.psnr(image.quantize(out), ref)
        print(f"psnr_db={_psnr_str(report.psnr_db)}")
    return 0


def _psnr_str(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.4f}"


def cmd_benchmark(args) -> int:
    cd = dictionary.load_dictionary(args.dict)
    images = _load_image_dir(args.images)
    solvers = _solver_list(args.solvers)
    cfgs = {name: SolverConfig.defaults(name, sparsity_k=cd.sparsity_k) for name in solvers}
    report = run_benchmark(cd, images, solvers, solver_cfgs=cfgs, seed=args.seed)
    text = report_to_csv(report)
    print(text)
    if args.csv is not None:
        Path(args.csv).write_text(text + "\n")
        print(f"wrote {args.csv}", file=sys.stderr)
    return 0


def _debias(d, x, code, cap: int) -> np.ndarray:
    """Least-squares refit on the largest recovered support entries."""
    dense = np.zeros(d.shape[1])
    if code.nnz == 0:
        return dense
    order = np.argsort(-np.abs(code.values), kind="stable")
    keep = np.sort(code.indices[order][:cap])
    dense[keep] = linalg.least_squares(d[:, keep], x)
    return dense


def synth_config(name: str, n: int, k: int) -> SolverConfig:
    """Solver settings for the noiseless recovery experiment.

    OMP gets a 2k atom budget with residual stopping (it halts as soon as the
    k true atoms are in, and can absorb an early wrong pick); SL0 uses the
    gentler sigma decay its reference implementation recommends for accuracy;
    ista/qp run at lambda = 1e-4 and are debiased afterwards.
    """
    budget = max(k, min(2 * k, n))
    table = {
        "omp": dict(sparsity_k=budget, tol=1e-10),
        "ista": dict(lam=1e-4),
        "sl0": dict(sl0_sigma_decay=0.75),
        "qp": dict(lam=1e-4),
    }
    return SolverConfig.defaults(name, **table[name])


def run_synth(n: int, m: int, k: int, trials: int, solver_names, seed: int) -> SynthReport:
    """Planted-code recovery: seeded Gaussian unit-column D, k-sparse codes
    with values in +-[1, 2]; success = relative l2 error <= 1e-3."""
    base = linalg.Rng(seed)
    trial_seeds = [base.next_u64() for _ in range(trials)]
    instances = []
    for ts in trial_seeds:
        rng = linalg.Rng(ts)
        d = rng.normals(n, m)
        d = linalg.normalize_columns(d)
        alpha0 = np.zeros(m)
        if k > 0:
            idx = sorted(rng.sample_indices(m, k))
            for j in idx:
                alpha0[j] = (1.0 + rng.uniform()) * (1.0 if rng.uniform() < 0.5 else -1.0)
        instances.append((d, alpha0, d @ alpha0))

    rates, errors, runtimes = [], [], []
    for name in solver_names:
        cfg = synth_config(name, n, k)
        wins = 0
        errs = []
        t0 = time.perf_counter()
        for d, alpha0, x in instances:
            code, _ = solve(name, d, x, cfg)
            est = code.to_dense()
            if name in ("ista", "qp"):
                est = _debias(d, x, code, n)
            ref = float(np.linalg.norm(alpha0))
            if ref == 0.0:
                rel = 0.0 if float(np.linalg.norm(est)) == 0.0 else math.inf
            else:
                rel = float(np.linalg.norm(est - alpha0)) / ref
            errs.append(rel)
            wins += rel <= 1e-3
        runtimes.append((time.perf_counter() - t0) / trials)
        rates.append(wins / trials)
        errors.append(float(np.mean(errs)))
    return SynthReport(list(solver_names), rates, errors, runtimes)


def cmd_synth(args) -> int:
    solvers = _solver_list(args.solvers)
    report = run_synth(args.n, args.m, args.k, args.trials, solvers, args.seed)
    print(report.to_csv())
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsesr",
        description="Coupled-dictionary image superresolution benchmark toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a coupled dictionary from HR images")
    p.add_argument("--hr-dir", required=True, help="directory of HR ground-truth PGM images")
    p.add_argument("--scale", type=int, default=2)
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--atoms", type=int, default=512)
    p.add_argument("--sparsity", type=int, default=3)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--max-samples", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CDL1 dictionary path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("upscale", help="superresolve one PGM image")
    p.add_argument("--dict", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--solver", required=True, type=str.lower, choices=SOLVER_NAMES)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--bp-iters", type=int, default=0)
    p.add_argument("--reference", default=None, help="HR ground truth; prints psnr_db=<value>")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_upscale)

    p = sub.add_parser("benchmark", help="PSNR table: solvers x images")
    p.add_argument("--dict", required=True)
    p.add_argument("--images", required=True, help="directory of HR ground-truth PGM images")
    p.add_argument("--solvers", default=",".join(SOLVER_NAMES))
    p.add_argument("--csv", default=None, help="also write the table to this file")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("synth", help="synthetic sparse-recovery success rates")
    p.add_argument("--n", type=int, required=True, help="measurement dimension")
    p.add_argument("--m", type=int, required=True, help="number of atoms")
    p.add_argument("--k", type=int, required=True, help="planted sparsity")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--solvers", default=",".join(SOLVER_NAMES))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synth":
        if args.k > args.n:
            parser.error(f"--k ({args.k}) must not exceed --n ({args.n})")
        if args.k > args.m or args.n <= 0 or args.m <= 0 or args.trials <= 0:
            parser.error("need n, m, trials > 0 and k <= min(n, m)")
    try:
        return args.func(args)
    except Exception as exc:  # runtime failure -> exit 1 with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

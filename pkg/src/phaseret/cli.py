"""Command-line entry point: ``python -m phaseret <command> ...``.

Exit status is 0 on success, 1 when an experiment's acceptance check fails
and 2 on usage errors (bad flags, unreadable or inconsistent inputs).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import primg
from .config import ExperimentConfig
from .errors import CheckFailure, InvalidArgumentError
from .measure import default_eps, measure, pad_support, support_of
from .project import L1Ball, NonNegative, Support
from .solve import SolverConfig, run
from .synth import SceneSpec, generate
from .tangent import (intersection_dimension, nonneg_cone_dimension, support_intersection,
                      write_spectrum_csv)

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from exc


def _pair_paths(out: str):
    stem, ext = os.path.splitext(out)
    return f"{stem}_a{ext or '.primg'}", f"{stem}_b{ext or '.primg'}"


def cmd_synth(args) -> int:
    d = _load_json(args.config)
    if args.seed is not None:
        d["seed"] = args.seed
    spec = SceneSpec.from_dict(d)
    result = generate(spec)
    images = result if isinstance(result, tuple) else (result,)
    paths = _pair_paths(args.out) if len(images) == 2 else (args.out,)
    for path, img in zip(paths, images):
        primg.write(path, img)
        print(path)
    if args.data_out:
        primg.write(args.data_out, measure(images[0]))
    if args.support_out:
        eps = default_eps(images[0]) if args.eps is None else args.eps
        primg.write_mask(args.support_out, pad_support(support_of(images[0], eps), args.pad))
    return EXIT_OK


def _constraint(args, data_dims):
    if args.nonneg:
        return NonNegative()
    if args.l1 is not None:
        return L1Ball(args.l1)
    if args.support is None:
        raise InvalidArgumentError("run needs --support, --nonneg or --l1")
    mask = primg.read_mask(args.support)
    if mask.shape != data_dims:
        raise InvalidArgumentError(f"support dims {mask.shape} differ from data {data_dims}")
    return Support(mask)


def cmd_run(args) -> int:
    a = primg.read(args.data)
    ref = primg.read(args.reference) if args.reference else None
    cfg = SolverConfig(_constraint(args, a.shape), max_iters=args.iters, seed=args.seed or 0,
                       record_every=args.record_every, method=args.method)
    recon, trace = run(a, cfg, reference=ref)
    trace.write_csv(args.out)
    if args.recon:
        primg.write(args.recon, recon)
    print(f"status={trace.status} iters={trace.iters[-1] + 1} residual={trace.residual[-1]:.3e}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    img = primg.read(args.image)
    eps = default_eps(img) if args.eps is None else args.eps
    if args.cone:
        r = nonneg_cone_dimension(img, eps)
        print(f"lineality_dim={r.lineality_dim} cone_span_dim={r.cone_span_dim}")
        return EXIT_OK
    mask = primg.read_mask(args.support) if args.support else support_of(img, eps)
    mask = pad_support(mask, args.pad)
    spec = support_intersection(img, mask)
    if args.out:
        write_spectrum_csv(args.out, spec)
    print(f"intersection_dim={intersection_dimension(spec)}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiments import run_experiment

    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    man = run_experiment(cfg, jobs=args.jobs)
    print(json.dumps({k: v for k, v in man.summary.items() if k not in ("runs", "baseline_runs")},
                     default=str))
    print(f"manifest: {os.path.join(cfg.output_dir, 'manifest.json')} passed={man.passed}")
    if man.passed is False:
        raise CheckFailure(f"{cfg.kind} acceptance check failed")
    return EXIT_OK


def _write_pgm(path, img) -> None:
    x = np.asarray(img, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    scaled = np.zeros_like(x) if hi == lo else (x - lo) / (hi - lo)
    pix = np.round(scaled * 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{x.shape[1]} {x.shape[0]}\n65535\n".encode())
        fh.write(pix.tobytes())


def cmd_convert(args) -> int:
    img = primg.read(args.input)
    if np.iscomplexobj(img):
        img = np.abs(img)
    fmt = args.format or os.path.splitext(args.out)[1].lstrip(".").lower()
    if fmt == "csv":
        np.savetxt(args.out, img.reshape(img.shape[0], -1), delimiter=",", fmt="%.17g")
    elif fmt == "pgm":
        if img.ndim != 2:
            raise InvalidArgumentError("PGM export needs a 2-d image")
        _write_pgm(args.out, img)
    else:
        raise InvalidArgumentError(f"unknown output format {fmt!r}; use csv or pgm")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phaseret", description="Discrete phase retrieval toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a scene from a SceneSpec JSON file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="PRIMG path (pairs get _a/_b suffixes)")
    s.add_argument("--seed", type=int)
    s.add_argument("--data-out", help="also write the magnitude data")
    s.add_argument("--support-out", help="also write the padded support mask")
    s.add_argument("--pad", type=int, default=0)
    s.add_argument("--eps", type=float)
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("run", help="run the solver on magnitude data")
    r.add_argument("--data", required=True)
    r.add_argument("--support")
    r.add_argument("--nonneg", action="store_true")
    r.add_argument("--l1", type=float, metavar="RADIUS")
    r.add_argument("--iters", type=int, default=10_000)
    r.add_argument("--seed", type=int)
    r.add_argument("--record-every", type=int, default=1)
    r.add_argument("--method", choices=("hybrid", "alternating"), default="hybrid")
    r.add_argument("--reference", help="true image, enables the true_error column")
    r.add_argument("--recon", help="write the final reconstruction")
    r.add_argument("--out", required=True, help="trace CSV")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="tangent-space diagnostics of an image")
    a.add_argument("--image", required=True)
    a.add_argument("--support")
    a.add_argument("--pad", type=int, default=0)
    a.add_argument("--eps", type=float)
    a.add_argument("--cone", action="store_true", help="non-negativity cone dimensions")
    a.add_argument("--out", help="spectrum CSV")
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("experiment", help="run an experiment config")
    e.add_argument("--config", required=True)
    e.add_argument("--out", help="override output_dir")
    e.add_argument("--seed", type=int)
    e.add_argument("--jobs", type=int)
    e.set_defaults(func=cmd_experiment)

    c = sub.add_parser("convert", help="export PRIMG to CSV or PGM")
    c.add_argument("input")
    c.add_argument("--out", required=True)
    c.add_argument("--format", choices=("csv", "pgm"))
    c.set_defaults(func=cmd_convert)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

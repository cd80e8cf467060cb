"""Command-line surface.

Every run writes a manifest JSON next to its outputs carrying the exact
arguments (including the seed), so any file can be regenerated bit-for-bit.
Law flags use the grammar family:params, e.g. exp:1, berexp:0.5,2.0, ber:0.7,
bergeom:0.6,0.45, geom0:0.5, const0.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import acceptance, asymptotics as asy, multiline as ml, percolation as pc
from . import particles as pt
from .environment import (ModelKind, generate_environment, write_environment)
from .laws import Exponential, parse_law
from .rng import RngStream
from .stores import a_map, h_map, sjr_update, v_map, ANCHOR_AUTO
from .windows import Window

EXIT_OK, EXIT_USAGE, EXIT_CHECK_FAILED = 0, 1, 2


def _manifest(path: Path, args: argparse.Namespace, extra=None) -> None:
    d = {k: v for k, v in vars(args).items() if k != "func"}
    if extra:
        d.update(extra)
    path.with_suffix(path.suffix + ".manifest.json").write_text(
        json.dumps(d, sort_keys=True, default=str) + "\n")


def _parse_model(tok: str) -> ModelKind:
    name, _, rest = tok.partition(":")
    if name == "swfpp":
        return ModelKind.swfpp()
    if name == "sjr":
        return ModelKind.sjr(float(rest or 0.5))
    if name == "general":
        return ModelKind.general()
    raise ValueError(f"unknown model {tok!r}")


def cmd_gen_env(args) -> int:
    w, h = (int(x) for x in args.size.lower().split("x"))
    env = generate_environment(_parse_model(args.model), parse_law(args.law),
                               w, h, args.seed)
    out = Path(args.output)
    write_environment(env, out)
    _manifest(out, args)
    print(f"wrote {out} ({w}x{h}, model {args.model}, seed {args.seed})")
    return EXIT_OK


def cmd_passage(args) -> int:
    w, h = (int(x) for x in args.size.lower().split("x"))
    env = generate_environment(_parse_model(args.model), parse_law(args.law),
                               w, h, args.seed)
    field = pc.passage_field(env)
    out = Path(args.output)
    with out.open("w") as fh:
        fh.write("x,y,value\n")
        for i in range(env.width):
            for j in range(env.height):
                fh.write(f"{i},{j},{field.grid[i, j]!r}\n")
    _manifest(out, args)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_geodesic(args) -> int:
    w, h = (int(x) for x in args.size.lower().split("x"))
    env = generate_environment(_parse_model(args.model), parse_law(args.law),
                               w, h, args.seed)
    field = pc.passage_field(env)
    ti, tj = (int(x) for x in args.target.split(","))
    path = pc.geodesic(field, (ti, tj))
    out = Path(args.output)
    with out.open("w") as fh:
        fh.write("x,y\n")
        for (x, y) in path.vertices():
            fh.write(f"{x},{y}\n")
    _manifest(out, args, {"passage_time": field.grid[ti, tj]})
    print(f"wrote {out} (L = {field.grid[ti, tj]!r})")
    return EXIT_OK


def cmd_map_apply(args) -> int:
    rng = RngStream(args.seed, 0)
    law_i = parse_law(args.input_law)
    law_w = parse_law(args.weight_law)
    I = Window(law_i.sample(rng.split(0), size=args.window))
    W = Window(law_w.sample(rng.split(1), size=args.window))
    fn = {"h": lambda: h_map(I, W, anchor=ANCHOR_AUTO), "a": lambda: a_map(I, W),
          "v": lambda: v_map(I, W), "sjr": lambda: sjr_update(I, W)}[args.map]
    mw = fn()
    lo, hi = mw.valid_slice()
    out = Path(args.output)
    np.save(out, mw.values[lo - mw.offset: hi - mw.offset])
    _manifest(out, args, {"valid_range": [lo, hi]})
    print(f"wrote {out} (valid [{lo}, {hi}))")
    return EXIT_OK


def cmd_multiline(args) -> int:
    means = tuple(float(x) for x in args.means.split(","))
    sample = ml.sample_multiline(ml.MeanVector(means, args.map.upper()),
                                 parse_law(args.law), args.window, args.seed)
    out = Path(args.output)
    np.save(out, sample.lines)
    _manifest(out, args, {"valid_from": sample.valid_from})
    print(f"wrote {out} ({len(means)} lines x {args.window})")
    return EXIT_OK


def cmd_invariance(args) -> int:
    from .experiments import invariance_cell
    res = invariance_cell(args.map.upper(), parse_law(args.law), args.param,
                          args.samples, args.seed)
    print(f"{res.name}: stat {res.statistic:.5f} p {res.p_value:.6f} "
          f"-> {'pass' if res.passed else 'FAIL'}")
    return EXIT_OK if res.passed else EXIT_CHECK_FAILED


def cmd_intertwine(args) -> int:
    rng = RngStream(args.seed, 0)
    n = args.window
    if args.map == "a":
        y1 = Window(Exponential(1.0).sample(rng.split(0), size=n))
        y2 = Window(Exponential(1.25).sample(rng.split(1), size=n))
        y3 = Window(Exponential(2.2).sample(rng.split(2), size=n))
        res = ml.intertwine_residual_a(y1, y2, y3)
    else:
        from .laws import Bernoulli
        x1 = Window(Bernoulli(0.7).sample(rng.split(0), size=n))
        x2 = Window(ml.invariant_marginal(ml.MAP_V, Bernoulli(0.7), 0.45)
                    .sample(rng.split(1), size=n))
        x3 = Window(ml.invariant_marginal(ml.MAP_V, Bernoulli(0.7), 0.65)
                    .sample(rng.split(2), size=n))
        res = ml.intertwine_residual_v(x1, x2, x3)
    print(f"intertwine-{args.map} residual: {res!r}")
    return EXIT_OK if res == 0.0 else EXIT_CHECK_FAILED


def cmd_tasep(args) -> int:
    law = parse_law(args.law)
    init = pt.ParticleConfig(np.zeros(args.particles))
    traj = pt.run(args.kind, init, args.steps, law, args.seed)
    out = Path(args.output)
    with out.open("w") as fh:
        fh.write("t,k,position\n")
        for t, cfg in enumerate(traj):
            for k, pos in enumerate(cfg.positions):
                fh.write(f"{t},{k},{pos!r}\n")
    _manifest(out, args)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_branch(args) -> int:
    traj = asy.branch_process_sample(args.level_cap, RngStream(args.seed, 0))
    ts, bs = traj.jumps()
    out = Path(args.output)
    with out.open("w") as fh:
        fh.write("t,b\n")
        for t, b in zip(ts, bs):
            fh.write(f"{t!r},{b}\n")
    _manifest(out, args, {"branches": asy.branch_count(traj, args.level_cap)})
    print(f"wrote {out} (B({args.level_cap}) = {asy.branch_count(traj, args.level_cap)})")
    return EXIT_OK


def cmd_convoy(args) -> int:
    pts = asy.convoy_sample(args.rho, args.horizon, RngStream(args.seed, 0))
    out = Path(args.output)
    with out.open("w") as fh:
        fh.write("k\n")
        for k in pts:
            fh.write(f"{k}\n")
    cands = asy.convoy_constant_candidates(args.rho)
    _manifest(out, args, {"count": len(pts),
                          "density": len(pts) / np.sqrt(args.horizon),
                          "candidates": cands})
    print(f"wrote {out} ({len(pts)} renewal points; density/sqrt(n) "
          f"= {len(pts)/np.sqrt(args.horizon):.4f})")
    return EXIT_OK


def cmd_competition(args) -> int:
    env = generate_environment(ModelKind.swfpp(), parse_law(args.law),
                               args.width, args.height + 1, args.seed)
    rn = pc.competition_interface(env, args.height)
    out = Path(args.output)
    with out.open("w") as fh:
        fh.write("n,r_n\n")
        for i, r in enumerate(rn, start=1):
            fh.write(f"{i},{r}\n")
    _manifest(out, args)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_plot_data(args) -> int:
    from .stats import write_plot_data
    data = np.load(args.input)
    xs = np.arange(len(data))
    write_plot_data(args.output, xs, data)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_reproduce_all(args) -> int:
    results = acceptance.run_all(budget=args.budget, seed=args.seed,
                                 only=args.only.split(",") if args.only else None)
    if args.output:
        Path(args.output).write_text(json.dumps(results, indent=2) + "\n")
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fpplab",
        description="Directed first-passage percolation simulation and verification lab")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-env", help="generate and store an environment")
    p.add_argument("--model", default="swfpp")
    p.add_argument("--law", default="exp:1")
    p.add_argument("--size", required=True, help="WIDTHxHEIGHT")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen_env)

    p = sub.add_parser("passage", help="passage-time field as CSV")
    p.add_argument("--model", default="swfpp")
    p.add_argument("--law", default="exp:1")
    p.add_argument("--size", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_passage)

    p = sub.add_parser("geodesic", help="right-most geodesic to a target")
    p.add_argument("--model", default="swfpp")
    p.add_argument("--law", default="exp:1")
    p.add_argument("--size", required=True)
    p.add_argument("--target", required=True, help="X,Y")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("map-apply", help="apply one update map to sampled windows")
    p.add_argument("--map", choices=("h", "a", "v", "sjr"), required=True)
    p.add_argument("--input-law", default="exp:2")
    p.add_argument("--weight-law", default="exp:1")
    p.add_argument("--window", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_map_apply)

    p = sub.add_parser("multiline", help="sample a multi-line distribution")
    p.add_argument("--map", choices=("h", "a", "v"), default="h")
    p.add_argument("--law", default="exp:1")
    p.add_argument("--means", required=True, help="comma-separated decreasing means")
    p.add_argument("--window", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_multiline)

    p = sub.add_parser("invariance", help="single-cell invariance check")
    p.add_argument("--map", choices=("h", "a", "v"), required=True)
    p.add_argument("--law", required=True)
    p.add_argument("--param", type=float, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_invariance)

    p = sub.add_parser("intertwine", help="exact intertwining residual")
    p.add_argument("--map", choices=("a", "v"), required=True)
    p.add_argument("--window", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_intertwine)

    p = sub.add_parser("tasep", help="run a discrete-time TASEP trajectory")
    p.add_argument("--kind", choices=("parallel", "sequential"), default="parallel")
    p.add_argument("--law", default="ber:0.5")
    p.add_argument("--particles", type=int, default=100)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_tasep)

    p = sub.add_parser("branch", help="sample a branch-process trajectory")
    p.add_argument("--level-cap", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_branch)

    p = sub.add_parser("convoy", help="sample one convoy renewal set")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--horizon", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_convoy)

    p = sub.add_parser("competition", help="competition interface r_n")
    p.add_argument("--law", default="exp:1")
    p.add_argument("--width", type=int, default=4096)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_competition)

    p = sub.add_parser("plot-data", help="turn a saved array into (x, y) CSV")
    p.add_argument("--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_plot_data)

    p = sub.add_parser("reproduce-all", help="run the acceptance battery")
    p.add_argument("--budget", choices=("smoke", "desk"), default="desk")
    p.add_argument("--seed", type=int, default=2026)
    p.add_argument("--only", default=None, help="comma-separated criterion ids")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_reproduce_all)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

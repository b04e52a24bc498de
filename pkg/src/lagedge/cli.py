"""Command line entry point: ``lagedge <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data or I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .exceptions import InvalidConfig, LagEdgeError
from .grid import TimeAxis
from .pipeline import RunConfig, ablate, bench, build_analytic, load_input, run_edge, run_ftle, run_ridges
from .ridge import ridge_dissimilarity, ridge_set_distance

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _finite(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _dims(text):
    try:
        dims = tuple(int(p) for p in text.lower().replace(",", "x").split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected dims like 256x128, got {text!r}") from None
    if len(dims) not in (2, 3) or min(dims) < 2:
        raise argparse.ArgumentTypeError(f"expected 2 or 3 axes of >= 2 nodes, got {text!r}")
    return dims


def _floats(text):
    try:
        return tuple(float(p) for p in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _key_value(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key, value


def _add_run_flags(p, ridge=True, run=True):
    S = argparse.SUPPRESS
    p.add_argument("--config", metavar="PATH", help="JSON run configuration; flags override it")
    if run:
        p.add_argument("--t0", type=_finite, default=S, help="start time")
        p.add_argument("--T", type=_finite, default=S, help="integration time (negative = backward)")
        p.add_argument("--M", type=_positive_int, default=S, help="samples per trajectory after the seed")
        p.add_argument("--substeps", type=_positive_int, default=S, help="RK4 steps per sample interval")
        p.add_argument("--boundary", choices=("freeze", "truncate"), default=S)
        p.add_argument("--moments", default=S, metavar="LIST", help="moment orders, e.g. 1,2 or 1-5")
        p.add_argument("--root-normalize", action="store_true", default=S,
                       help="k-th root of the order-k central moments")
        p.add_argument("--include-space", action="store_true", default=S,
                       help="add pathline coordinates as channels")
        p.add_argument("--normalize", action="store_true", default=S,
                       help="standardize feature channels before fitting")
        p.add_argument("--threads", type=_positive_int, default=S)
    if ridge:
        p.add_argument("--sigma", type=_finite, default=S, help="ridge smoothing scale (physical units)")
        p.add_argument("--strength-min", type=_finite, default=S, help="absolute ridge strength threshold")
        p.add_argument("--strength-quantile", type=_finite, default=S,
                       help="ridge strength threshold as a field quantile in [0, 1]")
        p.add_argument("--eigenvalue-max", type=_finite, default=S, help="Hessian eigenvalue threshold")
        p.add_argument("--min-vertices", type=_positive_int, default=S)
        p.add_argument("--border", type=_nonneg_int, default=S, help="ignore ridges this many cells from the edge")
    p.add_argument("--dump-config", nargs="?", const="-", metavar="PATH",
                   help="write the effective configuration (stdout and exit when no PATH)")


_FLAG_KEYS = ("t0", "T", "M", "substeps", "boundary", "moments", "root_normalize", "include_space",
              "normalize", "threads", "sigma", "strength_min", "strength_quantile", "eigenvalue_max",
              "min_vertices", "border", "repeats", "out", "pgm")


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    updates = {k: getattr(args, k) for k in _FLAG_KEYS if hasattr(args, k) and getattr(args, k) is not None}
    if getattr(args, "dataset", None):
        updates["dataset"] = args.dataset
    if isinstance(updates.get("out"), Path):
        updates["out"] = str(updates["out"])
    cfg = replace(cfg, **updates)
    try:
        cfg.integration()
        cfg.moment_spec()
        cfg.ridge_params()
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _dump(args, cfg: RunConfig) -> bool:
    """Handle --dump-config; True when the command should stop."""
    target = getattr(args, "dump_config", None)
    if target is None:
        return False
    if target == "-":
        sys.stdout.write(cfg.dumps())
        return True
    Path(target).write_text(cfg.dumps())
    return False


def _require_out(cfg: RunConfig, flag="--out"):
    if not cfg.out:
        raise UsageError(f"{flag} is required")
    io.ensure_parent(cfg.out)
    return cfg.out


def _write_field(path, field_, name, t0):
    h = io.VolumeHeader.for_field(field_.grid, TimeAxis(t0, 1.0, 1), name)
    io.write_volume(path, h, field_.values[None])


def _write_pgm(path, values):
    lo, hi = float(np.min(values)), float(np.max(values))
    if not hi > lo:
        hi = lo + 1.0
    io.ensure_parent(path)
    io.write_heatmap_pgm(path, values, lo, hi)


# commands ------------------------------------------------------------------

def cmd_gen(args):
    cfg = _config(args)
    recipe = dict(cfg.analytic or {})
    for key in ("flow", "frames", "t_start", "t_step"):
        if getattr(args, key) is not None:
            recipe[key] = getattr(args, key)
    if args.dims is not None:
        recipe["dims"] = list(args.dims)
    if args.spacing is not None:
        recipe["spacing"] = list(args.spacing)
    if args.origin is not None:
        recipe["origin"] = list(args.origin)
    if args.param:
        recipe["params"] = {**recipe.get("params", {}), **{k: float(v) for k, v in args.param}}
    if args.scalar:
        scalars = dict(recipe.get("scalars", {}))
        for name, text in args.scalar:
            try:
                scalars[name] = json.loads(text)
            except json.JSONDecodeError as exc:
                raise UsageError(f"--scalar {name}: invalid JSON ({exc})") from None
        recipe["scalars"] = scalars
    recipe.setdefault("t_step", 0.1)
    cfg = replace(cfg, analytic=recipe)
    if _dump(args, cfg):
        return 0
    out = _require_out(cfg)
    ds = build_analytic(recipe, n_jobs=cfg.n_jobs)
    io.save_dataset(out, ds)
    print(f"wrote {out}: dims {'x'.join(map(str, ds.grid.dims))}, frames {ds.time.frame_count}, "
          f"scalars {list(ds.names)}")
    return 0


def cmd_edge(args):
    cfg = _config(args)
    if _dump(args, cfg):
        return 0
    out = _require_out(cfg)
    ds = load_input(cfg)
    cfg.validate(ds)
    ef = run_edge(ds, cfg)
    _write_field(out, ef, "edge_strength", cfg.t0)
    if cfg.pgm:
        _write_pgm(cfg.pgm, ef.values)
    print(f"wrote {out}: edge strength min {ef.values.min():.6g} max {ef.values.max():.6g}")
    return 0


def cmd_ftle(args):
    cfg = _config(args)
    if _dump(args, cfg):
        return 0
    out = _require_out(cfg)
    ds = load_input(cfg)
    cfg.validate(ds)
    ft = run_ftle(ds, cfg)
    _write_field(out, ft, "ftle", cfg.t0)
    if cfg.pgm:
        _write_pgm(cfg.pgm, ft.values)
    print(f"wrote {out}: {ft.direction} FTLE min {ft.values.min():.6g} max {ft.values.max():.6g}")
    return 0


def cmd_ridges(args):
    cfg = _config(args)
    if _dump(args, cfg):
        return 0
    out = _require_out(cfg)
    h, frames = io.read_volume(args.volume)
    if h.kind != "scalar" or len(h.dims) != 2:
        raise UsageError(f"{args.volume}: ridges need a 2D scalar volume, found {h.kind} {h.dims}")
    if not 0 <= args.frame < h.frame_count:
        raise UsageError(f"--frame {args.frame} outside [0, {h.frame_count})")
    lines = run_ridges(frames[args.frame].astype(np.float64), cfg, h.grid)
    io.write_ridges_csv(out, lines)
    print(f"wrote {out}: {len(lines)} ridge lines, {sum(len(r) for r in lines)} vertices")
    return 0


def cmd_compare(args):
    a, b = io.read_ridges_csv(args.a), io.read_ridges_csv(args.b)
    print(f"{'line_a':>6} {'line_b':>6} {'d_ij':>22}")
    for i, ci in enumerate(a):
        for j, cj in enumerate(b):
            print(f"{i:>6} {j:>6} {ridge_dissimilarity(ci, cj):>22.17g}")
    d = ridge_set_distance(a, b)
    print(f"{'direction':<10}{'mean':>24}{'max':>24}")
    print(f"{'a->b':<10}{d.mean_ab:>24.17g}{d.max_ab:>24.17g}")
    print(f"{'b->a':<10}{d.mean_ba:>24.17g}{d.max_ba:>24.17g}")
    return 0


def cmd_bench(args):
    cfg = _config(args)
    if args.repeats is not None:
        cfg = replace(cfg, repeats=args.repeats)
    if _dump(args, cfg):
        return 0
    ds = load_input(cfg)
    res = bench(ds, cfg)
    print(res.report())
    return 0


def cmd_ablate(args):
    cfg = _config(args)
    if _dump(args, cfg):
        return 0
    ds = load_input(cfg)
    rep = ablate(ds, cfg)
    if cfg.out:
        outdir = Path(cfg.out)
        outdir.mkdir(parents=True, exist_ok=True)
        for row in rep.rows:
            tag = row.moments.replace(",", "_")
            _write_field(outdir / f"edge_m{tag}.levol", row.field, "edge_strength", cfg.t0)
            io.write_ridges_csv(outdir / f"ridges_m{tag}.csv", row.ridges)
        (outdir / "report.txt").write_text(rep.text() + "\n")
    print(rep.text())
    return 0


def _volume_paths(path: Path):
    if path.is_dir():
        found = sorted(path.glob("*.levol"))
        if not found:
            raise io.IoFailure(f"no .levol volumes in {path}")
        return found
    return [path]


def cmd_info(args):
    for p in _volume_paths(Path(args.path)):
        h = io.read_header(p) if not args.stats else None
        if args.stats:
            h, frames = io.read_volume(p)
        kind = f"vector {h.components}" if h.kind == "vector" else "scalar"
        print(f"{p}")
        print(f"  name        {h.name}")
        print(f"  kind        {kind}")
        print(f"  dims        {'x'.join(map(str, h.dims))}")
        print(f"  spacing     {' '.join(repr(s) for s in h.spacing)}")
        print(f"  origin      {' '.join(repr(s) for s in h.origin)}")
        print(f"  frames      {h.frame_count}")
        print(f"  t_start     {h.t_start!r}")
        print(f"  t_step      {h.t_step!r}")
        if args.stats:
            v = frames.astype(np.float64)
            print(f"  min         {v.min():.9g}")
            print(f"  max         {v.max():.9g}")
            print(f"  mean        {v.mean():.9g}")
    return 0


def cmd_import_raw(args):
    h = io.import_raw(args.raw, args.out, args.dims, args.spacing, args.origin, args.frames,
                      args.components, args.name, args.t_start, args.t_step)
    print(f"wrote {args.out}: {h.kind} {'x'.join(map(str, h.dims))}, frames {h.frame_count}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lagedge", allow_abbrev=False,
                description="Lagrangian edge strength, FTLE and height ridges on gridded flows.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="write an analytic dataset bundle", allow_abbrev=False)
    g.add_argument("--flow", choices=("uniform", "rotation", "saddle", "double_gyre"))
    g.add_argument("--dims", type=_dims)
    g.add_argument("--spacing", type=_floats)
    g.add_argument("--origin", type=_floats)
    g.add_argument("--frames", type=_positive_int)
    g.add_argument("--t-start", type=_finite)
    g.add_argument("--t-step", type=_finite)
    g.add_argument("--param", type=_key_value, action="append", metavar="KEY=VALUE")
    g.add_argument("--scalar", type=_key_value, action="append", metavar="NAME=JSON",
                   help='scalar recipe, e.g. c={"kind": "constant", "value": 1}')
    g.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS)
    g.add_argument("--out", default=argparse.SUPPRESS, metavar="DIR")
    g.add_argument("--config", metavar="PATH")
    g.add_argument("--dump-config", nargs="?", const="-", metavar="PATH")
    g.set_defaults(func=cmd_gen)

    for name, func, label in (("edge", cmd_edge, "edge strength"), ("ftle", cmd_ftle, "FTLE")):
        s = sub.add_parser(name, help=f"compute the {label} field", allow_abbrev=False)
        s.add_argument("dataset", nargs="?", help="dataset bundle directory or velocity volume")
        _add_run_flags(s, ridge=False)
        s.add_argument("--out", default=argparse.SUPPRESS, metavar="PATH")
        s.add_argument("--pgm", default=argparse.SUPPRESS, metavar="PATH", help="also write a 16-bit heatmap")
        s.set_defaults(func=func)

    r = sub.add_parser("ridges", help="extract height ridges of a 2D scalar volume", allow_abbrev=False)
    r.add_argument("volume")
    r.add_argument("--frame", type=_nonneg_int, default=0)
    _add_run_flags(r, run=False)
    r.add_argument("--out", default=argparse.SUPPRESS, metavar="CSV")
    r.set_defaults(func=cmd_ridges)

    c = sub.add_parser("compare", help="ridge dissimilarities between two ridge CSV files",
                       allow_abbrev=False)
    c.add_argument("a")
    c.add_argument("b")
    c.set_defaults(func=cmd_compare)

    b = sub.add_parser("bench", help="time edge vs FTLE pipelines", allow_abbrev=False)
    b.add_argument("dataset", nargs="?")
    _add_run_flags(b, ridge=False)
    b.add_argument("--repeats", type=_positive_int)
    b.set_defaults(func=cmd_bench)

    a = sub.add_parser("ablate", help="edge fields and ridges for several moment sets", allow_abbrev=False)
    a.add_argument("dataset", nargs="?")
    _add_run_flags(a)
    a.add_argument("--out", default=argparse.SUPPRESS, metavar="DIR")
    a.set_defaults(func=cmd_ablate)

    i = sub.add_parser("info", help="print volume header metadata", allow_abbrev=False)
    i.add_argument("path", help="volume header or dataset directory")
    i.add_argument("--stats", action="store_true", help="also read the body and print min/max/mean")
    i.set_defaults(func=cmd_info)

    m = sub.add_parser("import-raw", help="wrap a raw float32le file in a volume header",
                       allow_abbrev=False)
    m.add_argument("raw")
    m.add_argument("--dims", type=_dims, required=True)
    m.add_argument("--spacing", type=_floats, required=True)
    m.add_argument("--origin", type=_floats)
    m.add_argument("--frames", type=_positive_int, default=1)
    m.add_argument("--components", type=_positive_int, default=1)
    m.add_argument("--name", default="field")
    m.add_argument("--t-start", type=_finite, default=0.0)
    m.add_argument("--t-step", type=_finite, default=1.0)
    m.add_argument("--out", required=True, metavar="PATH")
    m.set_defaults(func=cmd_import_raw)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lagedge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LagEdgeError, OSError) as exc:
        print(f"lagedge {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

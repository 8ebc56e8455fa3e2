"""Command-line harness: single fits, tau-grid comparisons, synthetic benches.

Three subcommands share one layout convention:

* ``fit``   prints one fitted plane plus its objectives to standard output.
* ``grid``  fits several methods across a tau grid and writes counts.tsv,
  events.tsv, coefficients.tsv (and optionally curves.svg) to a directory.
* ``bench`` generates seeded synthetic datasets over a size ladder and
  tabulates median spike/pulse counts per method, one row per size.

Every run emits a manifest (seeds, dataset fingerprints, full flag echo,
toolkit version) so it can be reproduced exactly.  Tabular outputs are
tab-delimited with a header row and are byte-identical across repeated runs;
wall-clock lives only in the manifest.

Exit codes: 0 success, 2 bad flags or flag semantics, 3 data problems
(missing file, parse failure, invariant violation), 4 solver failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import (
    CsvSchema,
    DataError,
    Dataset,
    KIND_HETERO_NORMAL,
    KIND_PARETO,
    SynthConfig,
    dataset_fingerprint,
    gen_hetero_normal,
    gen_pareto,
    load_anscombe,
    load_csv,
    load_swiss,
)
from .diagnostics import CountCurve, GridResult, count_below, detect_events, suppress_events
from .estimators import TauGrid, fit_grid, fit_rq_lp, fit_rrq, fit_smooth
from .losses import SRQ, SMRQ, FlexCheckParams, check_classic, loss_total
from .optim import SolverError

__all__ = ["RunManifest", "build_parser", "main", "entrypoint", "run_bench"]

_BUILTINS = {"swiss": ("Fertility", load_swiss), "anscombe": ("y1", load_anscombe)}
_SMOOTH_PRESETS = {"srq": SRQ, "smrq": SMRQ}
_METHOD_CHOICES = ("rq", "srq", "smrq", "rrq", "flex")

# fixed palette so repeated runs color methods identically
_COLORS = ("#1b6ca8", "#c23b22", "#2e7d32", "#8e44ad", "#e67e22", "#00838f")


# ---------------------------------------------------------------------------
# manifest

@dataclass
class RunManifest:
    """Everything needed to reproduce a run: flags, seeds, data identity."""

    command: list[str]
    config: dict
    seeds: list[int]
    datasets: list[dict]
    version: str
    wall_clock_utc: str
    elapsed_seconds: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _manifest(args: argparse.Namespace, seeds: list[int], datasets: list[dict],
              started: float) -> RunManifest:
    config = {}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        if isinstance(value, TauGrid):
            value = [float(t) for t in value.values]
        config[key] = list(value) if isinstance(value, (tuple, list)) else value
    return RunManifest(
        command=list(sys.argv),
        config=config,
        seeds=seeds,
        datasets=datasets,
        version=__version__,
        wall_clock_utc=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        elapsed_seconds=round(time.perf_counter() - started, 6),
    )


# ---------------------------------------------------------------------------
# flag parsing helpers

def _parse_grid(text: str) -> TauGrid:
    """Either a point count m (levels i/(m+1)) or a start,end,step triple."""
    try:
        if "," not in text:
            return TauGrid.from_count(int(text))
        parts = [float(tok) for tok in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected start,end,step, got {text!r}")
        return TauGrid.from_step(*parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _parse_methods(text: str) -> list[str]:
    methods = [tok.strip() for tok in text.split(",") if tok.strip()]
    if not methods:
        raise argparse.ArgumentTypeError("empty method list")
    for m in methods:
        if m not in _METHOD_CHOICES:
            raise argparse.ArgumentTypeError(
                f"unknown method {m!r}, choose from {', '.join(_METHOD_CHOICES)}")
    if len(set(methods)) != len(methods):
        raise argparse.ArgumentTypeError(f"duplicate method in {text!r}")
    return methods


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not sizes or any(n < 3 for n in sizes):
        raise argparse.ArgumentTypeError(f"sizes must all be >= 3, got {text!r}")
    return sizes


def _tau_flag(text: str) -> float:
    try:
        tau = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not 0.0 < tau < 1.0:
        raise argparse.ArgumentTypeError(f"tau must lie strictly inside (0, 1), got {text}")
    return tau


def _load_dataset(args: argparse.Namespace, parser: argparse.ArgumentParser) -> Dataset:
    name = args.data
    if name in _BUILTINS and not Path(name).exists():
        default, loader = _BUILTINS[name]
        if args.response not in (None, default):
            parser.error(f"builtin dataset {name!r} has fixed response {default!r}; "
                         "pass a CSV path to regress on another column")
        return loader()
    if args.response is None:
        parser.error("--response is required for CSV input")
    return load_csv(name, CsvSchema(response=args.response))


def _resolve_flex(args: argparse.Namespace, parser: argparse.ArgumentParser,
                  needed: bool) -> FlexCheckParams | None:
    flags = (args.c, args.h, args.s, args.v)
    if not needed:
        if any(f is not None for f in flags):
            parser.error("--c/--h/--s/--v apply only when method flex is requested")
        return None
    if any(f is None for f in flags):
        parser.error("method flex requires all of --c, --h, --s and --v")
    try:
        return FlexCheckParams(c=args.c, h=args.h, s=args.s, v=args.v)
    except ValueError as exc:
        parser.error(str(exc))


# ---------------------------------------------------------------------------
# output helpers

def _fmt(value: float) -> str:
    return format(float(value), ".12g")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_tsv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    lines = ["\t".join(header)] + ["\t".join(row) for row in rows]
    _write_text(path, "\n".join(lines) + "\n")


def _qs_params(method: str, flex: FlexCheckParams | None) -> FlexCheckParams:
    # the piecewise methods have no smoothing of their own; report Q_S under
    # the default sharp smoothing so the smooth-vs-exact gap is visible
    if method == "flex":
        return flex
    return _SMOOTH_PRESETS.get(method, SRQ)


# ---------------------------------------------------------------------------
# fit

def cmd_fit(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    started = time.perf_counter()
    data = _load_dataset(args, parser)
    flex = _resolve_flex(args, parser, needed=args.method == "flex")

    if args.method == "rq":
        fit = fit_rq_lp(data, args.tau)
        beta, status = fit.beta, fit.report.status
    elif args.method == "rrq":
        model = fit_rrq(data, [args.tau])
        beta, status = model.plane(0), model.med_report.status
        if model.homoscedastic_degenerate:
            status += "; homoscedastic-degenerate, family collapsed to the median plane"
        elif model.negative_scales:
            status += "; some fitted scales are negative"
    else:
        params = flex if args.method == "flex" else _SMOOTH_PRESETS[args.method]
        init = fit_rq_lp(data, args.tau).beta if args.warm_start else None
        fit = fit_smooth(data, args.tau, params=params, init=init)
        beta, status = fit.beta, fit.report.status

    qs = _qs_params(args.method, flex)
    q_classic = float(np.sum(check_classic(data.residuals(beta), args.tau)))
    q_smooth = loss_total(data, beta, args.tau, qs)

    width = max(len(name) for name in data.column_names)
    print(f"method: {args.method}")
    print(f"tau: {_fmt(args.tau)}")
    print("coefficients:")
    for name, value in zip(data.column_names, beta):
        print(f"  {name:<{width}}  {_fmt(value)}")
    print(f"below_count: {count_below(data, beta)} / {data.n_obs}")
    print(f"objective_classic: {_fmt(q_classic)}")
    print(f"objective_smooth[c={_fmt(qs.c)},h={_fmt(qs.h)},s={_fmt(qs.s)},v={_fmt(qs.v)}]: "
          f"{_fmt(q_smooth)}")
    print(f"status: {status}")

    manifest = _manifest(args, seeds=[], datasets=[dataset_fingerprint(data)],
                         started=started)
    print("manifest: " + json.dumps(asdict(manifest), sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# grid

def _grid_columns(args: argparse.Namespace, parser: argparse.ArgumentParser,
                  data: Dataset) -> dict[str, GridResult]:
    """Fit every requested method, interleaving "<m>-s" right after each "<m>"."""
    flex = _resolve_flex(args, parser, needed="flex" in args.methods)
    columns: dict[str, GridResult] = {}
    for method in args.methods:
        result = fit_grid(data, args.grid, method,
                          params=flex if method == "flex" else None)
        if result.curve is not None:
            result.events = detect_events(result.curve)
        columns[method] = result
        if args.suppress:
            if result.curve is None:
                columns[method + "-s"] = result
            else:
                columns[method + "-s"] = suppress_events(result, result.events)
    return columns


def cmd_grid(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    started = time.perf_counter()
    data = _load_dataset(args, parser)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    columns = _grid_columns(args, parser, data)
    names = list(columns)
    taus = args.grid.values

    count_rows = []
    for i, tau in enumerate(taus):
        row = [_fmt(tau)]
        for name in names:
            curve = columns[name].curve
            row.append(str(int(curve.counts[i])) if curve is not None else "")
        count_rows.append(row)
    _write_tsv(out / "counts.tsv", ["tau"] + names, count_rows)

    def event_cell(name: str) -> tuple[str, str]:
        events = columns[name].events
        if events is None:
            return "-", "-"
        return events.cell(), str(events.wide_count)

    cells = [event_cell(name) for name in names]
    _write_tsv(out / "events.tsv", ["measure"] + names,
               [["spikes/pulses"] + [c[0] for c in cells],
                ["wide"] + [c[1] for c in cells]])

    coef_rows = []
    for name in names:
        for i, tau in enumerate(taus):
            beta = columns[name].coefficients[i]
            coef_rows.append([name, _fmt(tau)]
                             + [format(v, ".17g") for v in beta])
    _write_tsv(out / "coefficients.tsv",
               ["method", "tau"] + list(data.column_names), coef_rows)

    if args.svg:
        curves = {n: c.curve for n, c in columns.items() if c.curve is not None}
        _write_text(out / "curves.svg", _render_count_curves(curves, data.n_obs))
        if data.n_coef == 2:
            for name in names:
                svg = _render_line_overlay(data, columns[name])
                _write_text(out / f"lines-{name}.svg", svg)

    failures = [f"{name}: {status}" for name in names
                for status in columns[name].statuses if status.startswith("failed")]
    manifest = _manifest(args, seeds=[], datasets=[dataset_fingerprint(data)],
                         started=started)
    _write_text(out / "manifest.json", manifest.to_json())

    for name in names:
        events = columns[name].events
        summary = events.cell() + f" (wide {events.wide_count})" if events else "n/a"
        print(f"{name}: events {summary}")
    print(f"wrote counts.tsv, events.tsv, coefficients.tsv to {out}")
    if failures:
        print("solver failures:\n  " + "\n  ".join(sorted(set(failures))),
              file=sys.stderr)
        return 4
    return 0


# ---------------------------------------------------------------------------
# bench

def run_bench(kind: str, sizes: list[int], replicates: int, seed: int,
              methods: list[str], grid: TauGrid | None = None) -> dict:
    """Median spike/pulse counts per (size, method) over seeded replicates.

    Replicate (i, j) draws its dataset with seed = base + 100000*i + j, so
    cells are independent of method order and reproducible in isolation.
    Returns {(n, method): (median_spikes, median_pulses)}.
    """
    grid = grid if grid is not None else TauGrid.from_count(99)
    generate = gen_hetero_normal if kind == KIND_HETERO_NORMAL else gen_pareto
    table: dict[tuple[int, str], tuple[float, float]] = {}
    for i, n in enumerate(sizes):
        tally = {m: ([], []) for m in methods}
        for j in range(replicates):
            rep_seed = seed + 100000 * i + j
            data = generate(SynthConfig(n=n, seed=rep_seed, kind=kind))
            for m in methods:
                result = fit_grid(data, grid, m)
                if result.curve is None:
                    bad = next(s for s in result.statuses if s.startswith("failed"))
                    raise SolverError(
                        f"bench fit failed (n={n}, seed={rep_seed}, method={m}): {bad}")
                events = detect_events(result.curve)
                tally[m][0].append(events.spike_count)
                tally[m][1].append(events.pulse_count)
        for m in methods:
            table[(n, m)] = (float(np.median(tally[m][0])),
                             float(np.median(tally[m][1])))
    return table


def cmd_bench(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    started = time.perf_counter()
    kind = KIND_HETERO_NORMAL if args.kind == "normal" else KIND_PARETO
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    table = run_bench(kind, args.sizes, args.replicates, args.seed, args.methods)

    rows = []
    for n in args.sizes:
        row = [str(n)]
        for m in args.methods:
            spikes, pulses = table[(n, m)]
            row.append(f"{spikes:g}/{pulses:g}")
        rows.append(row)
    _write_tsv(out / "bench.tsv", ["n"] + list(args.methods), rows)

    seeds = [args.seed + 100000 * i + j
             for i in range(len(args.sizes)) for j in range(args.replicates)]
    manifest = _manifest(args, seeds=seeds, datasets=[], started=started)
    _write_text(out / "manifest.json", manifest.to_json())

    print(f"wrote bench.tsv ({len(args.sizes)} sizes x {len(args.methods)} methods, "
          f"{args.replicates} replicates) to {out}")
    return 0


# ---------------------------------------------------------------------------
# SVG rendering (static 1.1, no external assets)

def _svg_header(width: int, height: int) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]


def _render_count_curves(curves: dict[str, CountCurve], n_obs: int) -> str:
    """Count curves over tau plus the dashed ideal line, one polyline each."""
    W, H, ML, MR, MT, MB = 720, 480, 60, 20, 24, 48
    taus = next(iter(curves.values())).taus if curves else np.array([0.0, 1.0])
    t_lo, t_hi = float(taus[0]), float(taus[-1])

    def sx(t):
        return ML + (t - t_lo) / max(t_hi - t_lo, 1e-12) * (W - ML - MR)

    def sy(c):
        return H - MB - (c / max(n_obs, 1)) * (H - MT - MB)

    parts = _svg_header(W, H)
    parts.append(f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" '
                 f'height="{H - MT - MB}" fill="none" stroke="#444"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        t = t_lo + frac * (t_hi - t_lo)
        c = frac * n_obs
        parts.append(f'<text x="{sx(t):.2f}" y="{H - MB + 16}" font-size="11" '
                     f'text-anchor="middle" fill="#222">{t:.2f}</text>')
        parts.append(f'<text x="{ML - 6}" y="{sy(c) + 4:.2f}" font-size="11" '
                     f'text-anchor="end" fill="#222">{c:.0f}</text>')
    parts.append(f'<text x="{(ML + W - MR) / 2:.2f}" y="{H - 10}" font-size="12" '
                 f'text-anchor="middle" fill="#222">tau</text>')
    parts.append(f'<text x="14" y="{(MT + H - MB) / 2:.2f}" font-size="12" '
                 f'text-anchor="middle" fill="#222" '
                 f'transform="rotate(-90 14 {(MT + H - MB) / 2:.2f})">below count</text>')

    (ix0, iy0), (ix1, iy1) = ((t_lo, 0.0), (t_hi, float(n_obs)))
    parts.append(f'<line x1="{sx(ix0):.2f}" y1="{sy(iy0):.2f}" x2="{sx(ix1):.2f}" '
                 f'y2="{sy(iy1):.2f}" stroke="#888" stroke-dasharray="5,4"/>')

    for k, (name, curve) in enumerate(curves.items()):
        color = _COLORS[k % len(_COLORS)]
        points = " ".join(f"{sx(t):.2f},{sy(c):.2f}"
                          for t, c in zip(curve.taus, curve.counts))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{points}"/>')
        parts.append(f'<text x="{ML + 10}" y="{MT + 18 + 16 * k}" font-size="12" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _render_line_overlay(data: Dataset, result: GridResult) -> str:
    """Scatter of (x, y) with one fitted line per grid level (p = 2 only)."""
    W, H, ML, MR, MT, MB = 720, 480, 60, 20, 24, 48
    x, y = data.X[:, 0], data.y
    x_lo, x_hi = float(x.min()), float(x.max())
    planes = result.coefficients
    ends = np.concatenate([planes @ [x_lo, 1.0], planes @ [x_hi, 1.0], y])
    ends = ends[np.isfinite(ends)]
    y_lo, y_hi = float(ends.min()), float(ends.max())
    pad = 0.05 * max(y_hi - y_lo, 1e-12)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(v):
        return ML + (v - x_lo) / max(x_hi - x_lo, 1e-12) * (W - ML - MR)

    def sy(v):
        return H - MB - (v - y_lo) / max(y_hi - y_lo, 1e-12) * (H - MT - MB)

    parts = _svg_header(W, H)
    parts.append(f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" '
                 f'height="{H - MT - MB}" fill="none" stroke="#444"/>')
    for slope, icept in planes:
        if not (np.isfinite(slope) and np.isfinite(icept)):
            continue
        parts.append(f'<line x1="{sx(x_lo):.2f}" y1="{sy(slope * x_lo + icept):.2f}" '
                     f'x2="{sx(x_hi):.2f}" y2="{sy(slope * x_hi + icept):.2f}" '
                     f'stroke="#1b6ca8" stroke-width="0.8" stroke-opacity="0.5"/>')
    for xi, yi in zip(x, y):
        parts.append(f'<circle cx="{sx(xi):.2f}" cy="{sy(yi):.2f}" r="3" fill="#111"/>')
    parts.append(f'<text x="{ML + 10}" y="{MT + 18}" font-size="12" fill="#222">'
                 f'{result.method}: {planes.shape[0]} levels</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# parser

def _add_data_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--data", required=True,
                     help="CSV path, or a builtin name: swiss, anscombe")
    sub.add_argument("--response", default=None,
                     help="response column (required for CSV input)")


def _add_flex_flags(sub: argparse.ArgumentParser) -> None:
    group = sub.add_argument_group("flex loss shape (method=flex only)")
    group.add_argument("--c", type=float, default=None, help="curvature, > 0")
    group.add_argument("--h", type=float, default=None, help="horizontal kink shift")
    group.add_argument("--s", type=float, default=None, help="tilt, in [0, 1]")
    group.add_argument("--v", type=float, default=None, help="vertical offset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smoothrq",
        description="Quantile regression with smooth check losses: single fits, "
                    "tau-grid diagnostics, and synthetic benchmarks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    fit = subs.add_parser("fit", help="fit one quantile level")
    _add_data_flags(fit)
    fit.add_argument("--tau", type=_tau_flag, required=True,
                     help="quantile level in (0, 1)")
    fit.add_argument("--method", choices=_METHOD_CHOICES, required=True)
    fit.add_argument("--warm-start", action="store_true",
                     help="start the smooth solver from the exact LP solution")
    _add_flex_flags(fit)
    fit.set_defaults(func=cmd_fit)

    grid = subs.add_parser("grid", help="fit a tau grid for several methods")
    _add_data_flags(grid)
    grid.add_argument("--grid", type=_parse_grid, required=True,
                      help="point count m (levels i/(m+1)), or start,end,step")
    grid.add_argument("--methods", type=_parse_methods, required=True,
                      help="comma-separated subset of rq,srq,smrq,rrq,flex")
    grid.add_argument("--suppress", action="store_true",
                      help="also report each method after event suppression (-s columns)")
    grid.add_argument("--svg", action="store_true",
                      help="render curves.svg (and per-method line overlays when p=2)")
    grid.add_argument("--out", required=True, help="output directory")
    _add_flex_flags(grid)
    grid.set_defaults(func=cmd_grid)

    bench = subs.add_parser("bench", help="synthetic benchmark over a size ladder")
    bench.add_argument("--kind", choices=("normal", "pareto"), required=True)
    bench.add_argument("--sizes", type=_parse_sizes, required=True,
                       help="comma-separated observation counts, each >= 3")
    bench.add_argument("--replicates", type=int, default=10)
    bench.add_argument("--seed", type=int, required=True)
    bench.add_argument("--methods", type=_parse_methods, required=True)
    bench.add_argument("--out", required=True, help="output directory")
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "replicates", 1) < 1:
        parser.error("--replicates must be at least 1")
    return args.func(args, parser)


def entrypoint(argv=None) -> int:
    try:
        return main(argv)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4

"""Command line interface: ``layervec vectorize|eval|interpolate|render|gen-corpus``.

Exit codes: 0 success, 1 input error, 2 config error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import __version__
from ._validation import check_image
from .losses import mse
from .optim import OptConfig, run, run_budgets
from .render import EXPORT_SIGMA, render
from .svgio import IncompatibleDocuments, SvgFormatError, from_svg, interpolate, to_svg

logger = logging.getLogger("layervec")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
CSV_COLUMNS = ("image", "n_paths", "mse", "seconds")

# flag name -> (OptConfig field, parser)
_OPT_FLAGS = {
    "segments": ("segments", int),
    "radius": ("radius", float),
    "tau": ("tau", float),
    "lambda": ("lam", float),
    "point-lr": ("point_lr", float),
    "color-lr": ("color_lr", float),
    "iters": ("iters_per_stage", int),
    "sigma": ("sigma", float),
    "seed": ("seed", int),
    "c-alpha": ("c_alpha", float),
    "bins": ("bins", int),
    "target-mse": ("target_mse", float),
    "loss": ("loss", str),
}
_OTHER_KEYS = {"paths", "schedule", "background", "threads", "snapshots"}


class InputError(Exception):
    pass


class ConfigError(Exception):
    pass


def _int_list(text: str) -> list:
    try:
        vals = [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from exc
    if not vals or min(vals) < 1:
        raise ConfigError(f"list entries must be positive integers, got {text!r}")
    return vals


def parse_color(text: str) -> tuple:
    """``white``, ``black``, ``#rrggbb`` or ``r,g,b`` with floats in [0, 1]."""
    t = str(text).strip().lower()
    named = {"white": (1.0, 1.0, 1.0), "black": (0.0, 0.0, 0.0)}
    if t in named:
        return named[t]
    if t.startswith("#") and len(t) == 7:
        try:
            return tuple(int(t[i:i + 2], 16) / 255.0 for i in (1, 3, 5))
        except ValueError:
            pass
    parts = t.split(",")
    if len(parts) == 3:
        try:
            vals = tuple(float(p) for p in parts)
        except ValueError:
            vals = ()
        if vals and all(0.0 <= v <= 1.0 for v in vals):
            return vals
    raise ConfigError(f"cannot parse color {text!r}")


def read_config_file(path) -> dict:
    """Flat ``key = value`` file keyed by flag names; ``#`` starts a comment line."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in _OPT_FLAGS and key not in _OTHER_KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(args, multi_budget: bool = False):
    """Merge CLI flags over the config file over defaults.

    Returns ``(OptConfig, settings)`` where settings holds the resolved
    non-optimizer values (paths, threads, snapshots).
    """
    settings = read_config_file(args.config) if getattr(args, "config", None) else {}
    for flag in list(_OPT_FLAGS) + sorted(_OTHER_KEYS):
        v = getattr(args, flag.replace("-", "_"), None)
        if v is not None and v is not False:
            settings[flag] = v
    kwargs = {}
    try:
        for flag, (name, conv) in _OPT_FLAGS.items():
            if flag in settings:
                kwargs[name] = conv(settings[flag])
        if "schedule" in settings:
            kwargs["schedule"] = _int_list(settings["schedule"])
        if "background" in settings:
            bg = settings["background"]
            kwargs["background"] = bg if isinstance(bg, tuple) else parse_color(bg)
        paths = _int_list(settings["paths"]) if "paths" in settings else None
        if paths is not None and not multi_budget:
            if len(paths) != 1:
                raise ConfigError("--paths takes a single budget here")
            kwargs["max_paths"] = paths[0]
        if paths is not None and multi_budget and "schedule" in kwargs:
            raise ConfigError("eval budgets cannot be combined with --schedule")
        if "schedule" in kwargs and paths is None:
            kwargs["max_paths"] = None
        threads = int(settings.get("threads", 1))
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        snapshots = str(settings.get("snapshots", "false")).lower() in ("1", "true", "yes", "on")
        cfg = OptConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, {"paths": paths, "threads": threads, "snapshots": snapshots}


def load_image(path, background=(1.0, 1.0, 1.0)) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I"):
                arr = np.asarray(im).astype(np.float64) / 65535.0
            elif "A" in im.getbands() or "transparency" in im.info:
                arr = np.asarray(im.convert("RGBA"))
            else:
                arr = np.asarray(im.convert("RGB"))
    except (OSError, UnidentifiedImageError) as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    try:
        return check_image(arr, background)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def save_png(image, path):
    arr = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, "RGB").save(path)


def _read_svg(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        return from_svg(text)
    except SvgFormatError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def manifest(input_path, cfg: OptConfig, metrics, outputs, command) -> dict:
    return {
        "command": command,
        "input": str(input_path),
        "config": cfg.to_dict(),
        "metrics": [dict(m) for m in metrics],
        "outputs": [str(o) for o in outputs],
        "version": __version__,
        "seed": cfg.seed,
    }


def cmd_vectorize(args) -> int:
    cfg, settings = build_config(args)
    target = load_image(args.input, cfg.background)
    out = Path(args.output) if args.output else Path(args.input).with_suffix(".svg")
    out.parent.mkdir(parents=True, exist_ok=True)
    outputs = [out]

    def snapshot(state, row):
        stem = out.with_suffix("")
        svg_path = Path(f"{stem}_stage{row['stage']:02d}.svg")
        png_path = svg_path.with_suffix(".png")
        svg_path.write_text(to_svg(state.paths, state.colors, state.width, state.height, cfg.background),
                            encoding="utf-8")
        save_png(state.rendered, png_path)
        outputs.extend([svg_path, png_path])

    result = run(target, cfg, callback=snapshot if settings["snapshots"] else None)
    h, w = target.shape[:2]
    out.write_text(to_svg(result.paths, result.colors, w, h, cfg.background), encoding="utf-8")
    man_path = Path(args.manifest) if args.manifest else out.with_suffix(".json")
    _write_json(man_path, manifest(args.input, cfg, result.metrics, outputs, "vectorize"))
    final = result.metrics[-1]["mse"] if result.metrics else mse(target, result.rendered)
    logger.info("wrote %s (%d paths, mse %.6f)", out, len(result.paths), final)
    return EXIT_OK


def _eval_image(path, cfg, budgets):
    """One image at every budget; returns rows or an error string."""
    try:
        target = load_image(path, cfg.background)
        results = run_budgets(target, cfg, budgets)
    except Exception as exc:  # noqa: BLE001 - per-image failures must not stop the sweep
        return str(path), None, f"{type(exc).__name__}: {exc}"
    rows = []
    for b in budgets:
        res = results[b]
        err = res.metrics[-1]["mse"] if res.metrics else mse(target, res.rendered)
        rows.append({"image": Path(path).name, "n_paths": b, "mse": err,
                     "seconds": sum(m["seconds"] for m in res.metrics)})
    return str(path), rows, None


def cmd_eval(args) -> int:
    cfg, settings = build_config(args, multi_budget=True)
    budgets = settings["paths"] or [1, 2, 4, 8, 16]
    in_dir = Path(args.input)
    if not in_dir.is_dir():
        raise InputError(f"{in_dir} is not a directory")
    images = sorted(p for p in in_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())
    out = Path(args.output) if args.output else in_dir / "metrics.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    if settings["threads"] > 1 and len(images) > 1:
        with ProcessPoolExecutor(max_workers=settings["threads"]) as pool:
            results = list(pool.map(_eval_image, images, [cfg] * len(images), [budgets] * len(images)))
    else:
        results = [_eval_image(p, cfg, budgets) for p in images]
    rows, failures = [], []
    for path, r, err in results:
        if err is not None:
            logger.error("%s failed: %s", path, err)
            failures.append({"image": path, "error": err})
        else:
            rows.extend(r)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({"image": row["image"], "n_paths": row["n_paths"],
                             "mse": f"{row['mse']:.8g}", "seconds": f"{row['seconds']:.3f}"})
    man = manifest(in_dir, cfg, [], [out], "eval")
    man.update({"budgets": budgets, "images": [p.name for p in images], "failures": failures})
    _write_json(Path(args.manifest) if args.manifest else out.with_suffix(".json"), man)
    for b in budgets:
        errs = [r["mse"] for r in rows if r["n_paths"] == b]
        if errs:
            logger.info("budget %d: mean mse %.6f over %d images", b, float(np.mean(errs)), len(errs))
    return EXIT_OK


def cmd_interpolate(args) -> int:
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    a, b = _read_svg(args.a), _read_svg(args.b)
    out_dir = Path(args.output) if args.output else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for i in range(args.steps + 1):
        t = i / args.steps
        try:
            doc = interpolate(a, b, t)
        except IncompatibleDocuments as exc:
            raise InputError(str(exc)) from exc
        path = out_dir / f"{args.prefix}_{i:03d}.svg"
        path.write_text(doc.to_svg(), encoding="utf-8")
        outputs.append(path)
    logger.info("wrote %d files to %s", len(outputs), out_dir)
    return EXIT_OK


def _parse_size(text, width, height):
    t = str(text).lower()
    try:
        if "x" in t:
            w, h = (int(v) for v in t.split("x"))
        else:
            w = int(t)
            h = int(round(height * w / width))
    except ValueError as exc:
        raise ConfigError(f"--size expects W or WxH, got {text!r}") from exc
    if w < 1 or h < 1:
        raise ConfigError("--size must be positive")
    return w, h


def cmd_render(args) -> int:
    doc = _read_svg(args.input)
    w, h = (int(round(doc.width)), int(round(doc.height)))
    if args.size:
        w, h = _parse_size(args.size, doc.width, doc.height)
    if args.sigma <= 0:
        raise ConfigError("--sigma must be positive")
    sx, sy = w / doc.width, h / doc.height
    pts = [p.points * np.array([sx, sy]) for p in doc.paths]
    bg = doc.background if doc.background is not None else (1.0, 1.0, 1.0, 1.0)
    if args.background:
        bg = parse_color(args.background)
    img = render(pts, doc.colors, w, h, bg, args.sigma)
    out = Path(args.output) if args.output else Path(args.input).with_suffix(".png")
    save_png(img, out)
    logger.info("wrote %s (%dx%d)", out, w, h)
    return EXIT_OK


def cmd_gen_corpus(args) -> int:
    from .corpus import generate

    names = generate(args.output, count=args.count, seed=args.seed)
    logger.info("wrote %d scenes to %s", len(names), args.output)
    return EXIT_OK


def _add_opt_flags(p, multi_budget=False):
    if multi_budget:
        p.add_argument("--paths", help="comma-separated path budgets (default 1,2,4,8,16)")
    else:
        p.add_argument("--paths", help="maximum number of paths (default 16)")
        p.add_argument("--schedule", help="paths added per stage, e.g. 1,1,2,4")
    p.add_argument("--segments", help="cubic segments per path (default 4)")
    p.add_argument("--radius", help="initial circle radius in pixels (default 5)")
    p.add_argument("--tau", help="UDF band width in pixels (default 10)")
    p.add_argument("--lambda", dest="lambda", help="self-crossing loss weight (default 0.01)")
    p.add_argument("--point-lr", help="control point learning rate (default 1.0)")
    p.add_argument("--color-lr", help="color learning rate (default 0.01)")
    p.add_argument("--iters", help="iterations per stage (default 500)")
    p.add_argument("--sigma", help="coverage ramp half-width while optimizing (default 1.0)")
    p.add_argument("--background", help="white, black, #rrggbb or r,g,b (default white)")
    p.add_argument("--seed", help="random seed recorded in the manifest (default 0)")
    p.add_argument("--c-alpha", help="difference threshold for seeding (default 0.1)")
    p.add_argument("--bins", help="quantization bins for seeding (default 200)")
    p.add_argument("--target-mse", help="stop once the MSE drops to this value")
    p.add_argument("--loss", help="udf (default) or mse")
    p.add_argument("--threads", help="worker processes for eval (kernels are single-threaded)")
    p.add_argument("--config", help="flat key = value file using the flag names")
    p.add_argument("--manifest", help="manifest path (default next to the output)")
    p.add_argument("-o", "--output", help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layervec", description="Layer-wise image vectorization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vectorize", help="fit paths to an image and write an SVG")
    p.add_argument("input")
    _add_opt_flags(p)
    p.add_argument("--snapshots", action="store_true", help="write an SVG and PNG after every stage")
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("eval", help="MSE against path budget over a directory of images")
    p.add_argument("input")
    _add_opt_flags(p, multi_budget=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("interpolate", help="blend two compatible SVGs path by path")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--prefix", default="interp")
    p.add_argument("-o", "--output", help="output directory")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("render", help="rasterize a supported SVG to PNG")
    p.add_argument("input")
    p.add_argument("--size", help="output width, or WxH")
    p.add_argument("--sigma", type=float, default=EXPORT_SIGMA)
    p.add_argument("--background", help="override the document background")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("gen-corpus", help="write the synthetic test corpus")
    p.add_argument("output")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

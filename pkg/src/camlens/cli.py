"""The ``camlens`` command-line interface.

Every subcommand is a thin wrapper over one library pipeline. Outputs are
written atomically. Exit codes: 0 success, 1 validation error, 2 I/O error,
64 usage error (unknown flag, bad syntax).
"""
import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from ._atomic import write_text_atomic
from .errors import CamlensError, CamlensIOError, DivergenceError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_USAGE = 0, 1, 2, 64
PROFILES = {"dslr": 2.9, "phone": 2.4}

log = logging.getLogger("camlens")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---- flag value parsers -------------------------------------------------

def _floats(text, n=None, what="values"):
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse {what} from {text!r}") from None
    if n is not None and len(vals) != n:
        raise ValidationError(f"expected {n} comma-separated {what}, got {text!r}")
    return vals


def _pair(text, sep, cast, what):
    parts = str(text).lower().split(sep)
    try:
        a, b = (cast(p) for p in parts)
    except ValueError:
        raise ValidationError(f"expected {what} as A{sep}B, got {text!r}") from None
    return a, b


def parse_gauss(text):
    """``k5`` / ``k7`` presets or an explicit ``K,SIGMA``."""
    from .resample import GAUSSIAN_PRESETS, GaussianParams
    if isinstance(text, (list, tuple)):
        return GaussianParams(int(text[0]), float(text[1]))
    key = str(text).strip().lower()
    if key in GAUSSIAN_PRESETS:
        return GAUSSIAN_PRESETS[key]
    k, sigma = _pair(key.removeprefix("gaussian:"), ",", float, "Gaussian parameters")
    if k != int(k):
        raise ValidationError(f"kernel size must be an integer, got {k}")
    return GaussianParams(int(k), sigma)


def parse_sigma_list(text):
    """``START:STOP:STEP`` (inclusive) or a comma list."""
    from .analysis import sigma_range
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"sigma range must be START:STOP:STEP, got {text!r}")
        return sigma_range(*_floats(",".join(parts), 3, "range bounds"))
    return tuple(_floats(text, what="sigma values"))


def parse_k_list(text):
    vals = _floats(text, what="kernel sizes")
    if any(v != int(v) for v in vals):
        raise ValidationError(f"kernel sizes must be integers, got {text!r}")
    return tuple(int(v) for v in vals)


def resolve_threads(value):
    if value is None:
        value = os.environ.get("CAMLENS_THREADS", "1")
    try:
        n = int(value)
    except ValueError:
        raise ValidationError(f"thread count must be an integer, got {value!r}") from None
    if n < 1:
        raise ValidationError("thread count must be at least 1")
    return n


def _scale(args, fallback=None):
    if args.scale is not None:
        return float(args.scale)
    if getattr(args, "profile", None):
        return PROFILES[args.profile]
    return fallback


def _require(args, *names):
    for n in names:
        if getattr(args, n, None) in (None, ""):
            raise ValidationError(f"--{n.replace('_', '-')} is required")


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        write_text_atomic(out, text)
    sys.stdout.write(text)


def _subset(dataset, split):
    if split not in ("train", "val", "test", "all"):
        raise ValidationError(f"unknown split {split!r}")
    scenes = dataset.subset(split)
    if not scenes:
        raise ValidationError(f"split {split!r} is empty")
    return scenes


# ---- commands ------------------------------------------------------------

def cmd_synth(args):
    from .synth import SynthSpec, write_synth
    _require(args, "out")
    spec = SynthSpec(
        n_scenes=args.n_scenes,
        hr_size=_pair(args.hr_size, "x", int, "HR size"),
        scale=_scale(args, 2.9),
        gauss=None if args.gauss in (None, "none") else tuple(parse_gauss(args.gauss).tag()[x] for x in ("k", "sigma")),
        blur_first=args.blur_order == "blur-first",
        phase=args.phase,
        shift=tuple(_floats(args.shift, 2, "shift components")),
        bias=args.bias,
        color=tuple(_floats(args.color, what="colour coefficients")) if args.color else None,
        noise=args.noise,
        seed=args.seed,
        checker_grid=_pair(args.checker, "x", int, "checker grid") if args.checker else None,
        channels=args.channels,
    )
    ds = write_synth(spec, args.out)
    _emit({"out": str(args.out), "scenes": len(ds), "scale": spec.scale, "splits": ds.splits})


def _checker_samples(checker_dir, grid, margin):
    from .image import load_image
    from .rectify import sample_checker
    rows, cols = grid
    d = Path(checker_dir)
    lr, hr = load_image(d / "lr.png"), load_image(d / "hr.png")
    return sample_checker(lr, rows, cols, margin), sample_checker(hr, rows, cols, margin)


def cmd_rectify(args):
    from .dataset import Dataset, load_dataset, save_dataset
    from .rectify import rectify_pair
    _require(args, "data", "out")
    raw = load_dataset(args.data)
    if not len(raw):
        raise ValidationError(f"{args.data} contains no scenes")
    checker_dir = args.checker
    if checker_dir is None and (Path(args.data) / "checker" / "lr.png").exists():
        checker_dir = Path(args.data) / "checker"
    checker = None
    if checker_dir is not None:
        checker = _checker_samples(checker_dir, _pair(args.checker_grid, "x", int, "checker grid"),
                                   args.checker_margin)

    def one(scene):
        return rectify_pair(scene.lr, scene.hr, _scale(args, scene.scale), checker,
                            args.degree, args.seed, scene.id)

    threads = resolve_threads(args.threads)
    with ThreadPoolExecutor(threads) as pool:
        results = list(pool.map(one, raw.pairs))
    out = Dataset(tuple(s for s, _ in results), raw.splits)
    reports = {s.id: r.to_json() for s, r in results}
    save_dataset(out, args.out, scale=_scale(args, raw.pairs[0].scale), bit_depth=16)
    write_text_atomic(Path(args.out) / "rectify_report.json",
                      json.dumps(reports, indent=2, sort_keys=True) + "\n")
    _emit({"out": str(args.out), "scenes": {sid: {"pre_psnr_db": r["stage_psnr_db"][0]["psnr_db"],
                                                 "post_psnr_db": r["stage_psnr_db"][-1]["psnr_db"],
                                                 "shift": [r["translation"]["dx"], r["translation"]["dy"]],
                                                 "bias": r["intensity_bias"],
                                                 "warnings": r["warnings"]}
                                           for sid, r in reports.items()}})


def cmd_degrade(args):
    from .image import load_image, save_image
    from .resample import degrade_bicubic, degrade_gaussian
    _require(args, "input", "out")
    img = load_image(args.input)
    scale = _scale(args, 2.9)
    if args.model == "bicubic":
        lr = degrade_bicubic(img, scale)
    else:
        lr = degrade_gaussian(img, parse_gauss(args.gauss), scale, args.blur_order == "blur-first", args.phase)
    save_image(lr, args.out, args.bit_depth)
    _emit({"out": str(args.out), "width": lr.shape[1], "height": lr.shape[0]})


def cmd_sweep(args):
    from .analysis import SweepGrid, emit_sweep_csv, sweep_csv_text, sweep_gaussian
    from .dataset import load_dataset
    _require(args, "data")
    ds = load_dataset(args.data)
    scenes = _subset(ds, args.split)
    grid = SweepGrid(parse_k_list(args.k), parse_sigma_list(args.sigma))
    result = sweep_gaussian(scenes, grid, _scale(args, scenes[0].scale), args.blur_order == "blur-first",
                            args.phase, resolve_threads(args.threads))
    if args.out:
        emit_sweep_csv(result, args.out)
        summary = {
            "rows": len(result.rows),
            "best": [{"k": r.k, "sigma": r.sigma, "mean_psnr_db": _db(r.mean_psnr)} for r in result.best],
            "per_k_best": [{"k": r.k, "sigma": r.sigma, "mean_psnr_db": _db(r.mean_psnr)}
                           for r in result.per_k_best()],
        }
        _emit(summary)
    else:
        sys.stdout.write(sweep_csv_text(result))


def _db(v):
    return "inf" if math.isinf(v) else v


def cmd_compare(args):
    from .analysis import compare_degradations
    from .dataset import load_dataset
    _require(args, "data")
    ds = load_dataset(args.data)
    scenes = _subset(ds, args.split)
    report = compare_degradations(scenes, _scale(args, scenes[0].scale), parse_gauss(args.gauss),
                                  args.blur_order == "blur-first", args.phase)
    _emit(report, args.out)


def cmd_metrics(args):
    from .image import load_image
    from .metrics import psnr, ssim
    _require(args, "a", "b")
    a, b = load_image(args.a), load_image(args.b)
    if a.shape != b.shape:
        raise ValidationError(f"image shapes differ: {a.shape} vs {b.shape}")
    _emit({"psnr_db": _db(psnr(a, b, args.peak, luminance=args.luminance_psnr)),
           "ssim": ssim(a, b, args.peak)})


def cmd_train(args):
    from .dataset import load_dataset
    from .srnet import TrainConfig, parse_degradation, save_checkpoint, train
    _require(args, "data", "out")
    ds = load_dataset(args.data)
    scenes = _subset(ds, args.split)
    deg = args.degradation
    if deg.lower() in ("k5", "k7"):
        deg = parse_gauss(deg)
    tag = parse_degradation(deg)
    config = TrainConfig(
        batch_size=args.batch_size, patch=args.patch, steps=args.steps,
        learning_rate=args.learning_rate, seed=args.seed, optimizer=args.optimizer,
        clip=args.clip if args.clip and args.clip > 0 else None,
        depth=args.depth, width=args.width, residual=not args.no_residual,
    )
    model, losses = train(scenes, tag, config, log_every=args.log_every)
    scale = _scale(args, scenes[0].scale)
    save_checkpoint(args.out, model, scale, tag)
    _emit({"out": str(args.out), "steps": len(losses), "degradation": tag, "scale": scale,
           "n_params": model.n_params(),
           "initial_loss": losses[0] if losses else None, "final_loss": losses[-1] if losses else None})


def cmd_sr(args):
    from .image import load_image, save_image
    from .srnet import load_checkpoint, super_resolve
    _require(args, "model", "input", "out")
    ck = load_checkpoint(args.model)
    lr = load_image(args.input)
    if lr.shape[2] != ck.model.channels:
        raise ValidationError(f"model expects {ck.model.channels} channels, image has {lr.shape[2]}")
    out = super_resolve(ck.model, lr, _scale(args, ck.scale), args.tile)
    save_image(out, args.out, args.bit_depth)
    _emit({"out": str(args.out), "width": out.shape[1], "height": out.shape[0]})


def cmd_eval(args):
    from .dataset import load_dataset
    from .srnet import evaluate_model, load_checkpoint
    _require(args, "data")
    if (args.model is None) == (args.baseline is None):
        raise ValidationError("give exactly one of --model or --baseline")
    ds = load_dataset(args.data)
    scenes = _subset(ds, args.split)
    model = None
    if args.model is not None:
        model = load_checkpoint(args.model).model
    avg, reports = evaluate_model(model, scenes, args.tile)
    _emit({
        "split": args.split,
        "n_scenes": len(scenes),
        "method": "interp" if model is None else str(args.model),
        "psnr_db": _db(avg.psnr),
        "ssim": avg.ssim,
        "scenes": [{"id": s.id, **r.to_json()} for s, r in zip(scenes, reports)],
    }, args.out)


# ---- parser ----------------------------------------------------------------

def _common(p, seed=False, threads=False):
    p.add_argument("--config", help="JSON file of flag defaults (keys are flag names)")
    p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if threads:
        p.add_argument("--threads", default=None, help="worker threads (default $CAMLENS_THREADS or 1)")


def _degradation_flags(p, gauss_default="k5"):
    p.add_argument("--gauss", default=gauss_default, help="k5, k7 or K,SIGMA")
    p.add_argument("--blur-order", choices=("blur-first", "resize-first"), default="blur-first")
    p.add_argument("--phase", type=int, default=0, help="decimation phase (0 = first pixel)")


def _scale_flags(p):
    p.add_argument("--scale", type=float, default=None, help="HR/LR size ratio")
    p.add_argument("--profile", choices=sorted(PROFILES), default=None,
                   help="dslr (2.9) or phone (2.4) when --scale is not given")


def build_parser():
    parser = _Parser(prog="camlens", description="Camera-lens super-resolution tooling.")
    parser.add_argument("--version", action="version", version=f"camlens {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic paired dataset with a hidden degradation")
    _common(p, seed=True)
    p.add_argument("--out")
    p.add_argument("--n-scenes", type=int, default=8)
    p.add_argument("--hr-size", default="232x174", help="WxH")
    _scale_flags(p)
    _degradation_flags(p, gauss_default=None)
    p.add_argument("--shift", default="0,0", help="DX,DY in HR pixels")
    p.add_argument("--bias", type=float, default=0.0)
    p.add_argument("--color", default=None, help="forward colour polynomial c0,c1,... (constant first)")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--checker", default=None, help="ROWSxCOLS colour checker to emit")
    p.add_argument("--channels", type=int, choices=(1, 3), default=3)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("rectify", help="align, bias-correct and colour-calibrate raw pairs")
    _common(p, seed=True, threads=True)
    p.add_argument("--data")
    p.add_argument("--out")
    _scale_flags(p)
    p.add_argument("--checker", default=None, help="directory with checker lr.png and hr.png")
    p.add_argument("--checker-grid", default="4x6", help="ROWSxCOLS")
    p.add_argument("--checker-margin", type=float, default=0.25)
    p.add_argument("--degree", type=int, default=3)
    p.set_defaults(func=cmd_rectify)

    p = sub.add_parser("degrade", help="produce an LR image under a degradation model")
    _common(p)
    p.add_argument("--in", dest="input")
    p.add_argument("--out")
    _scale_flags(p)
    p.add_argument("--model", choices=("bicubic", "gaussian"), default="bicubic")
    _degradation_flags(p)
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("sweep", help="score a (k, sigma) grid of Gaussian degradations")
    _common(p, threads=True)
    p.add_argument("--data")
    p.add_argument("--k", default="3,5,7,9")
    p.add_argument("--sigma", default="0.5:4.0:0.05", help="START:STOP:STEP or a comma list")
    _scale_flags(p)
    p.add_argument("--blur-order", choices=("blur-first", "resize-first"), default="blur-first")
    p.add_argument("--phase", type=int, default=0)
    p.add_argument("--split", default="all")
    p.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="bicubic vs Gaussian vs realistic LR against HR")
    _common(p)
    p.add_argument("--data")
    _scale_flags(p)
    _degradation_flags(p)
    p.add_argument("--split", default="all")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("metrics", help="PSNR and SSIM between two images")
    _common(p)
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--peak", type=float, default=1.0)
    p.add_argument("--luminance-psnr", action="store_true", help="PSNR on luma instead of RGB")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("train", help="train the residual CNN")
    _common(p, seed=True)
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--degradation", default="camera", help="bicubic, camera, k5, k7 or gaussian:K,SIGMA")
    _scale_flags(p)
    p.add_argument("--split", default="train")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--patch", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--optimizer", choices=("adam", "sgd", "momentum"), default="adam")
    p.add_argument("--clip", type=float, default=1.0, help="global gradient-norm clip (0 disables)")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--no-residual", action="store_true")
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sr", help="super-resolve one LR image")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--in", dest="input")
    p.add_argument("--out")
    p.add_argument("--scale", type=float, default=None, help="defaults to the checkpoint's scale")
    p.add_argument("--tile", type=int, default=128)
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("eval", help="mean PSNR/SSIM of a model or baseline over a split")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--model", default=None, help="checkpoint path")
    p.add_argument("--baseline", choices=("interp",), default=None)
    p.add_argument("--split", default="test")
    p.add_argument("--tile", type=int, default=128)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _apply_config(parser, argv, args):
    """Re-parse with the JSON config's values as defaults, so explicit flags still win."""
    try:
        cfg = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise CamlensIOError(f"config file {args.config} not found") from None
    except json.JSONDecodeError as e:
        raise ValidationError(f"config {args.config} is not valid JSON ({e})") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    sp = _subparser(parser, args.command)
    known = {a.dest for a in sp._actions}
    defaults = {}
    for key, val in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        dest = {"in": "input"}.get(dest, dest)
        if dest not in known or dest in ("config", "help"):
            raise ValidationError(f"config key {key!r} is not a flag of {args.command!r}")
        defaults[dest] = val
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
        args.func(args)
    except (ValidationError, DivergenceError) as e:
        print(f"camlens {args.command}: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CamlensIOError, OSError) as e:
        print(f"camlens {args.command}: {e}", file=sys.stderr)
        return EXIT_IO
    except CamlensError as e:
        print(f"camlens {args.command}: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: process, annotate-serve, stats, cascade-inspect.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 internal error.  Images routed to failure buckets are normal batch
results, not errors, so they never affect the exit code.
"""

import argparse
import json
import socket
import sys
from pathlib import Path

from .annotate import DEFAULT_LEASE_SECONDS, AnnotationQueue, create_app, packaged_static_dir
from .cascade import parse_cascade
from .errors import CascadeFormatError, FacepipeError, ImageIOError
from .pipeline import (
    CROP_Y_CONVENTIONS,
    MODES,
    OUTPUT_FORMATS,
    PipelineConfig,
    format_stats,
    read_manifest,
    run_batch,
    stats,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_INTERNAL = 3


class UsageError(ValueError):
    """Bad flag value or config file content."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_out_size(text: str) -> tuple[int, int]:
    """'60x70' -> (60, 70)."""
    parts = text.lower().split("x")
    try:
        w, h = (int(p) for p in parts)
    except ValueError:
        raise UsageError(f"--out-size expects WxH (e.g. 60x70), got {text!r}")
    if w <= 0 or h <= 0:
        raise UsageError(f"--out-size dimensions must be positive, got {text!r}")
    return w, h


def load_config_file(path: str | Path) -> dict:
    """Read a TOML config file holding default flag values."""
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    p = Path(path)
    try:
        data = tomllib.loads(p.read_text())
    except OSError as exc:
        raise ImageIOError(f"cannot read config file {p}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"invalid TOML in {p}: {exc}") from exc
    allowed = {
        "mode",
        "jobs",
        "out_size",
        "crop_y_convention",
        "output_format",
        "run_root",
        "port",
        "lease_seconds",
    }
    unknown = set(data) - allowed
    if unknown:
        raise UsageError(
            f"unknown config keys in {p}: {', '.join(sorted(unknown))} "
            f"(allowed: {', '.join(sorted(allowed))})"
        )
    return data


def _effective(args, key: str, file_cfg: dict, default):
    """Flag beats config file beats default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return file_cfg[key]
    return default


def build_pipeline_config(args, file_cfg: dict) -> PipelineConfig:
    run_root = _effective(args, "run_root", file_cfg, None)
    if run_root is None:
        raise UsageError("--run-root is required (flag or config file)")
    out_size = _effective(args, "out_size", file_cfg, (60, 70))
    if isinstance(out_size, str):
        out_size = parse_out_size(out_size)
    elif isinstance(out_size, list):
        out_size = tuple(out_size)
    try:
        return PipelineConfig(
            run_root=Path(run_root),
            mode=_effective(args, "mode", file_cfg, "faithful"),
            out_size=out_size,
            crop_y_convention=_effective(args, "crop_y_convention", file_cfg, "above"),
            output_format=_effective(args, "output_format", file_cfg, "pgm"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# -- subcommands -------------------------------------------------------


def cmd_process(args) -> int:
    file_cfg = load_config_file(args.config) if args.config else {}
    config = build_pipeline_config(args, file_cfg)
    jobs = _effective(args, "jobs", file_cfg, 1)
    if jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {jobs}")
    results = run_batch(args.input_dir, config, parallelism=jobs)
    summary = stats(config.run_root / "manifest.jsonl")
    print(f"processed {len(results)} image(s) -> {config.run_root}")
    print(format_stats(summary))
    return EXIT_OK


def cmd_annotate_serve(args) -> int:
    file_cfg = load_config_file(args.config) if args.config else {}
    config = build_pipeline_config(args, file_cfg)
    if not config.run_root.is_dir():
        raise ImageIOError(f"run root is not a directory: {config.run_root}")
    lease = _effective(args, "lease_seconds", file_cfg, DEFAULT_LEASE_SECONDS)
    port = _effective(args, "port", file_cfg, 8765)

    # fail with a clear message before uvicorn takes over the process
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.bind((args.host, port))
        probe.close()
    except OSError as exc:
        raise ImageIOError(f"cannot bind {args.host}:{port}: {exc.strerror}") from exc

    queue = AnnotationQueue(config, lease_seconds=lease)
    new = queue.enqueue_from_buckets()
    progress = queue.progress()
    print(f"enqueued {new} new task(s); progress: {progress}")
    app = create_app(queue, static_dir=packaged_static_dir())

    import uvicorn

    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return EXIT_OK


def cmd_stats(args) -> int:
    summary = stats(args.manifest)
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(format_stats(summary))
    return EXIT_OK


def cmd_cascade_inspect(args) -> int:
    path = Path(args.cascade)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ImageIOError(f"cannot read cascade file {path}: {exc.strerror}") from exc
    model = parse_cascade(text)
    n_stages = len(model.stages)
    n_stumps = model.num_stumps
    print(f"base window: {model.base_width}x{model.base_height}")
    print(
        f"{n_stages} stage{'s' if n_stages != 1 else ''}, "
        f"{n_stumps} stump{'s' if n_stumps != 1 else ''}"
    )
    for i, stage in enumerate(model.stages):
        print(f"  stage {i:2d}: {len(stage.classifiers):4d} stumps  threshold {stage.stage_threshold:.6f}")
    return EXIT_OK


# -- wiring ------------------------------------------------------------


def _add_shared_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="FILE", help="TOML file with default flag values")
    sub.add_argument("--run-root", dest="run_root", metavar="DIR", help="run output directory")
    sub.add_argument("--mode", choices=MODES, default=None, help="faithful re-detects after rotation; optimized transforms the original eye centers")
    sub.add_argument("--out-size", dest="out_size", metavar="WxH", default=None, help="final chip size (default 60x70)")
    sub.add_argument(
        "--crop-y-convention",
        dest="crop_y_convention",
        choices=CROP_Y_CONVENTIONS,
        default=None,
        help="where the crop box sits relative to the eye line",
    )
    sub.add_argument(
        "--output-format",
        dest="output_format",
        choices=OUTPUT_FORMATS,
        default=None,
        help="encoding for the 60x70 chips",
    )
    sub.add_argument("--jobs", type=int, default=None, metavar="N", help="worker threads for batch processing")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="facepipe", description="face detection, alignment, and crop pipeline")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    p_process = commands.add_parser(
        "process", help="run the pipeline over a directory of images"
    )
    p_process.add_argument("input_dir", help="directory of input images")
    _add_shared_flags(p_process)
    p_process.set_defaults(func=cmd_process)

    p_serve = commands.add_parser("annotate-serve", help="serve the manual eye-annotation queue")
    _add_shared_flags(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument(
        "--lease-seconds", dest="lease_seconds", type=float, default=None,
        help="how long a fetched task stays reserved for one annotator",
    )
    p_serve.set_defaults(func=cmd_annotate_serve)

    p_stats = commands.add_parser("stats", help="summarize a manifest")
    p_stats.add_argument("manifest", help="path to manifest.jsonl")
    p_stats.add_argument("--json", action="store_true", help="machine-readable output")
    p_stats.set_defaults(func=cmd_stats)

    p_inspect = commands.add_parser("cascade-inspect", help="describe a cascade XML file")
    p_inspect.add_argument("cascade", help="path to cascade XML")
    p_inspect.set_defaults(func=cmd_cascade_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"facepipe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CascadeFormatError as exc:
        print(f"facepipe: cascade error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ImageIOError, OSError) as exc:
        print(f"facepipe: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FacepipeError as exc:
        print(f"facepipe: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"facepipe: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

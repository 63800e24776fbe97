"""Command-line frontend: synth, embed, train, sweep, report and replay.

Every command writes a key=value run manifest next to its primary output;
``seqaccel replay MANIFEST`` re-executes the recorded command with identical
arguments, which reproduces the outputs byte for byte. Exit codes: 0 on
success, 2 on input or validation errors, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import (
    InvalidParameterError,
    NonFiniteWeightsError,
    SeqAccelError,
    UnknownLabelError,
)
from . import embed as embed_mod
from . import plotting
from . import seq_io
from . import trainer as trainer_mod

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_METHOD_MAP = {
    "spike2vec": embed_mod.METHOD_KMER,
    "minimizer": embed_mod.METHOD_MINIMIZER,
    "spaced": embed_mod.METHOD_SPACED,
}

_MANIFEST_SUFFIX = ".manifest"
_SKIP_DESTS = {"help", "config", "func", "command", "primary_out"}


# ---------------------------------------------------------------- arg types


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"value must be in [0, 1], got {value}")
    return value


def _noise_value(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"noise must be in [0, 1), got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"value must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"value must be >= 0, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"value must be > 0, got {value}")
    return value


def _any_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _decimals(text: str) -> int:
    return len(text.split(".")[1]) if "." in text else 0


def _grid_value(text: str) -> list[float]:
    """Parse an alpha grid: 'a,b,c' or 'start:stop:step' (inclusive)."""
    try:
        if ":" in text:
            start_s, stop_s, step_s = text.split(":")
            start, stop, step = float(start_s), float(stop_s), float(step_s)
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            decimals = max(_decimals(step_s), _decimals(start_s), 1)
            values = [round(start + i * step, decimals + 2) for i in range(count)]
        else:
            values = [float(v) for v in text.split(",") if v.strip()]
            if not values:
                raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"grid must be 'a,b,c' or 'start:stop:step', got {text!r}"
        ) from None
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise argparse.ArgumentTypeError(f"grid alpha {v} outside [0, 1]")
    return values


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqaccel",
        description="Sequence embeddings and accelerated linear-classifier training.",
    )
    parser.add_argument("--version", action="version", version=f"seqaccel {__version__}")
    parser.add_argument(
        "--verbose", action="store_true", help="log progress details to stderr"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    sub_map: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    p.add_argument("--classes", type=_positive_int, default=3)
    p.add_argument("--per-class", type=_positive_int, default=100)
    p.add_argument("--length", type=_positive_int, default=60)
    p.add_argument("--motif-len", type=_positive_int, default=6)
    p.add_argument("--noise", type=_noise_value, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--alphabet",
        default="nucleotide",
        help="preset name (amino, nucleotide) or literal symbols",
    )
    p.add_argument("--out-fasta", default="synth.fasta")
    p.add_argument("--out-labels", default="synth.labels.tsv")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.set_defaults(func=cmd_synth, primary_out="out_fasta")
    sub_map["synth"] = p

    p = sub.add_parser("embed", help="embed FASTA sequences into a feature matrix")
    p.add_argument("--fasta", required=True)
    p.add_argument("--labels", required=True, help="two-column id<TAB>class table")
    p.add_argument("--method", choices=sorted(_METHOD_MAP), default="spike2vec")
    p.add_argument("--k", type=_positive_int, default=None)
    p.add_argument("--m", type=_positive_int, default=None)
    p.add_argument("--g", type=_positive_int, default=None)
    p.add_argument("--alphabet", default="amino")
    p.add_argument("--pca-threshold", type=_nonneg_int, default=1000)
    p.add_argument("--pca-r", type=_positive_int, default=500)
    p.add_argument("--out-matrix", default="embedded.csv")
    p.add_argument("--out-labels", default="embedded.labels.tsv")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.set_defaults(func=cmd_embed, primary_out="out_matrix")
    sub_map["embed"] = p

    p = sub.add_parser("train", help="train the classifier and write its loss trace")
    p.add_argument("--matrix", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--alpha", type=_fraction, default=0.0)
    p.add_argument("--iters", type=_positive_int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--norm", choices=["paper-sum", "softmax"], default="softmax")
    p.add_argument("--step", type=_positive_float, default=1.0)
    p.add_argument("--epsilon", type=_positive_float, default=1e-10)
    p.add_argument("--out-trace", default="trace.csv")
    p.add_argument("--out-model", default="model.txt")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.set_defaults(func=cmd_train, primary_out="out_trace")
    sub_map["train"] = p

    p = sub.add_parser("sweep", help="train across an alpha grid and rank the results")
    p.add_argument("--matrix", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--grid", type=_grid_value, default="0:1:0.1")
    p.add_argument("--threshold", type=_any_float, default=None,
                   help="loss threshold for iterations_to_threshold")
    p.add_argument("--iters", type=_positive_int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--norm", choices=["paper-sum", "softmax"], default="softmax")
    p.add_argument("--step", type=_positive_float, default=1.0)
    p.add_argument("--epsilon", type=_positive_float, default=1e-10)
    p.add_argument("--out-sweep", default="sweep.csv")
    p.add_argument("--out-traces", default=None,
                   help="directory for per-alpha traces (default '<out-sweep>_traces')")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.set_defaults(func=cmd_sweep, primary_out="out_sweep")
    sub_map["sweep"] = p

    p = sub.add_parser("report", help="plot loss traces to SVG (and a PNG companion)")
    p.add_argument("--with-aa", default=None, help="trace CSV of the accelerated run")
    p.add_argument("--without-aa", default=None, help="trace CSV of the plain run")
    p.add_argument("--out", default="report.svg")
    p.add_argument("--no-png", dest="png", action="store_false", default=True,
                   help="skip the matplotlib PNG companion")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.set_defaults(func=cmd_report, primary_out="out")
    sub_map["report"] = p

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay, primary_out=None)
    sub_map["replay"] = p

    parser.sub_map = sub_map
    return parser


# ---------------------------------------------------------------- config file


def _load_config(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SeqAccelError(f"config file not found: {path}") from None
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise SeqAccelError(f"config line {lineno}: expected key=value")
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def _apply_config(parser: argparse.ArgumentParser, command: str, entries: dict[str, str]):
    sub = parser.sub_map[command]
    actions = {a.dest: a for a in sub._actions if a.option_strings}
    defaults = {}
    for dest, raw in entries.items():
        action = actions.get(dest)
        if action is None or dest in _SKIP_DESTS:
            raise SeqAccelError(f"unknown config key '{dest}' for command '{command}'")
        if action.nargs == 0:
            defaults[dest] = raw.lower() in ("1", "true", "yes")
        elif action.type is not None:
            try:
                defaults[dest] = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise SeqAccelError(f"config key '{dest}': {exc}") from None
        else:
            defaults[dest] = raw
    sub.set_defaults(**defaults)


# ---------------------------------------------------------------- manifests


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def _manifest_text(
    parser: argparse.ArgumentParser,
    args: argparse.Namespace,
    inputs: dict[str, str],
    extra: dict[str, str],
) -> str:
    sub = parser.sub_map[args.command]
    lines = [f"command={args.command}", f"version={__version__}"]
    for action in sub._actions:
        if not action.option_strings or action.dest in _SKIP_DESTS:
            continue
        lines.append(f"arg.{action.dest}={_format_value(getattr(args, action.dest))}")
    for name in sorted(inputs):
        lines.append(f"input.{name}.sha256={_sha256_file(inputs[name])}")
    for key in sorted(extra):
        lines.append(f"{key}={extra[key]}")
    return "\n".join(lines) + "\n"


def _write_manifest(primary_output: str, text: str) -> Path:
    path = Path(str(primary_output) + _MANIFEST_SUFFIX)
    _write_text(path, text)
    return path


def _parse_manifest(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SeqAccelError(f"manifest not found: {path}") from None
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        key, sep, value = raw.partition("=")
        if not sep:
            raise SeqAccelError(f"manifest line {lineno}: expected key=value")
        entries[key] = value
    if "command" not in entries:
        raise SeqAccelError("manifest is missing its command entry")
    return entries


def _write_text(path: str | Path, text: str):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def _read_text(path: str, context: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SeqAccelError(f"{context}: cannot read '{path}'") from None


# ---------------------------------------------------------------- commands


def cmd_synth(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    alphabet = seq_io.resolve_alphabet(args.alphabet)
    ds = seq_io.synth_dataset(
        args.classes,
        args.per_class,
        args.length,
        args.motif_len,
        args.noise,
        args.seed,
        alphabet,
    )
    _write_text(args.out_fasta, seq_io.dataset_to_fasta(ds))
    _write_text(args.out_labels, seq_io.dataset_to_labels_tsv(ds))
    manifest = _manifest_text(
        parser,
        args,
        inputs={},
        extra={"sequences": str(len(ds)), "num_classes": str(len(ds.classes)), "status": "ok"},
    )
    _write_manifest(args.out_fasta, manifest)
    logger.info("wrote %s sequences to %s", len(ds), args.out_fasta)
    return EXIT_OK


def _load_labeled_sequences(args) -> list[seq_io.LabeledSequence]:
    alphabet = seq_io.resolve_alphabet(args.alphabet)
    fasta_text = _read_text(args.fasta, "parse_fasta")
    records = seq_io.parse_fasta(fasta_text, alphabet)
    labels_text = _read_text(args.labels, "attach_labels")
    labels = seq_io.parse_labels(labels_text)
    n_classes = len({labels[rid] for rid, _ in records if rid in labels})
    if n_classes >= 2:
        return seq_io.attach_labels(records, labels).sequences
    # a single-class input cannot form a Dataset but can still be embedded
    matched = [
        seq_io.LabeledSequence(rid, residues, labels[rid])
        for rid, residues in records
        if rid in labels
    ]
    dropped = len(records) - len(matched)
    if dropped:
        logger.warning("dropped %d record(s) without a label", dropped)
    if not matched:
        raise seq_io.NoLabeledRecordsError("no record id matched the label table")
    logger.warning("labels cover a single class; output is usable for embedding only")
    return matched


def cmd_embed(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    sequences = _load_labeled_sequences(args)
    cfg = embed_mod.SpectrumConfig(
        method=_METHOD_MAP[args.method],
        alphabet=seq_io.resolve_alphabet(args.alphabet),
        k=args.k,
        m=args.m,
        g=args.g,
    )
    matrix = embed_mod.embed_sequences(sequences, cfg, args.pca_threshold, args.pca_r)
    _write_text(args.out_matrix, matrix.to_csv())
    _write_text(
        args.out_labels, "".join(f"{s.id}\t{s.label}\n" for s in sequences)
    )
    manifest = _manifest_text(
        parser,
        args,
        inputs={"fasta": args.fasta, "labels": args.labels},
        extra={
            "rows": str(matrix.rows),
            "cols": str(matrix.cols),
            "col_meaning": matrix.col_meaning,
            "resolved_k": str(cfg.k),
            "resolved_m": str(cfg.m),
            "resolved_g": str(cfg.g),
            "status": "ok",
        },
    )
    _write_manifest(args.out_matrix, manifest)
    logger.info("embedded %d sequences into %d columns", matrix.rows, matrix.cols)
    return EXIT_OK


def _load_training_inputs(args) -> tuple[embed_mod.FeatureMatrix, list[str], "object"]:
    matrix = embed_mod.FeatureMatrix.from_csv(_read_text(args.matrix, "matrix"))
    labels = seq_io.parse_labels(_read_text(args.labels, "labels"))
    row_labels = []
    for rid in matrix.row_ids:
        if rid not in labels:
            raise UnknownLabelError(f"matrix row '{rid}' has no label")
        row_labels.append(labels[rid])
    classes = sorted(set(row_labels))
    if len(classes) < 2:
        raise InvalidParameterError(
            f"training needs at least 2 classes, got {len(classes)}"
        )
    Y = seq_io.one_hot_matrix(row_labels, classes)
    return matrix, classes, Y


def _train_config(args, alpha: float) -> trainer_mod.TrainConfig:
    return trainer_mod.TrainConfig(
        alpha=alpha,
        iters=args.iters,
        seed=args.seed,
        norm_mode=args.norm.replace("-", "_"),
        epsilon=args.epsilon,
        step=args.step,
    )


def cmd_train(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    matrix, classes, Y = _load_training_inputs(args)
    cfg = _train_config(args, args.alpha)
    status = "ok"
    try:
        state, trace = trainer_mod.train(matrix, Y, cfg)
    except NonFiniteWeightsError as exc:
        trace = exc.trace
        state = exc.state
        status = "aborted-nonfinite"
    _write_text(args.out_trace, trace.to_csv())
    _write_text(args.out_model, trainer_mod.model_to_text(state.W, classes, cfg))
    manifest = _manifest_text(
        parser,
        args,
        inputs={"matrix": args.matrix, "labels": args.labels},
        extra={
            "status": status,
            "iterations_recorded": str(len(trace.records)),
            "degenerate_events": str(trace.degenerate_events),
        },
    )
    _write_manifest(args.out_trace, manifest)
    if trace.degenerate_events:
        logger.warning(
            "%d sample prediction(s) fell back to uniform (degenerate score sum)",
            trace.degenerate_events,
        )
    if status != "ok":
        print(
            f"training diverged after {len(trace.records)} iteration(s); "
            f"partial trace written to {args.out_trace}",
            file=sys.stderr,
        )
        return EXIT_NUMERIC
    final = trace.records[-1]
    print(
        f"iterations={final.iteration} final_loss={final.mean_loss!r} "
        f"accuracy={final.accuracy!r}"
    )
    return EXIT_OK


def cmd_sweep(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    matrix, _, Y = _load_training_inputs(args)
    if args.out_traces is None:
        args.out_traces = str(Path(args.out_sweep).with_suffix("")) + "_traces"
    grid = args.grid if isinstance(args.grid, list) else _grid_value(args.grid)
    base_cfg = _train_config(args, 0.0)
    result = trainer_mod.alpha_sweep(
        matrix, Y, base_cfg, tuple(grid), args.threshold
    )
    _write_text(args.out_sweep, trainer_mod.sweep_to_csv(result))
    traces_dir = Path(args.out_traces)
    traces_dir.mkdir(parents=True, exist_ok=True)
    for entry in result.entries:
        if entry.trace is not None:
            _write_text(
                traces_dir / f"trace_alpha_{entry.alpha!r}.csv", entry.trace.to_csv()
            )
    n_failed = sum(1 for e in result.entries if e.status == "failed")
    manifest = _manifest_text(
        parser,
        args,
        inputs={"matrix": args.matrix, "labels": args.labels},
        extra={
            "status": "ok" if result.best_alpha is not None else "all-failed",
            "best_alpha": _format_value(result.best_alpha),
            "failed": str(n_failed),
        },
    )
    _write_manifest(args.out_sweep, manifest)
    if n_failed:
        logger.warning("%d alpha value(s) diverged and were marked failed", n_failed)
    if result.best_alpha is None:
        print("all alpha values failed", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"best_alpha={result.best_alpha!r}")
    return EXIT_OK


def cmd_report(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    series: list[plotting.PlotSeries] = []
    if args.with_aa:
        series.append(plotting.PlotSeries("with AA", args.with_aa, plotting.ROLE_WITH_AA))
    if args.without_aa:
        series.append(
            plotting.PlotSeries("without AA", args.without_aa, plotting.ROLE_WITHOUT_AA)
        )
    if not series:
        raise InvalidParameterError("report needs --with-aa and/or --without-aa")
    spec = plotting.PlotSpec(series, args.out)
    loaded = [
        (s, trainer_mod.TrainingTrace.from_csv(_read_text(s.path, "trace"))) for s in series
    ]
    _write_text(args.out, plotting.render_svg(spec, loaded))
    if args.png:
        plotting.render_png(loaded, Path(args.out).with_suffix(".png"))
    inputs = {
        dest: path
        for dest, path in (("with_aa", args.with_aa), ("without_aa", args.without_aa))
        if path
    }
    manifest = _manifest_text(parser, args, inputs=inputs, extra={"status": "ok"})
    _write_manifest(args.out, manifest)
    logger.info("wrote %s", args.out)
    return EXIT_OK


def cmd_replay(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    entries = _parse_manifest(args.manifest)
    command = entries["command"]
    if command not in parser.sub_map or command == "replay":
        raise SeqAccelError(f"manifest names unknown command '{command}'")
    sub = parser.sub_map[command]
    argv = [command]
    for action in sub._actions:
        if not action.option_strings or action.dest in _SKIP_DESTS:
            continue
        key = f"arg.{action.dest}"
        if key not in entries:
            continue
        raw = entries[key]
        if action.nargs == 0:
            if raw == _format_value(action.const):
                argv.append(action.option_strings[0])
        elif raw != "":
            argv.extend([action.option_strings[0], raw])
    _verify_manifest_inputs(entries)
    logger.info("replaying: seqaccel %s", " ".join(argv))
    return main(argv)


def _verify_manifest_inputs(entries: dict[str, str]):
    """Re-hash recorded input files and refuse to replay stale inputs.

    Input digests are keyed by the argument that held the path, so each one
    can be located and re-checked.
    """
    arg_paths = {
        key[len("arg.") :]: value for key, value in entries.items() if key.startswith("arg.")
    }
    for key, recorded in entries.items():
        if not (key.startswith("input.") and key.endswith(".sha256")):
            continue
        name = key[len("input.") : -len(".sha256")]
        path = arg_paths.get(name)
        if not path:
            raise SeqAccelError(f"manifest records a digest for unknown input '{name}'")
        if not Path(path).exists():
            raise SeqAccelError(f"replay input missing: {path}")
        if _sha256_file(path) != recorded:
            raise SeqAccelError(
                f"replay input changed since the manifest was written: {path}"
            )


# ---------------------------------------------------------------- entry


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if getattr(args, "config", None):
            _apply_config(parser, args.command, _load_config(args.config))
            args = parser.parse_args(argv)
        return args.func(parser, args)
    except NonFiniteWeightsError as exc:
        print(f"NonFiniteWeights: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SeqAccelError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

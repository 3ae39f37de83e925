"""Command-line access to the engine.

Exit codes: 0 ok, 2 data error, 3 config error, 4 numeric divergence,
5 environment fault. stdout carries data only; diagnostics go to stderr.
Seeds are explicit flags everywhere randomness is involved, so identical
invocations produce byte-identical outputs.
"""

import argparse
import json
import socket
import sys

import numpy as np

from . import __version__
from .agent import (
    FeatureSpace,
    MappingExplorer,
    SimulatedFeedbackOracle,
    replay_log,
)
from .corpus import (
    N_DESCRIPTORS,
    build_corpus,
    load_corpus,
    retrieve_knn,
    save_corpus,
)
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    EnvironmentFault,
    ParameterError,
    SchemaError,
    SonomapError,
)
from .features import FeatureExtractor, available_features, sliding_windows
from .ingest import parse_frames_jsonl, parse_mocap_csv, read_wav
from .models import MlpRegressor

EXIT_OK = 0
EXIT_DATA = 2
EXIT_CONFIG = 3
EXIT_DIVERGENCE = 4
EXIT_ENVIRONMENT = 5


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so flag mistakes map to
    the documented config exit code."""

    def error(self, message):
        raise ConfigError(message)


def _load_stream(path):
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if path.endswith(".jsonl"):
        return parse_frames_jsonl(text)
    return parse_mocap_csv(text)


def _read_csv_matrix(path):
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise DataError(f"{path}: needs a header row and at least one data row")
    header = [c.strip() for c in lines[0].split(",")]
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != len(header):
            raise SchemaError(f"{path}: row {i} has {len(cells)} cells, "
                              f"expected {len(header)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise DataError(f"{path}: non-numeric cell at row {i}") from None
    return header, np.array(rows)


def _write_out(out, text):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)


# ---------------------------------------------------------------------------
# subcommands

def cmd_features(args):
    stream = _load_stream(args.input)
    names = [n.strip() for n in args.feature.split(",") if n.strip()]
    extractor = FeatureExtractor(features=names, window=args.window,
                                 hop=args.hop, tempo_bpm=args.tempo).fit()
    rows = []
    header = None
    for window in sliding_windows(stream, args.window, args.hop):
        fv = extractor.extract(window)
        header = fv.names
        rows.append(fv.values)
    if header is None:
        raise DataError(
            f"input has {len(stream)} frames; window of {args.window} "
            "produces no rows"
        )
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    _write_out(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_train(args):
    _, mat = _read_csv_matrix(args.dataset)
    if not 1 <= args.inputs < mat.shape[1]:
        raise ConfigError(
            f"--inputs {args.inputs} outside 1..{mat.shape[1] - 1} for "
            f"{mat.shape[1]} columns"
        )
    X, Y = mat[:, :args.inputs], mat[:, args.inputs:]
    hidden = tuple(int(h) for h in args.hidden.split(",") if h.strip())
    model = MlpRegressor(hidden_layer_sizes=hidden, epochs=args.epochs,
                         learning_rate=args.lr, seed=args.seed).fit(X, Y)
    with open(args.model, "w", encoding="utf-8") as f:
        f.write(model.to_json())
        f.write("\n")
    final = model.loss_curve_[-1] if model.loss_curve_ else float("nan")
    sys.stdout.write(f"final_mse={final!r}\n")
    return EXIT_OK


def cmd_predict(args):
    with open(args.model, "r", encoding="utf-8") as f:
        model = MlpRegressor.from_json(f.read())
    _, mat = _read_csv_matrix(args.dataset)
    out = model.predict(mat)
    lines = [",".join(repr(float(v)) for v in row) for row in np.atleast_2d(out)]
    _write_out(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_corpus(args):
    if args.action == "build":
        if not args.wav:
            raise ConfigError("corpus build needs at least one WAV path")
        buffers = {}
        paths = {}
        for i, path in enumerate(args.wav):
            with open(path, "rb") as f:
                buffers[f"src{i}"] = read_wav(f.read())
            paths[f"src{i}"] = path
        corpus = build_corpus(buffers)
        save_corpus(corpus, args.corpus, paths)
        stats = corpus.stats()
        sys.stdout.write(f"units={stats['unit_count']}\n")
        sys.stdout.write(f"mean_duration_s={stats['mean_duration_s']!r}\n")
        if stats["skipped"]:
            sys.stderr.write(f"skipped {stats['skipped']} degenerate units\n")
        return EXIT_OK
    # query
    corpus = load_corpus(args.corpus)
    if args.target_json:
        with open(args.target_json, "r", encoding="utf-8") as f:
            target = json.load(f)
    elif args.target:
        target = [float(v) for v in args.target.split(",") if v.strip()]
    else:
        raise ConfigError("corpus query needs --target or --target-json")
    if len(target) != N_DESCRIPTORS:
        raise ConfigError(
            f"target has {len(target)} values, expected {N_DESCRIPTORS}"
        )
    hits = retrieve_knn(corpus, target, k=args.k)
    for rank, (unit, dist) in enumerate(hits, start=1):
        sys.stdout.write(
            f"{rank},{unit.source_id},{unit.start},{unit.length},{dist!r}\n"
        )
    return EXIT_OK


def cmd_aiml_sim(args):
    with open(args.presets, "r", encoding="utf-8") as f:
        presets = json.load(f)
    with open(args.target, "r", encoding="utf-8") as f:
        targets = np.array(json.load(f), dtype=float)
    if len(presets) < 2:
        raise ConfigError(f"need at least 2 presets, got {len(presets)}")
    if targets.ndim != 2 or targets.shape[0] != len(presets):
        raise ConfigError(
            f"targets must be one point per preset "
            f"({len(presets)}), got shape {targets.shape}"
        )
    n_dims = targets.shape[1]
    space = FeatureSpace(
        tuple(f"x{i}" for i in range(n_dims)),
        tuple((0.0, 1.0) for _ in range(n_dims)),
    )
    if np.any(targets < 0.0) or np.any(targets > 1.0):
        raise ConfigError("target points must lie in the unit hypercube")
    explorer = MappingExplorer(space, len(presets), args.seed,
                               args.step_size, presets)
    oracle = SimulatedFeedbackOracle(targets, threshold=args.threshold)
    for i in range(args.iterations):
        proposal = explorer.propose()
        dist = oracle.mean_distance(proposal)
        sys.stdout.write(f"{i + 1},{dist!r}\n")
        feedback = oracle(proposal)
        if feedback == "zone":
            explorer.zone()
        else:
            explorer.guiding(feedback)
    sys.stdout.write(f"final_state_hash={explorer.state_hash()}\n")
    if args.log:
        events = [explorer.init_record()] + explorer.history
        with open(args.log, "w", encoding="utf-8") as f:
            for event in events:
                f.write(json.dumps(event, sort_keys=True))
                f.write("\n")
    return EXIT_OK


def cmd_replay(args):
    events = []
    with open(args.log, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                events.append(json.loads(line))
    explorer = replay_log(events)
    sys.stdout.write(f"final_state_hash={explorer.state_hash()}\n")
    return EXIT_OK


def cmd_serve(args):
    import signal

    import uvicorn

    from .server import create_app

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        raise EnvironmentFault(
            f"cannot bind {args.host}:{args.port}: {exc}"
        ) from None
    finally:
        probe.close()
    app = create_app(store_dir=args.session_dir, ui_dir=args.ui_dir)
    # uvicorn re-raises the signal that stopped it after its graceful
    # shutdown completes; absorb it so the process reports exit 0
    signal.signal(signal.SIGTERM, lambda *_: None)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except KeyboardInterrupt:
        pass
    return EXIT_OK


# ---------------------------------------------------------------------------
# wiring

def build_parser():
    parser = _Parser(prog="sonomap", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="JSON file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="extract windowed descriptors to CSV")
    p.add_argument("input", help="MoCap CSV or frames JSONL")
    p.add_argument("--feature", default="qom",
                   help=f"comma list from: {', '.join(available_features())}")
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--hop", type=int, default=32)
    p.add_argument("--tempo", type=float, default=120.0)
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("train", help="fit a mapping model from a CSV dataset")
    p.add_argument("dataset")
    p.add_argument("--model", required=True, help="output model JSON path")
    p.add_argument("--inputs", type=int, required=True,
                   help="number of leading input columns")
    p.add_argument("--hidden", default="16")
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="run a model over CSV inputs")
    p.add_argument("dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("corpus", help="build or query a unit corpus")
    p.add_argument("action", choices=("build", "query"))
    p.add_argument("wav", nargs="*", help="WAV paths (build)")
    p.add_argument("--corpus", required=True, help="corpus JSON path")
    p.add_argument("--target", help="19 comma-separated descriptor values")
    p.add_argument("--target-json", help="JSON file with 19 values")
    p.add_argument("-k", type=int, default=1)
    p.set_defaults(fn=cmd_corpus)

    p = sub.add_parser("aiml-sim",
                       help="scripted explorer + feedback-oracle loop")
    p.add_argument("--presets", required=True,
                   help="JSON file: one parameter vector per preset")
    p.add_argument("--target", required=True,
                   help="JSON file: hidden target point per preset")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--log", help="write a replayable history log (JSONL)")
    p.set_defaults(fn=cmd_aiml_sim)

    p = sub.add_parser("replay", help="re-run a history log and hash the result")
    p.add_argument("--log", required=True)
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("serve", help="run the WebSocket/HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--session-dir", default=".sonomap-sessions")
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        # --config entries fill in flags the user did not pass explicitly
        config_path = None
        if "--config" in argv:
            i = argv.index("--config")
            if i + 1 >= len(argv):
                raise ConfigError("--config needs a file path")
            config_path = argv[i + 1]
            argv = argv[:i] + argv[i + 2:]
        if config_path:
            with open(config_path, "r", encoding="utf-8") as f:
                overrides = json.load(f)
            if not isinstance(overrides, dict):
                raise ConfigError(f"{config_path}: config must be a JSON object")
            for key, value in overrides.items():
                flag = "--" + key.replace("_", "-")
                if flag not in argv:
                    argv += [flag, str(value)]
        args = parser.parse_args(argv)
        return args.fn(args)
    except (ConfigError, ParameterError, SchemaError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except DivergenceError as exc:
        sys.stderr.write(f"divergence: {exc}\n")
        return EXIT_DIVERGENCE
    except EnvironmentFault as exc:
        sys.stderr.write(f"environment: {exc}\n")
        return EXIT_ENVIRONMENT
    except (DataError, FileNotFoundError, SonomapError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points: convert, train, eval, serve (plus toygen).

Heavy settings live in config files; the command line only carries the
file path, debug mode and `--set key=value` overrides. Every command
writes a resolved-config snapshot next to its outputs so any run can be
reproduced from the snapshot alone. Exit codes: 0 success, 1 user error,
2 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import config as cfg
from .data.corpus import load_unified
from .data.ingest import ingest_raw
from .data.toy import generate_raw, generate_unified
from .errors import ConvRecError
from .evaluation import format_report, write_report
from .service import ServingSystem, SessionStore, create_app
from .training import System, load_artifact, save_artifact

log = logging.getLogger("convrec")


def setup_logging(debug: bool = False, log_file: str | None = None) -> None:
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
        handlers=handlers,
        force=True,
    )


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    overrides = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConvRecError(f"--set expects key=value, got {pair!r}")
        overrides[key] = value
    return overrides


def _load_tree(args) -> dict:
    return cfg.load_config(
        getattr(args, "config", None),
        _parse_overrides(getattr(args, "set", None)),
        debug=getattr(args, "debug", False),
        log=log,
    )


def _run_dir(tree: dict, explicit: str | None) -> Path:
    if explicit:
        path = Path(explicit)
    else:
        digest = hashlib.sha256(cfg.dump_config(tree).encode()).hexdigest()[:8]
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = Path("runs") / f"{stamp}-{digest}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _snapshot(tree: dict, out_dir: Path) -> None:
    (out_dir / "config.snapshot.yaml").write_text(cfg.dump_config(tree), "utf-8")


def _load_bundle(tree: dict):
    return load_unified(
        cfg.get(tree, "dataset.path"),
        tokenizer=cfg.get(tree, "dataset.tokenizer"),
        min_freq=cfg.get(tree, "dataset.min_freq"),
        max_vocab=cfg.get(tree, "dataset.max_vocab"),
    )


def cmd_convert(args) -> int:
    tree = _load_tree(args)
    out_dir = Path(args.out or cfg.get(tree, "dataset.path"))
    report = ingest_raw(args.raw, args.format, out_dir)
    log.info(
        "converted %d dialogs / %d utterances (resolved %d mentions, dropped %d, "
        "skipped %d records) -> %s",
        report.dialogs, report.utterances, report.resolved_mentions,
        report.unresolved_mentions, report.skipped_records, out_dir,
    )
    _snapshot(tree, out_dir)
    return 0


def cmd_train(args) -> int:
    tree = _load_tree(args)
    violations = cfg.validate(tree, cfg.core_schema())
    if violations:
        for violation in violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 1
    out_dir = _run_dir(tree, args.out)
    _snapshot(tree, out_dir)

    bundle = _load_bundle(tree)
    system = System(tree, bundle)
    artifact, state = system.fit()

    reports = system.evaluate("valid")
    artifact.metrics = {
        "valid": {r.task: r.metrics for r in reports},
        "best_epoch": state.best_epoch,
    }
    save_artifact(artifact, out_dir / "artifact")

    with open(out_dir / "history.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for entry in state.history:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    for report in reports:
        print(format_report(report), end="")
        write_report(report, out_dir / "metrics.jsonl")
    log.info("run complete: %d epochs, outputs in %s", state.epoch, out_dir)
    return 0


def cmd_eval(args) -> int:
    artifact_dir = Path(args.artifact)
    preliminary = load_artifact(artifact_dir)
    tree = preliminary.config_tree or cfg.load_config(None)
    if args.config or args.set or args.debug:
        tree = cfg.merge_trees(
            tree,
            cfg.load_config(args.config, _parse_overrides(args.set), debug=args.debug, log=log),
        )
    bundle = _load_bundle(tree)
    artifact = load_artifact(artifact_dir, active_fingerprint=bundle.fingerprint)
    system = System.from_artifact(artifact, bundle)
    if args.split not in bundle.splits:
        raise ConvRecError(
            f"unknown split '{args.split}'; expected one of {sorted(bundle.splits)}"
        )
    out_dir = Path(args.out) if args.out else artifact_dir.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    _snapshot(tree, out_dir)
    for report in system.evaluate(args.split):
        print(format_report(report), end="")
        write_report(report, out_dir / "metrics.jsonl")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    registry: dict[str, ServingSystem] = {}
    tree = None
    for path in args.artifact:
        artifact_dir = Path(path)
        preliminary = load_artifact(artifact_dir)
        tree = preliminary.config_tree or cfg.load_config(None)
        if args.config or args.set or args.debug:
            tree = cfg.merge_trees(
                tree,
                cfg.load_config(args.config, _parse_overrides(args.set),
                                debug=args.debug, log=log),
            )
        bundle = _load_bundle(tree)
        artifact = load_artifact(artifact_dir, active_fingerprint=bundle.fingerprint)
        system = System.from_artifact(artifact, bundle)
        system_id = args.system_id or artifact_dir.resolve().parent.name
        registry[system_id] = ServingSystem(
            system_id=system_id,
            system=system,
            description=f"{artifact.meta.get('dataset', '')} "
                        f"({', '.join(sorted(artifact.meta.get('task_models', {}).values()))})",
        )
    sessions_dir = args.sessions_dir or cfg.get(tree, "serve.sessions_dir")
    store = SessionStore(registry, sessions_dir)
    app = create_app(store, ui_dir=args.ui)
    port = args.port or cfg.get(tree, "serve.port")
    log.info("serving %d system(s) on port %d", len(registry), port)
    try:
        uvicorn.run(app, host=args.host, port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        raise ConvRecError(f"server failed to start on port {port}: {exc}") from exc
    return 0


def cmd_toygen(args) -> int:
    if args.kind == "raw":
        counts = generate_raw(args.out, seed=args.seed, n_dialogs=args.dialogs)
    else:
        counts = generate_unified(args.out, seed=args.seed, n_dialogs=args.dialogs)
    log.info("generated %s toy data in %s: %s", args.kind, args.out, counts)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convrec",
        description="Conversational recommender workbench",
    )
    parser.add_argument("--log-file", default=None, help="also write logs to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="config file path")
        p.add_argument("--debug", action="store_true", help="debug mode")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")

    p = sub.add_parser("convert", help="convert a raw dataset to the unified corpus")
    common(p)
    p.add_argument("--raw", required=True, help="raw dataset directory")
    p.add_argument("--format", default="redial", help="raw format name")
    p.add_argument("--out", default=None, help="output corpus directory")
    p.set_defaults(fn=cmd_convert)

    p = sub.add_parser("train", help="train a system from config")
    common(p)
    p.add_argument("--out", default=None, help="run directory (default runs/<ts>-<hash>)")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved artifact")
    common(p)
    p.add_argument("--artifact", required=True, help="artifact directory")
    p.add_argument("--split", default="test", help="split name")
    p.add_argument("--out", default=None, help="where to append metrics.jsonl")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve", help="serve the interaction API")
    common(p)
    p.add_argument("--artifact", action="append", required=True,
                   help="artifact directory (repeatable)")
    p.add_argument("--system-id", default=None, help="explicit id for the served system")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--sessions-dir", default=None, help="journal directory")
    p.add_argument("--ui", default=None,
                   help="directory with the built chat client (frontend/)")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("toygen", help="generate the synthetic toy dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("unified", "raw"), default="unified")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--dialogs", type=int, default=12)
    p.set_defaults(fn=cmd_toygen)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(getattr(args, "debug", False), args.log_file)
    try:
        return args.fn(args)
    except ConvRecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal error
        log.exception("internal error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())

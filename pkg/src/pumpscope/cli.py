"""Command-line entry point.

Exit codes: 0 success, 1 validation/usage error, 2 data error.
"""

import argparse
import json
import logging
import os
import sys

from pumpscope.errors import DataError, PumpscopeError, ValidationError

logger = logging.getLogger("pumpscope")

EXIT_OK, EXIT_VALIDATION, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


# -- config ------------------------------------------------------------------

def load_config(path):
    """Read a TOML or JSON config file into a dict."""
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read config: {exc}", path) from None
    try:
        if path.endswith(".json"):
            cfg = json.loads(raw.decode("utf-8"))
        else:
            try:
                import tomllib
            except ImportError:  # Python < 3.11
                import tomli as tomllib
            cfg = tomllib.loads(raw.decode("utf-8"))
    except ValueError as exc:
        raise ValidationError(f"invalid config file {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config file must hold a table/object")
    return cfg


def _resolve(args, cfg, name, default=None, required=False):
    """CLI value, else config value (flat or under the subcommand's table), else default."""
    v = getattr(args, name, None)
    if v is None:
        section = cfg.get(args.command.replace("-", "_"), {})
        key = name
        if key in section:
            v = section[key]
        elif key in cfg and not isinstance(cfg[key], dict):
            v = cfg[key]
    if v is None:
        if required:
            raise UsageError(f"the following argument is required: --{name.replace('_', '-')}")
        v = default
    return v


def _floats(v):
    if v is None:
        return None
    if isinstance(v, str):
        return [float(x) for x in v.split(",") if x.strip()]
    return [float(x) for x in v]


def _ints(v):
    return None if v is None else [int(x) for x in _floats(v)]


def _out_path(args, cfg, name, filename):
    p = _resolve(args, cfg, name)
    if p is not None:
        return p
    out_dir = _resolve(args, cfg, "out_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, filename)


def _registry(args, cfg):
    from pumpscope.corpus import load_registry
    return load_registry(_resolve(args, cfg, "registry", required=True))


# -- subcommands ---------------------------------------------------------------

def cmd_ingest_check(args, cfg):
    from pumpscope.corpus import (load_market, load_messages, load_registry, load_statuses,
                                  load_tweets, resample_hourly, stale_hours)
    report = {}
    reg_path = _resolve(args, cfg, "registry")
    registry = load_registry(reg_path) if reg_path else None
    if registry is not None:
        report["registry_symbols"] = len(registry.symbols)
    path = _resolve(args, cfg, "market")
    if path:
        market = load_market(path)
        report["market"] = {}
        for coin, s in sorted(market.items()):
            hourly = resample_hourly(s) if len(s) else None
            report["market"][coin] = {"points": len(s),
                                      "stale_hours": stale_hours(hourly, s) if hourly else 0}
    path = _resolve(args, cfg, "messages")
    if path:
        report["messages"] = len(load_messages(path))
    path = _resolve(args, cfg, "tweets")
    if path:
        report["tweets"] = len(load_tweets(path, registry))
    path = _resolve(args, cfg, "statuses")
    if path:
        report["statuses"] = len(load_statuses(path))
    if len(report) == 0:
        raise UsageError("give at least one of --market, --messages, --tweets, --statuses, --registry")
    print(json.dumps(report, indent=1, sort_keys=True))


def cmd_train_classifier(args, cfg):
    from pumpscope.corpus import load_messages
    from pumpscope.seeding import derive_seed
    from pumpscope.textclf import PumpClassifier, evaluate
    msgs = load_messages(_resolve(args, cfg, "labeled", required=True))
    if any(m.label is None for m in msgs):
        raise DataError("every labeled message needs a label")
    clf = PumpClassifier(_registry(args, cfg), seed=derive_seed(args.seed, "classifier"),
                         epochs=int(_resolve(args, cfg, "epochs", 20)),
                         l2_lambda=float(_resolve(args, cfg, "l2_lambda", 1e-4)))
    clf.fit([m.text for m in msgs], [m.label for m in msgs])
    model = _out_path(args, cfg, "model", "classifier.json")
    clf.save(model)
    met = evaluate(clf.predict([m.text for m in msgs]), [m.label for m in msgs])
    print(f"trained on {len(msgs)} messages; training accuracy {met.accuracy:.4f}; model -> {model}")


def cmd_classify(args, cfg):
    from pumpscope.corpus import SocialMessage, load_messages, write_messages
    from pumpscope.textclf import PumpClassifier
    clf = PumpClassifier.load(_resolve(args, cfg, "model", required=True))
    msgs = load_messages(_resolve(args, cfg, "messages", required=True))
    preds = clf.predict([m.text for m in msgs]) if msgs else []
    out = _out_path(args, cfg, "out", "classified.jsonl")
    write_messages(out, [SocialMessage(m.channel_id, m.timestamp, m.text, p, m.message_id)
                         for m, p in zip(msgs, preds)])
    print(f"{sum(p == 'pump' for p in preds)} of {len(msgs)} messages classified as pump -> {out}")


def cmd_extract_pumps(args, cfg):
    from pumpscope.attempts import build_attempts, write_attempts
    from pumpscope.corpus import PUMP, load_messages
    msgs = load_messages(_resolve(args, cfg, "messages", required=True))
    unlabeled = sum(m.label is None for m in msgs)
    if unlabeled:
        raise DataError(f"{unlabeled} messages have no label; run classify first")
    attempts = build_attempts([m for m in msgs if m.label == PUMP], _registry(args, cfg),
                              int(_resolve(args, cfg, "max_coins", 3)))
    out = _out_path(args, cfg, "out", "attempts.jsonl")
    write_attempts(out, attempts)
    print(f"{len(attempts)} attempts -> {out}")


def cmd_eval_success(args, cfg):
    from pumpscope.attempts import load_attempts, success_ratio_grid
    from pumpscope.corpus import load_market
    attempts = load_attempts(_resolve(args, cfg, "attempts", required=True))
    market = load_market(_resolve(args, cfg, "market", required=True))
    grid = success_ratio_grid(attempts, market,
                              _floats(_resolve(args, cfg, "thresholds", [0.5, 0.75, 0.9, 1.0])),
                              _ints(_resolve(args, cfg, "windows", [1, 3, 6, 12, 24, 48, 72])),
                              _resolve(args, cfg, "target", "first"))
    out = _out_path(args, cfg, "out", "success_grid.csv")
    grid.write_csv(out)
    print(f"success grid -> {out}")


def cmd_aggregate_signature(args, cfg):
    from pumpscope.attempts import load_attempts
    from pumpscope.corpus import load_market, load_tweets
    from pumpscope.seeding import derive_seed
    from pumpscope.signature import signature_curves, write_curves
    attempts = load_attempts(_resolve(args, cfg, "attempts", required=True))
    market = load_market(_resolve(args, cfg, "market", required=True))
    tweets = load_tweets(_resolve(args, cfg, "tweets", required=True), _registry(args, cfg))
    hw = float(_resolve(args, cfg, "half_window_hours", 3))
    curves, skipped = signature_curves(attempts, market, tweets, int(hw * 3600),
                                       derive_seed(args.seed, "signature"),
                                       bool(_resolve(args, cfg, "exclude_pumps", False)))
    out = _out_path(args, cfg, "out", "signature.csv")
    write_curves(out, curves)
    print(f"{len(curves)} curves ({skipped} attempts skipped) -> {out}")


def _sources(args, cfg, attempts, with_graph=True):
    from pumpscope.corex import linear_corex
    from pumpscope.corpus import load_market, load_tweets
    from pumpscope.features import FeatureSources
    from pumpscope.graphs import pump_user_matrix, user_user_components
    from pumpscope.seeding import derive_seed
    from pumpscope.tweetindex import TweetIndex
    market = load_market(_resolve(args, cfg, "market", required=True))
    index = TweetIndex(load_tweets(_resolve(args, cfg, "tweets", required=True), _registry(args, cfg)))
    components, corex = {}, None
    if with_graph and attempts:
        for coin in sorted({a.coin for a in attempts}):
            comp = user_user_components(coin, attempts, index, int(_resolve(args, cfg, "top_k", 2)),
                                        int(_resolve(args, cfg, "min_component_size", 25)))
            if comp.n_components:
                components[coin] = comp
        B = pump_user_matrix(attempts, index)
        if B.matrix.shape[0] >= 2 and B.matrix.shape[1] >= 2:
            corex = linear_corex(B.dense().astype(float), k=int(_resolve(args, cfg, "corex_k", 8)),
                                 seed=derive_seed(args.seed, "corex"),
                                 max_iter=int(_resolve(args, cfg, "corex_max_iter", 500)),
                                 columns=B.cols)
    return FeatureSources(market, index, components=components, corex=corex)


def _feature_config(args, cfg, task):
    from pumpscope.features import FeatureConfig
    base = FeatureConfig.task1() if task == 1 else FeatureConfig.task2()
    return FeatureConfig(int(_resolve(args, cfg, "w_econ", base.w_econ)),
                         int(_resolve(args, cfg, "w_tw", base.w_tw)), base.include_target)


def cmd_features(args, cfg):
    from pumpscope.attempts import load_attempts
    from pumpscope.features import assemble_row, write_dataset
    task = int(_resolve(args, cfg, "task", 1))
    coin = _resolve(args, cfg, "coin", required=True)
    at = int(_resolve(args, cfg, "at", required=True))
    path = _resolve(args, cfg, "attempts")
    attempts = load_attempts(path) if path else []
    match = [a for a in attempts if a.coin == coin and a.anchor_time == at]
    sources = _sources(args, cfg, attempts)
    row = assemble_row(coin, at, None, sources, _feature_config(args, cfg, task),
                       match[0] if match else None)
    out = _out_path(args, cfg, "out", f"features_{coin}_{at}.csv")
    write_dataset(out, [row])
    print(f"{len(row.vector())} features -> {out}")


def cmd_predict(args, cfg):
    from pumpscope.attempts import load_attempts
    from pumpscope.forest import ForestParams
    from pumpscope.predict import feature_ablation, write_report
    from pumpscope.seeding import derive_seed
    task = int(_resolve(args, cfg, "task", 1))
    if task not in (1, 2):
        raise ValidationError("--task must be 1 or 2")
    attempts = load_attempts(_resolve(args, cfg, "attempts", required=True))
    variants = _resolve(args, cfg, "variants", "twitter,economic,both")
    if isinstance(variants, str):
        variants = [v.strip() for v in variants.split(",") if v.strip()]
    for v in variants:
        if v not in ("twitter", "economic", "both"):
            raise ValidationError(f"unknown variant {v!r}")
    sources = _sources(args, cfg, attempts)
    params = ForestParams(n_trees=int(_resolve(args, cfg, "n_trees", 200)),
                          min_leaf=int(_resolve(args, cfg, "min_leaf", 2)))
    res = feature_ablation(task, attempts, sources, _feature_config(args, cfg, task),
                           derive_seed(args.seed, "task", task), params, tuple(variants))
    out = _out_path(args, cfg, "out", f"task{task}_auc.csv")
    write_report(out, res.values())
    for v, r in res.items():
        print(f"task {task} {v}: macro AUC {r.macro_auc:.4f} +- {r.std_auc:.4f} over {len(r.per_coin)} coins")
    print(f"report -> {out}")


def cmd_analyze_bots(args, cfg):
    from pumpscope.attempts import load_attempts
    from pumpscope.bots import (DEGREE_THRESHOLDS, build_profiles, cluster_report, cluster_users,
                                degree_table, label_telegram_active, write_cluster_report,
                                write_degree_table)
    from pumpscope.corex import linear_corex
    from pumpscope.corpus import load_statuses, load_tweets
    from pumpscope.graphs import pump_user_matrix
    from pumpscope.seeding import derive_seed
    attempts = load_attempts(_resolve(args, cfg, "attempts", required=True))
    tweets = load_tweets(_resolve(args, cfg, "tweets", required=True), _registry(args, cfg))
    statuses = load_statuses(_resolve(args, cfg, "statuses", required=True))
    thresholds = _floats(_resolve(args, cfg, "degree_thresholds", list(DEGREE_THRESHOLDS)))
    B = pump_user_matrix(attempts, tweets)
    profiles = build_profiles(B, statuses, label_telegram_active(tweets))
    out_dir = _resolve(args, cfg, "out_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    write_degree_table(os.path.join(out_dir, "bot_degree_table.csv"),
                       degree_table(profiles, thresholds))
    B.write_csv(os.path.join(out_dir, "pump_user_matrix.csv"))
    msg = f"{len(profiles)} users"
    if B.matrix.shape[0] >= 2 and B.matrix.shape[1] >= 2:
        corex = linear_corex(B.dense().astype(float), k=int(_resolve(args, cfg, "corex_k", 24)),
                             seed=derive_seed(args.seed, "corex"),
                             max_iter=int(_resolve(args, cfg, "corex_max_iter", 2000)),
                             columns=B.cols)
        corex.save(os.path.join(out_dir, "corex.json"))
        rep = cluster_report(cluster_users(corex), profiles)
        write_cluster_report(os.path.join(out_dir, "bot_clusters.csv"), rep)
        msg += f", {len(rep)} clusters"
    print(f"{msg} -> {out_dir}")


def cmd_synth(args, cfg):
    from pumpscope.synth import Scenario, synth
    sc = Scenario(seed=args.seed)
    for name in ("coins", "duration_days", "pumps_per_coin", "success_rate", "momentum",
                 "n_humans", "n_bots", "tweet_rate"):
        v = _resolve(args, cfg, name)
        if v is not None:
            setattr(sc, name, type(getattr(sc, name))(v))
    out_dir = _resolve(args, cfg, "out_dir", required=True)
    paths = synth(sc, out_dir)
    print(f"synthetic scenario (seed {sc.seed}) -> {os.path.dirname(paths['truth']) or '.'}")


def cmd_report(args, cfg):
    from pumpscope.pipeline import PipelineConfig, run_pipeline
    data_dir = _resolve(args, cfg, "data_dir", required=True)
    out_dir = _resolve(args, cfg, "out_dir", required=True)
    pc = PipelineConfig.from_dict(cfg.get("pipeline", {}))
    summary = run_pipeline(data_dir, out_dir, args.seed, pc)
    print(f"{summary['n_attempts']} attempts; reports -> {out_dir}")


COMMANDS = {
    "ingest-check": cmd_ingest_check,
    "train-classifier": cmd_train_classifier,
    "classify": cmd_classify,
    "extract-pumps": cmd_extract_pumps,
    "eval-success": cmd_eval_success,
    "aggregate-signature": cmd_aggregate_signature,
    "features": cmd_features,
    "predict": cmd_predict,
    "analyze-bots": cmd_analyze_bots,
    "synth": cmd_synth,
    "report": cmd_report,
}


REQUIRED = {
    "train-classifier": ("labeled", "registry"),
    "classify": ("model", "messages"),
    "extract-pumps": ("messages", "registry"),
    "eval-success": ("attempts", "market"),
    "aggregate-signature": ("attempts", "market", "tweets", "registry"),
    "features": ("market", "tweets", "registry", "coin", "at"),
    "predict": ("attempts", "market", "tweets", "registry"),
    "analyze-bots": ("attempts", "tweets", "statuses", "registry"),
    "synth": ("out_dir",),
    "report": ("data_dir", "out_dir"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML or JSON config file")
    common.add_argument("--out-dir", dest="out_dir", default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = _Parser(prog="pumpscope", parents=[common],
                description="Pump-and-dump detection pipeline on channel, microblog and market data.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def cmd(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    s = cmd("ingest-check", "validate input files and print a summary")
    for f in ("market", "messages", "tweets", "statuses", "registry"):
        s.add_argument(f"--{f}")

    s = cmd("train-classifier", "fit the pump message classifier")
    s.add_argument("--labeled")
    s.add_argument("--registry")
    s.add_argument("--model")
    s.add_argument("--epochs", type=int)
    s.add_argument("--l2-lambda", dest="l2_lambda", type=float)

    s = cmd("classify", "label messages with a trained classifier")
    s.add_argument("--model")
    s.add_argument("--messages")
    s.add_argument("--out")

    s = cmd("extract-pumps", "group pump messages into attempts")
    s.add_argument("--messages")
    s.add_argument("--registry")
    s.add_argument("--max-coins", dest="max_coins", type=int)
    s.add_argument("--out")

    s = cmd("eval-success", "success-ratio grid over thresholds and windows")
    s.add_argument("--attempts")
    s.add_argument("--market")
    s.add_argument("--thresholds", help="comma-separated fractions of the target")
    s.add_argument("--windows", help="comma-separated hours")
    s.add_argument("--target", choices=("first", "last"))
    s.add_argument("--out")

    s = cmd("aggregate-signature", "average price / tweet-volume curves around anchors")
    for f in ("attempts", "market", "tweets", "registry", "out"):
        s.add_argument(f"--{f}")
    s.add_argument("--half-window-hours", dest="half_window_hours", type=float)
    s.add_argument("--exclude-pumps", dest="exclude_pumps", action="store_true", default=None)

    s = cmd("features", "assemble one feature row for inspection")
    for f in ("market", "tweets", "registry", "attempts", "coin", "out"):
        s.add_argument(f"--{f}")
    s.add_argument("--at", type=int)
    s.add_argument("--task", type=int)
    s.add_argument("--w-econ", dest="w_econ", type=int)
    s.add_argument("--w-tw", dest="w_tw", type=int)

    s = cmd("predict", "walk-forward evaluation of Task 1 or 2")
    for f in ("attempts", "market", "tweets", "registry", "variants", "out"):
        s.add_argument(f"--{f}")
    s.add_argument("--task", type=int)
    s.add_argument("--n-trees", dest="n_trees", type=int)
    s.add_argument("--w-econ", dest="w_econ", type=int)
    s.add_argument("--w-tw", dest="w_tw", type=int)

    s = cmd("analyze-bots", "bot ratios by degree and by CorEx cluster")
    for f in ("attempts", "tweets", "statuses", "registry"):
        s.add_argument(f"--{f}")
    s.add_argument("--degree-thresholds", dest="degree_thresholds")
    s.add_argument("--corex-k", dest="corex_k", type=int)

    s = cmd("synth", "generate a deterministic synthetic scenario")
    s.add_argument("--coins", type=int)
    s.add_argument("--duration-days", dest="duration_days", type=int)
    s.add_argument("--pumps-per-coin", dest="pumps_per_coin", type=int)
    s.add_argument("--success-rate", dest="success_rate", type=float)
    s.add_argument("--momentum", type=float)

    s = cmd("report", "run every stage on a data directory")
    s.add_argument("--data-dir", dest="data_dir")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("pumpscope: error: a command is required", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(getattr(args, "config", None))
        if not hasattr(args, "seed"):
            args.seed = int(cfg.get("seed", 0))
        missing = [n for n in REQUIRED.get(args.command, ())
                   if _resolve(args, cfg, n) is None]
        if missing:
            raise UsageError("the following arguments are required: "
                             + ", ".join("--" + n.replace("_", "-") for n in missing))
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pumpscope {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PumpscopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Run every stage on a data directory and write the reports."""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from pumpscope.attempts import build_attempts, success_ratio_grid, write_attempts
from pumpscope.bots import (build_profiles, cluster_report, cluster_users, degree_table,
                            label_telegram_active, write_cluster_report, write_degree_table)
from pumpscope.corex import linear_corex
from pumpscope.corpus import (PUMP, load_market, load_messages, load_registry, load_statuses,
                              load_tweets, write_messages)
from pumpscope.errors import ValidationError
from pumpscope.features import FeatureConfig, FeatureSources
from pumpscope.forest import ForestParams
from pumpscope.graphs import pump_user_matrix, user_user_components
from pumpscope.predict import feature_ablation, write_report
from pumpscope.seeding import derive_seed
from pumpscope.signature import signature_curves, write_curves
from pumpscope.textclf import PumpClassifier, evaluate
from pumpscope.tweetindex import TweetIndex

logger = logging.getLogger(__name__)

# Figures measured on real-world corpora, which are not shipped; reported for
# comparison only.
REFERENCE_VALUES = {
    "classifier_accuracy": 0.879, "classifier_precision": 0.895,
    "classifier_recall": 0.908, "classifier_f1": 0.901,
    "task1_macro_auc": "0.74 +- 0.08", "task2_macro_auc": "0.66 +- 0.17",
    "success_rate_at_target": "< 0.05",
}


@dataclass
class PipelineConfig:
    thresholds: tuple = (0.5, 0.75, 0.9, 1.0)
    windows: tuple = (1, 3, 6, 12, 24, 48, 72)
    half_window_hours: int = 3
    top_k: int = 2
    min_component_size: int = 25
    corex_k: int = 8
    corex_max_iter: int = 500
    n_trees: int = 100
    min_leaf: int = 2
    task1_w_econ: int = 15
    task2_w_econ: int = 7
    w_tw: int = 15
    degree_thresholds: tuple = (1, 5, 10, 20, 50, 100)
    variants: tuple = ("twitter", "economic", "both")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kw)


@dataclass
class PipelineInputs:
    market: dict
    messages: list
    labeled: list
    tweets: list
    statuses: dict
    registry: object
    extra: dict = field(default_factory=dict)

    @classmethod
    def load(cls, data_dir):
        p = lambda name: os.path.join(data_dir, name)  # noqa: E731
        registry = load_registry(p("registry.txt"))
        labeled = load_messages(p("labeled.jsonl")) if os.path.exists(p("labeled.jsonl")) else []
        statuses = load_statuses(p("statuses.csv")) if os.path.exists(p("statuses.csv")) else {}
        return cls(load_market(p("market.csv")), load_messages(p("messages.jsonl")), labeled,
                   load_tweets(p("tweets.jsonl"), registry), statuses, registry)


def _dump(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _r(x):
    return None if x is None or (isinstance(x, float) and not np.isfinite(x)) else round(float(x), 6)


def run_pipeline(data_dir, out_dir, seed=0, config=None):
    """Classifier -> attempts -> success grid -> signatures -> graphs/CorEx ->
    Task I/II -> bot tables. Returns the summary dict written to report.json."""
    config = config or PipelineConfig()
    os.makedirs(out_dir, exist_ok=True)
    out = lambda name: os.path.join(out_dir, name)  # noqa: E731
    inp = PipelineInputs.load(data_dir)
    summary = {"seed": seed, "config": asdict(config), "reference_values": REFERENCE_VALUES}

    # classification
    if not inp.labeled:
        raise ValidationError("labeled.jsonl is required to train the classifier")
    clf = PumpClassifier(inp.registry, seed=derive_seed(seed, "classifier"))
    clf.fit([m.text for m in inp.labeled], [m.label for m in inp.labeled])
    clf.save(out("classifier.json"))
    preds = clf.predict([m.text for m in inp.messages])
    classified = [type(m)(m.channel_id, m.timestamp, m.text, p, m.message_id)
                  for m, p in zip(inp.messages, preds)]
    write_messages(out("classified.jsonl"), classified)
    if all(m.label is not None for m in inp.messages) and inp.messages:
        met = evaluate([p == PUMP for p in preds], [m.label == PUMP for m in inp.messages])
        summary["classifier"] = {k: _r(v) for k, v in asdict(met).items()}

    # attempts and success
    attempts = build_attempts([m for m in classified if m.label == PUMP], inp.registry)
    write_attempts(out("attempts.jsonl"), attempts)
    summary["n_attempts"] = len(attempts)
    if attempts:
        grid = success_ratio_grid(attempts, inp.market, config.thresholds, config.windows)
        grid.write_csv(out("success_grid.csv"))
        summary["success_ratio_at_target_1h"] = _r(grid.ratio(config.thresholds[-1],
                                                            config.windows[0]))

        curves, skipped = signature_curves(attempts, inp.market, inp.tweets,
                                           config.half_window_hours * 3600,
                                           derive_seed(seed, "signature"))
        write_curves(out("signature.csv"), curves)
        summary["signature_skipped"] = skipped

    # user graphs and CorEx
    index = TweetIndex(inp.tweets)
    B = pump_user_matrix(attempts, index)
    B.write_csv(out("pump_user_matrix.csv"))
    components = {}
    for coin in sorted({a.coin for a in attempts}):
        comp = user_user_components(coin, attempts, index, config.top_k,
                                    config.min_component_size)
        if comp.n_components:
            components[coin] = comp
    summary["components"] = {c: list(v.sizes) for c, v in components.items()}
    corex = None
    if B.matrix.shape[0] >= 2 and B.matrix.shape[1] >= 2:
        try:
            corex = linear_corex(B.dense().astype(float), k=config.corex_k,
                                 seed=derive_seed(seed, "corex"), max_iter=config.corex_max_iter,
                                 columns=B.cols)
            corex.save(out("corex.json"))
        except ValidationError as exc:
            logger.warning("CorEx skipped: %s", exc)

    # prediction tasks
    sources = FeatureSources(inp.market, index, components=components, corex=corex)
    params = ForestParams(n_trees=config.n_trees, min_leaf=config.min_leaf)
    reports = []
    for task, cfg in ((1, FeatureConfig.task1(w_econ=config.task1_w_econ, w_tw=config.w_tw)),
                      (2, FeatureConfig.task2(w_econ=config.task2_w_econ, w_tw=config.w_tw))):
        res = feature_ablation(task, attempts, sources, cfg, derive_seed(seed, "task", task),
                               params, config.variants)
        write_report(out(f"task{task}_auc.csv"), res.values())
        summary[f"task{task}"] = {v: {"macro_auc": _r(r.macro_auc), "std_auc": _r(r.std_auc),
                                      "coins": sorted(r.per_coin), "skipped": r.skipped}
                                  for v, r in res.items()}
        reports.append(res)

    # bots
    telegram = label_telegram_active(inp.tweets)
    profiles = build_profiles(B, inp.statuses, telegram)
    rows = degree_table(profiles, config.degree_thresholds)
    write_degree_table(out("bot_degree_table.csv"), rows)
    if corex is not None:
        crep = cluster_report(cluster_users(corex), profiles)
        write_cluster_report(out("bot_clusters.csv"), crep)
        summary["n_clusters"] = len(crep)
    summary["n_users"] = len(profiles)
    _dump(out("report.json"), summary)
    return summary

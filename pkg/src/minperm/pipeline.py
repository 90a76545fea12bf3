"""End-to-end wiring of the detection pipeline.

Stages: tokenize + train the topic model on the training split, minimize the
benign training apps fold-wise, mine support tables, filter to final minimum
sets, then assess and evaluate the test split. Every stage derives its
randomness from the single run seed, so a config fully determines all
outputs.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import metrics, topics
from .corpus import AppRecord, Corpus, split
from .funcperm import SupportTable, final_minset, mine_support
from .metrics import EvalReport
from .minset import MinsetResult, iterate_minset, over_declared
from .recommender import NoNeighborsError, Recommendation, TrainingSet, recommend
from .risk import RiskReport, assess
from .util import subseed


@dataclass
class RunConfig:
    """All knobs of one pipeline run; everything defaults to the standard setup."""

    seed: int = 0
    k: int = 100
    alpha: float | None = None  # None = 50 / k
    beta: float = 0.01
    gibbs_iterations: int = 1000
    infer_iterations: int = 200
    t_b: float = 0.6
    t_m: float = 0.4
    theta_support: float = 0.1
    top_t: int = 20
    n_folds: int = 5
    max_iterations: int = 10
    test_ratio: float = 0.2
    stop_ratio: float = 0.5
    relevance_floor: float = 0.05
    uniform_fallback: bool = False
    relax_threshold: bool = False
    use_index: bool = True
    threads: int = 1

    def __post_init__(self) -> None:
        for name in ("t_b", "t_m", "test_ratio", "stop_ratio"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {value}")
        if not 0.0 <= self.theta_support <= 1.0:
            raise ValueError(f"theta_support must be in [0, 1], got {self.theta_support}")

    @property
    def effective_alpha(self) -> float:
        return topics.default_alpha(self.k) if self.alpha is None else self.alpha

    def echo(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["alpha"] = self.effective_alpha
        return out

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"{path}: unknown config keys {unknown}")
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)

    def with_overrides(self, **overrides) -> "RunConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def split_corpus(corpus: Corpus, cfg: RunConfig) -> tuple[Corpus, Corpus]:
    return split(corpus, cfg.test_ratio, cfg.seed)


def tokenize_records(records: list[AppRecord], stopwords: frozenset[str]) -> dict[str, list[str]]:
    return {r.id: topics.tokenize(r.description, stopwords) for r in records}


def train_topics(records: list[AppRecord], cfg: RunConfig) -> tuple[topics.TopicModel, dict[str, np.ndarray]]:
    """Tokenize descriptions and train the topic model over the given records."""
    stopwords = topics.load_stopwords()
    docs = tokenize_records(records, stopwords)
    empty = sorted(app_id for app_id, toks in docs.items() if not toks)
    if empty:
        raise ValueError(f"apps with empty descriptions after tokenization: {empty}")
    ids = [r.id for r in records]
    model, func = topics.train_lda(
        [docs[i] for i in ids],
        k=cfg.k,
        alpha=cfg.effective_alpha,
        beta=cfg.beta,
        iterations=cfg.gibbs_iterations,
        seed=subseed(cfg.seed, "lda"),
        doc_ids=ids,
    )
    return model, {app_id: func[i] for i, app_id in enumerate(ids)}


def infer_func(
    model: topics.TopicModel, records: list[AppRecord], cfg: RunConfig
) -> dict[str, np.ndarray]:
    """Fold-in topic vectors for unseen records, one seeded stream per app."""
    stopwords = topics.load_stopwords()
    out: dict[str, np.ndarray] = {}
    for r in records:
        out[r.id] = topics.infer(
            model,
            topics.tokenize(r.description, stopwords),
            iterations=cfg.infer_iterations,
            seed=subseed(cfg.seed, "infer", r.id),
            uniform_fallback=cfg.uniform_fallback,
        )
    return out


def training_set(
    records: list[AppRecord],
    func: dict[str, np.ndarray],
    cfg: RunConfig,
    perms: dict[str, frozenset[str]] | None = None,
) -> TrainingSet:
    """Bundle records into the recommender's training-side structure."""
    ids = [r.id for r in records]
    declared = [perms[r.id] if perms else r.declared for r in records]
    return TrainingSet(
        ids=ids,
        func=np.stack([func[i] for i in ids]),
        declared=declared,
        relevance_floor=cfg.relevance_floor,
    )


def mine_tables(
    records: list[AppRecord],
    func: dict[str, np.ndarray],
    fingerprint: str,
) -> tuple[SupportTable, SupportTable]:
    """Mine declared-based and code-based support tables from the same records."""
    matrix = np.stack([func[r.id] for r in records])
    declared_table = mine_support(
        matrix, [r.declared for r in records], "declared", model_fingerprint=fingerprint
    )
    code_table = mine_support(
        matrix, [r.code_perms for r in records], "code", model_fingerprint=fingerprint
    )
    return declared_table, code_table


def minimize_test_app(
    record: AppRecord,
    vec: np.ndarray,
    benign_train: TrainingSet,
    malicious_train: TrainingSet,
    declared_table: SupportTable,
    code_table: SupportTable,
    cfg: RunConfig,
) -> frozenset[str]:
    """Single-shot minimum set for an app outside the training folds."""
    report = over_declared(
        record.id, record.declared, vec, benign_train, malicious_train,
        cfg.t_b, cfg.t_m, stop_ratio=cfg.stop_ratio, use_index=cfg.use_index,
    )
    return final_minset(report.kept, vec, declared_table, code_table, cfg.theta_support, cfg.top_t)


@dataclass
class PipelineResult:
    """Everything one full run produces, keyed where relevant by app id."""

    config: RunConfig
    train_corpus: Corpus
    test_corpus: Corpus
    model: topics.TopicModel
    train_func: dict[str, np.ndarray]
    test_func: dict[str, np.ndarray]
    minset_result: MinsetResult
    final_minsets: dict[str, frozenset[str]]
    declared_table: SupportTable
    code_table: SupportTable
    reports: dict[str, list[RiskReport]] = field(default_factory=dict)
    rankings: dict[str, list[str]] = field(default_factory=dict)
    eval_reports: dict[str, EvalReport] = field(default_factory=dict)

    def benign_training_set(self) -> TrainingSet:
        cfg = self.config
        return training_set(
            self.train_corpus.benign(), self.train_func, cfg, perms=self.final_minsets
        )

    def malicious_training_set(self) -> TrainingSet:
        return training_set(self.train_corpus.malicious(), self.train_func, self.config)


def run_training(corpus: Corpus, cfg: RunConfig) -> PipelineResult:
    """Split, train the topic model, minimize and filter the benign training apps."""
    train_corpus, test_corpus = split(corpus, cfg.test_ratio, cfg.seed)
    benign_train = train_corpus.benign()
    malicious_train = train_corpus.malicious()
    if not benign_train:
        raise ValueError("no benign training records")
    if not malicious_train:
        raise ValueError("no malicious training records")

    model, train_func = train_topics(train_corpus.records, cfg)
    malicious_ts = training_set(malicious_train, train_func, cfg)

    minset_result = iterate_minset(
        benign_train,
        train_func,
        malicious_ts,
        n_folds=cfg.n_folds,
        t_b=cfg.t_b,
        t_m=cfg.t_m,
        max_iterations=cfg.max_iterations,
        seed=subseed(cfg.seed, "folds"),
        stop_ratio=cfg.stop_ratio,
        use_index=cfg.use_index,
    )

    declared_table, code_table = mine_tables(benign_train, train_func, model.fingerprint)
    final_sets = {
        app_id: final_minset(
            perms, train_func[app_id], declared_table, code_table, cfg.theta_support, cfg.top_t
        )
        for app_id, perms in minset_result.minsets.items()
    }

    test_func = infer_func(model, test_corpus.records, cfg)
    return PipelineResult(
        config=cfg,
        train_corpus=train_corpus,
        test_corpus=test_corpus,
        model=model,
        train_func=train_func,
        test_func=test_func,
        minset_result=minset_result,
        final_minsets=final_sets,
        declared_table=declared_table,
        code_table=code_table,
    )


def assess_tests(result: PipelineResult) -> None:
    """Assess every test record; fills reports, rankings on the result."""
    cfg = result.config
    benign_ts = result.benign_training_set()
    malicious_ts = result.malicious_training_set()
    registry = result.train_corpus.registry

    def one(record: AppRecord) -> RiskReport:
        return assess(
            record.id,
            record.declared,
            result.test_func[record.id],
            benign_ts,
            malicious_ts,
            cfg.t_b,
            cfg.t_m,
            registry,
            stop_ratio=cfg.stop_ratio,
            use_index=cfg.use_index,
            relax_threshold=cfg.relax_threshold,
        )

    records = sorted(result.test_corpus.records, key=lambda r: r.id)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            reports = list(pool.map(one, records))
    else:
        reports = [one(r) for r in records]

    result.reports = {"benign": [], "malicious": []}
    for record, report in zip(records, reports):
        result.reports[record.label].append(report)
        result.rankings[record.id] = list(report.benign_ranking)


def evaluate_run(result: PipelineResult, truth_min: dict[str, frozenset[str]] | None = None) -> None:
    """Compute the metric set per test label; fills eval_reports on the result.

    Necessary permission sets come from the ground-truth file when given,
    otherwise from a single-shot minimization of each test app.
    """
    cfg = result.config
    if not result.reports:
        assess_tests(result)
    benign_ts = result.benign_training_set()
    malicious_ts = result.malicious_training_set()

    n_all = len(set().union(*benign_ts.declared)) if benign_ts.declared else 0
    by_id = result.test_corpus.by_id()

    necessary: dict[str, frozenset[str]] = {}
    for record in result.test_corpus.records:
        if truth_min is not None:
            necessary[record.id] = truth_min.get(record.id, frozenset())
        else:
            try:
                necessary[record.id] = minimize_test_app(
                    record,
                    result.test_func[record.id],
                    benign_ts,
                    malicious_ts,
                    result.declared_table,
                    result.code_table,
                    cfg,
                )
            except NoNeighborsError:
                necessary[record.id] = frozenset()

    result.eval_reports = {}
    for label, reports in result.reports.items():
        ids = [r.app_id for r in reports]
        rankings = {i: result.rankings[i] for i in ids}
        declared = {i: by_id[i].declared for i in ids}
        result.eval_reports[label] = metrics.evaluate_reports(
            reports,
            rankings,
            declared,
            {i: necessary[i] for i in ids},
            n_all,
            parameters=cfg.echo(),
        )


def recommend_for(
    result: PipelineResult, record: AppRecord, side: str = "benign"
) -> Recommendation:
    """Recommendation for one test app from the chosen training side."""
    cfg = result.config
    if side == "benign":
        ts, threshold = result.benign_training_set(), cfg.t_b
    elif side == "malicious":
        ts, threshold = result.malicious_training_set(), cfg.t_m
    else:
        raise ValueError(f"side must be 'benign' or 'malicious', got {side!r}")
    return recommend(
        result.test_func[record.id], ts, threshold,
        stop_ratio=cfg.stop_ratio, use_index=cfg.use_index, relax_threshold=cfg.relax_threshold,
    )

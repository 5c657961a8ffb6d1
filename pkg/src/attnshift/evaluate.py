"""Evaluation pipelines: stratified CV, ranking metrics, LOSO transfer,
and per-region AUC grids.

All randomness is derived from (seed, subject index, purpose, fold)
tuples, so results are byte-identical however the work is scheduled
across processes. Per-fold pipelines follow one rule everywhere:
features may be extracted for all trials (extraction never looks at
labels), but selection and model fitting see training rows only.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import forest as _forest
from .features import CAT_SPATIAL, CAT_TEMPORAL, FeatureMatrix, extract
from .forest import ForestConfig
from .montage import ROI_NAMES
from .selection import MULTI_BAND_BUDGET, SINGLE_BAND_BUDGET, select
from .shapx import AttributionSummary, aggregate, tree_shap
from .spectral import BAND_NAMES, band_power
from .synthgen import TrialSet

__all__ = [
    "PipelineConfig",
    "stratified_kfold",
    "auc",
    "accuracy",
    "roc_points",
    "mean_roc",
    "extract_subject",
    "fold_artifacts",
    "run_within_subject",
    "run_within",
    "run_loso",
    "roi_band_importance",
    "permuted_labels",
]

CLASS_NAMES = ("EI", "TCSI")
ROC_GRID = np.linspace(0.0, 1.0, 101)
GRID_BAND_ORDER = BAND_NAMES + ("multi",)

# fixed salts keeping the seed streams of unrelated stages apart
_SALT_FOLDS = 11
_SALT_FOREST = 23
_SALT_LOSO = 31
_SALT_GRID = 47
_SALT_PERMUTE = 59


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(tuple(parts)).generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class PipelineConfig:
    """Settings for one decoding pipeline run.

    band is "multi" or a single band name; budget None means the
    standard 500 (multi) / 100 (single band) feature count. jobs only
    schedules subjects across processes and never changes results.
    """

    band: str = "multi"
    n_folds: int = 3
    budget: int | None = None
    n_trees: int = 200
    max_depth: int = 10
    min_samples_split: int = 10
    seed: int = 0
    jobs: int = 1
    compute_shap: bool = True
    beeswarm_k: int = 20

    def validate(self):
        if self.band != "multi" and self.band not in BAND_NAMES:
            raise ValueError(f"unknown band {self.band!r}")
        if self.n_folds < 2:
            raise ValueError("n_folds must be at least 2")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")
        ForestConfig(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            min_samples_split=self.min_samples_split,
        ).validate()

    def bands_tuple(self) -> tuple[str, ...]:
        return BAND_NAMES if self.band == "multi" else (self.band,)

    def effective_budget(self) -> int:
        if self.budget is not None:
            return self.budget
        return MULTI_BAND_BUDGET if self.band == "multi" else SINGLE_BAND_BUDGET

    def forest_config(self, seed: int) -> ForestConfig:
        return ForestConfig(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            min_samples_split=self.min_samples_split,
            seed=seed,
        )


def stratified_kfold(
    labels, n_folds: int, seed: int, class_names: tuple[str, str] = CLASS_NAMES
) -> list[np.ndarray]:
    """Split trial indices into class-balanced test folds.

    Each class is shuffled separately and dealt into n_folds chunks
    whose sizes differ by at most one, so every fold's class counts
    stay within one of n_c / n_folds.

    Returns
    -------
    list of sorted index arrays, one per fold, partitioning all trials.

    Raises
    ------
    ValueError
        If n_folds < 2 or some class has fewer members than n_folds;
        the message names the offending class.
    """
    labels = np.asarray(labels)
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    rng = np.random.default_rng(seed)
    folds: list[list[np.ndarray]] = [[] for _ in range(n_folds)]
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        if idx.size < n_folds:
            raise ValueError(
                f"class {class_names[c]} has fewer members than the fold count "
                f"({idx.size} < {n_folds})"
            )
        perm = rng.permutation(idx)
        base = idx.size // n_folds
        extra = idx.size % n_folds
        start = 0
        for f in range(n_folds):
            size = base + (1 if f < extra else 0)
            folds[f].append(perm[start : start + size])
            start += size
    return [np.sort(np.concatenate(parts)) for parts in folds]


def roc_points(labels, scores) -> tuple[np.ndarray, np.ndarray]:
    """ROC curve (fpr, tpr) with tied scores collapsed into one point.

    Starts at (0, 0) and ends at (1, 1); both axes are non-decreasing.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs at least one trial of each class")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    pos = labels[order] == 1
    ends = np.append(np.flatnonzero(s[:-1] != s[1:]), s.size - 1)
    tp = np.cumsum(pos)[ends]
    fp = np.cumsum(~pos)[ends]
    tpr = np.concatenate(([0.0], tp / n_pos))
    fpr = np.concatenate(([0.0], fp / n_neg))
    return fpr, tpr


def auc(labels, scores) -> float:
    """Trapezoid area under the tie-grouped ROC curve."""
    fpr, tpr = roc_points(labels, scores)
    return float(np.trapezoid(tpr, fpr))


def accuracy(labels, scores, threshold: float = 0.5) -> float:
    """Accuracy of thresholding P(TCSI); a score exactly at the
    threshold counts as EI."""
    labels = np.asarray(labels)
    pred = (np.asarray(scores) > threshold).astype(labels.dtype)
    return float(np.mean(pred == labels))


def mean_roc(curves: list[tuple[np.ndarray, np.ndarray]]):
    """Vertically average fold ROC curves on the fixed FPR grid.

    Returns (grid, mean_tpr, sd_tpr) with population sd across folds.
    """
    tprs = np.stack([np.interp(ROC_GRID, fpr, tpr) for fpr, tpr in curves])
    return ROC_GRID.copy(), tprs.mean(axis=0), tprs.std(axis=0)


def extract_subject(ts: TrialSet, bands: tuple[str, ...] = BAND_NAMES) -> FeatureMatrix:
    """Band-power extraction for every trial of one subject."""
    tensors = [band_power(ts.data[i], ts.fs) for i in range(ts.n_trials)]
    return extract(tensors, ts.labels, bands=bands)


def permuted_labels(ts: TrialSet, seed: int) -> TrialSet:
    """Copy of a trial set with labels shuffled and data untouched."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, _SALT_PERMUTE)))
    return TrialSet(
        subject_id=ts.subject_id,
        fs=ts.fs,
        labels=rng.permutation(ts.labels),
        data=ts.data,
        signature=ts.signature,
    )


@dataclass(frozen=True)
class FoldMetrics:
    fold: int
    auc: float
    accuracy: float
    n_test: int

    def to_jsonable(self):
        return {
            "fold": self.fold,
            "auc": self.auc,
            "accuracy": self.accuracy,
            "n_test": self.n_test,
        }


@dataclass(eq=False)
class BeeswarmData:
    """Per-trial attributions of the strongest features, for plotting."""

    feature_ids: np.ndarray
    names: list[str]
    phi: np.ndarray
    values: np.ndarray
    labels: np.ndarray


@dataclass(eq=False)
class SubjectResult:
    subject_id: str
    band: str
    n_trials: int
    folds: list[FoldMetrics]
    auc_mean: float
    auc_sd: float
    acc_mean: float
    acc_sd: float
    roc_grid: np.ndarray
    roc_tpr_mean: np.ndarray
    roc_tpr_sd: np.ndarray
    scores: np.ndarray
    selection_counts: dict[str, int]
    summary: AttributionSummary | None
    beeswarm: BeeswarmData | None
    local_accuracy_max: float | None

    def to_jsonable(self):
        doc = {
            "subject_id": self.subject_id,
            "band": self.band,
            "n_trials": self.n_trials,
            "folds": [m.to_jsonable() for m in self.folds],
            "auc_mean": self.auc_mean,
            "auc_sd": self.auc_sd,
            "acc_mean": self.acc_mean,
            "acc_sd": self.acc_sd,
            "roc": {
                "fpr_grid": self.roc_grid.tolist(),
                "tpr_mean": self.roc_tpr_mean.tolist(),
                "tpr_sd": self.roc_tpr_sd.tolist(),
            },
            "scores": self.scores.tolist(),
            "selection_counts": self.selection_counts,
        }
        if self.summary is not None:
            doc["attribution"] = self.summary.to_jsonable()
            doc["local_accuracy_max"] = self.local_accuracy_max
        return doc


def run_within_subject(
    ts: TrialSet, config: PipelineConfig, subject_index: int = 0
) -> SubjectResult:
    """Stratified k-fold decoding of one subject's trials.

    Per fold: feature selection on training rows, forest fit on the
    selected columns, scoring and (optionally) exact attributions on
    the held-out rows. Attribution shares are aggregated over all
    trials, each explained by the fold model that never saw it.
    """
    config.validate()
    bands = config.bands_tuple()
    fm = extract_subject(ts, bands)
    X = fm.values
    y = fm.labels.astype(np.int64)
    n, d = X.shape
    folds = stratified_kfold(
        y, config.n_folds, _derive_seed(config.seed, subject_index, _SALT_FOLDS)
    )
    budget = config.effective_budget()
    scores_all = np.zeros(n)
    phi_full = np.zeros((n, d)) if config.compute_shap else None
    metrics = []
    curves = []
    selection_counts: dict[str, int] = {}
    residual_max = 0.0
    for f, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(n), test_idx, assume_unique=True)
        plan = select(X[train_idx], y[train_idx], fm.metas, budget)
        cols = plan.selected_ids
        fcfg = config.forest_config(
            _derive_seed(config.seed, subject_index, _SALT_FOREST, f)
        )
        model = _forest.fit(X[np.ix_(train_idx, cols)], y[train_idx], fcfg)
        X_test = X[np.ix_(test_idx, cols)]
        proba = _forest.predict_proba(model, X_test)
        sc = proba[:, 1]
        scores_all[test_idx] = sc
        metrics.append(
            FoldMetrics(
                fold=f,
                auc=auc(y[test_idx], sc),
                accuracy=accuracy(y[test_idx], sc),
                n_test=int(test_idx.size),
            )
        )
        curves.append(roc_points(y[test_idx], sc))
        if f == 0:
            for i in cols:
                cat = fm.metas[i].category
                selection_counts[cat] = selection_counts.get(cat, 0) + 1
        if config.compute_shap:
            att = tree_shap(model, X_test)
            phi_full[np.ix_(test_idx, cols)] = att.phi
            resid = np.abs(att.base + att.phi.sum(axis=1) - att.prediction)
            residual_max = max(residual_max, float(resid.max()))

    summary = None
    beeswarm = None
    if config.compute_shap:
        summary = aggregate(phi_full, fm.metas)
        k = min(config.beeswarm_k, d)
        top = np.argsort(-summary.mean_abs, kind="stable")[:k]
        beeswarm = BeeswarmData(
            feature_ids=top.astype(np.int64),
            names=[fm.metas[i].name for i in top],
            phi=phi_full[:, top],
            values=X[:, top],
            labels=y.copy(),
        )
    aucs = np.array([m.auc for m in metrics])
    accs = np.array([m.accuracy for m in metrics])
    grid, tpr_mean, tpr_sd = mean_roc(curves)
    return SubjectResult(
        subject_id=ts.subject_id,
        band=config.band,
        n_trials=n,
        folds=metrics,
        auc_mean=float(aucs.mean()),
        auc_sd=float(aucs.std()),
        acc_mean=float(accs.mean()),
        acc_sd=float(accs.std()),
        roc_grid=grid,
        roc_tpr_mean=tpr_mean,
        roc_tpr_sd=tpr_sd,
        scores=scores_all,
        selection_counts=selection_counts,
        summary=summary,
        beeswarm=beeswarm,
        local_accuracy_max=residual_max if config.compute_shap else None,
    )


def fold_artifacts(
    ts: TrialSet, config: PipelineConfig, subject_index: int = 0, fold: int = 0
) -> tuple[_forest.ForestModel, FeatureMatrix]:
    """Reproduce one fold's trained model for artifact export.

    Re-derives the same fold split, selection plan, and forest seed
    as :func:`run_within_subject`, so the returned model is the one
    that scored that fold. Also returns the feature matrix restricted
    to the selected columns (all trials), with metadata ids renumbered
    to the new column positions.
    """
    config.validate()
    fm = extract_subject(ts, config.bands_tuple())
    X = fm.values
    y = fm.labels.astype(np.int64)
    n = X.shape[0]
    folds = stratified_kfold(
        y, config.n_folds, _derive_seed(config.seed, subject_index, _SALT_FOLDS)
    )
    if not 0 <= fold < len(folds):
        raise ValueError(f"fold {fold} out of range for {len(folds)} folds")
    test_idx = folds[fold]
    train_idx = np.setdiff1d(np.arange(n), test_idx, assume_unique=True)
    plan = select(X[train_idx], y[train_idx], fm.metas, config.effective_budget())
    cols = plan.selected_ids
    fcfg = config.forest_config(
        _derive_seed(config.seed, subject_index, _SALT_FOREST, fold)
    )
    model = _forest.fit(X[np.ix_(train_idx, cols)], y[train_idx], fcfg)
    sub_metas = [replace(fm.metas[j], id=i) for i, j in enumerate(cols)]
    selected = FeatureMatrix(
        values=X[:, cols].copy(),
        metas=sub_metas,
        labels=fm.labels.copy(),
        config=fm.config,
        degenerate_counts=fm.degenerate_counts[cols].copy(),
    )
    return model, selected


@dataclass(eq=False)
class WithinResult:
    subjects: list[SubjectResult]
    failures: list[tuple[str, str]]

    @property
    def auc_mean(self) -> float:
        return float(np.mean([s.auc_mean for s in self.subjects]))

    @property
    def acc_mean(self) -> float:
        return float(np.mean([s.acc_mean for s in self.subjects]))

    def to_jsonable(self):
        doc = {
            "scheme": "within",
            "subjects": [s.to_jsonable() for s in self.subjects],
            "failures": [{"subject_id": sid, "error": msg} for sid, msg in self.failures],
        }
        if self.subjects:
            doc["auc_mean"] = self.auc_mean
            doc["acc_mean"] = self.acc_mean
            doc["auc_sd"] = float(np.std([s.auc_mean for s in self.subjects]))
            if self.subjects[0].summary is not None:
                doc["attribution_mean"] = _mean_shares(
                    [s.summary for s in self.subjects]
                )
        return doc


def _mean_shares(summaries: list[AttributionSummary]) -> dict:
    out: dict[str, dict[str, float]] = {}
    for level in ("band_shares", "category_shares", "subtype_shares", "roi_shares"):
        tables = [getattr(s, level) for s in summaries]
        keys = list(tables[0].keys())
        out[level] = {
            k: float(np.mean([t[k] for t in tables])) for k in keys
        }
    return out


def _within_task(args):
    ts, config, index = args
    return run_within_subject(ts, config, index)


def run_within(dataset: list[TrialSet], config: PipelineConfig) -> WithinResult:
    """Within-subject CV over a whole dataset.

    Subjects are processed independently (in parallel when
    config.jobs > 1); a subject whose pipeline raises is skipped and
    reported in .failures instead of aborting the rest.
    """
    config.validate()
    args = [(ts, config, i) for i, ts in enumerate(dataset)]
    results: list[SubjectResult] = []
    failures: list[tuple[str, str]] = []
    if config.jobs > 1 and len(dataset) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            futures = [ex.submit(_within_task, a) for a in args]
            for ts, fut in zip(dataset, futures):
                try:
                    results.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - reported, not hidden
                    failures.append((ts.subject_id, str(exc)))
    else:
        for a in args:
            try:
                results.append(_within_task(a))
            except Exception as exc:  # noqa: BLE001
                failures.append((a[0].subject_id, str(exc)))
    return WithinResult(subjects=results, failures=failures)


@dataclass(frozen=True)
class LosoFold:
    subject_id: str
    auc: float
    accuracy: float
    n_test: int

    def to_jsonable(self):
        return {
            "subject_id": self.subject_id,
            "auc": self.auc,
            "accuracy": self.accuracy,
            "n_test": self.n_test,
        }


@dataclass(eq=False)
class LosoResult:
    folds: list[LosoFold]
    auc_mean: float
    auc_sd: float
    acc_mean: float
    acc_sd: float

    def to_jsonable(self):
        return {
            "scheme": "loso",
            "folds": [f.to_jsonable() for f in self.folds],
            "auc_mean": self.auc_mean,
            "auc_sd": self.auc_sd,
            "acc_mean": self.acc_mean,
            "acc_sd": self.acc_sd,
        }


def _extract_task(args):
    ts, bands = args
    return extract_subject(ts, bands)


def run_loso(dataset: list[TrialSet], config: PipelineConfig) -> LosoResult:
    """Leave-one-subject-out transfer: train on the pooled trials of
    all other subjects, score the held-out subject."""
    config.validate()
    if len(dataset) < 2:
        raise ValueError("LOSO needs at least two subjects")
    bands = config.bands_tuple()
    args = [(ts, bands) for ts in dataset]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            fms = list(ex.map(_extract_task, args))
    else:
        fms = [_extract_task(a) for a in args]
    budget = config.effective_budget()
    folds = []
    for held, ts in enumerate(dataset):
        X_tr = np.vstack([fms[i].values for i in range(len(dataset)) if i != held])
        y_tr = np.concatenate(
            [fms[i].labels for i in range(len(dataset)) if i != held]
        ).astype(np.int64)
        plan = select(X_tr, y_tr, fms[held].metas, budget)
        cols = plan.selected_ids
        model = _forest.fit(
            X_tr[:, cols],
            y_tr,
            config.forest_config(_derive_seed(config.seed, _SALT_LOSO, held)),
        )
        y_te = fms[held].labels.astype(np.int64)
        sc = _forest.predict_proba(model, fms[held].values[:, cols])[:, 1]
        folds.append(
            LosoFold(
                subject_id=ts.subject_id,
                auc=auc(y_te, sc),
                accuracy=accuracy(y_te, sc),
                n_test=int(y_te.size),
            )
        )
    aucs = np.array([f.auc for f in folds])
    accs = np.array([f.accuracy for f in folds])
    return LosoResult(
        folds=folds,
        auc_mean=float(aucs.mean()),
        auc_sd=float(aucs.std()),
        acc_mean=float(accs.mean()),
        acc_sd=float(accs.std()),
    )


@dataclass(eq=False)
class RoiGridResult:
    """Mean CV AUC per (region, band setting) for one subject.

    values is 16 x 6 in ROI_NAMES x GRID_BAND_ORDER order. Cells whose
    feature pool came up empty hold 0.5 and are listed in `flagged`.
    """

    subject_id: str
    roi_names: tuple[str, ...]
    band_order: tuple[str, ...]
    values: np.ndarray
    flagged: list[tuple[str, str]]

    def to_jsonable(self):
        return {
            "scheme": "roi-grid",
            "subject_id": self.subject_id,
            "roi_names": list(self.roi_names),
            "band_order": list(self.band_order),
            "values": [[float(v) for v in row] for row in self.values],
            "flagged": [{"roi": r, "band": b} for r, b in self.flagged],
        }


def roi_band_importance(
    ts: TrialSet, config: PipelineConfig, subject_index: int = 0
) -> RoiGridResult:
    """Decode with each region's own features, one band at a time.

    Every grid cell reruns the CV pipeline restricted to the
    channel-level and ROI-level features of that region alone
    (connectivity, asymmetry, and global columns are excluded), with
    the budget capped at the restricted pool size.
    """
    config.validate()
    fm = extract_subject(ts, BAND_NAMES)
    X = fm.values
    y = fm.labels.astype(np.int64)
    folds = stratified_kfold(
        y, config.n_folds, _derive_seed(config.seed, subject_index, _SALT_FOLDS)
    )
    values = np.zeros((len(ROI_NAMES), len(GRID_BAND_ORDER)))
    flagged = []
    for ri, roi in enumerate(ROI_NAMES):
        for bi, band in enumerate(GRID_BAND_ORDER):
            ids = [
                m.id
                for m in fm.metas
                if m.category in (CAT_SPATIAL, CAT_TEMPORAL)
                and m.roi_endpoints == (roi,)
                and (band == "multi" or m.band == band)
            ]
            if not ids:
                values[ri, bi] = 0.5
                flagged.append((roi, band))
                continue
            sub_metas = [replace(fm.metas[j], id=i) for i, j in enumerate(ids)]
            base_budget = config.budget
            if base_budget is None:
                base_budget = (
                    MULTI_BAND_BUDGET if band == "multi" else SINGLE_BAND_BUDGET
                )
            budget = min(base_budget, len(ids))
            Xs = X[:, ids]
            fold_aucs = []
            for f, test_idx in enumerate(folds):
                train_idx = np.setdiff1d(np.arange(y.size), test_idx, assume_unique=True)
                plan = select(Xs[train_idx], y[train_idx], sub_metas, budget)
                cols = plan.selected_ids
                model = _forest.fit(
                    Xs[np.ix_(train_idx, cols)],
                    y[train_idx],
                    config.forest_config(
                        _derive_seed(config.seed, subject_index, _SALT_GRID, ri, bi, f)
                    ),
                )
                sc = _forest.predict_proba(model, Xs[np.ix_(test_idx, cols)])[:, 1]
                fold_aucs.append(auc(y[test_idx], sc))
            values[ri, bi] = float(np.mean(fold_aucs))
    return RoiGridResult(
        subject_id=ts.subject_id,
        roi_names=ROI_NAMES,
        band_order=GRID_BAND_ORDER,
        values=values,
        flagged=flagged,
    )

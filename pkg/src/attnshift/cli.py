"""Command-line entry point wiring the pipeline into reproducible runs.

Four subcommands: `generate` writes a synthetic dataset, `run`
executes a decoding scheme end to end and writes a report bundle,
`explain` recomputes attributions for a saved model and feature
matrix, and `topomap` renders a region-value map from a JSON file.

Configuration is a key=value text file (# starts a comment); every
key has a default, so an empty or absent file runs the standard
15-subject multi-band within-subject experiment. The seed resolves
in precedence order: --seed flag, then the ATTNSHIFT_SEED environment
variable, then the config file. Exit codes: 0 success, 1 partial
failure (some subjects skipped), 2 usage or config error, 3 I/O or
format error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .evaluate import (
    GRID_BAND_ORDER,
    PipelineConfig,
    fold_artifacts,
    roi_band_importance,
    run_loso,
    run_within,
)
from .features import write_features
from .forest import load_model, save_model
from .montage import ROI_NAMES
from .report import TopomapSpec, render_shap_summary, render_topomap
from .shapx import aggregate, tree_shap
from .spectral import BAND_NAMES
from .synthgen import GenConfig, generate, read_dataset, write_dataset

__all__ = ["main"]

BAND_CHOICES = ("multi",) + BAND_NAMES
SCHEMES = ("within", "loso", "roi-grid")

CATEGORY_ORDER = ("global", "intra-roi-spatial", "intra-roi-temporal", "inter-roi")
SUBTYPE_ORDER = (
    "global-low-order",
    "roi-spatial-sd",
    "roi-spatial-range",
    "roi-low-order",
    "roi-high-order",
    "roi-window-low-order",
    "roi-temporal-dynamics",
    "connectivity",
    "hemispheric-asymmetry",
    "anterior-posterior-gradient",
)


class _ConfigError(Exception):
    """Bad usage or configuration; maps to exit code 2."""


class _DataError(Exception):
    """Unreadable or malformed input artifact; maps to exit code 3."""


def _config_defaults() -> dict:
    g = GenConfig()
    return {
        "dataset": "generate",
        "n_subjects": g.n_subjects,
        "trials_min": g.trials_min,
        "trials_max": g.trials_max,
        "class_balance": g.class_balance,
        "fs": g.fs,
        "duration_s": g.duration_s,
        "delta": g.delta,
        "signature_size": g.signature_size,
        "shared_signature": g.shared_signature,
        "band": "multi",
        "scheme": "within",
        "budget": "default",
        "n_folds": 3,
        "n_trees": 200,
        "max_depth": 10,
        "min_samples_split": 10,
        "seed": 0,
        "jobs": 1,
        "shap": True,
        "beeswarm_k": 20,
    }


def _coerce(key: str, raw: str, default) -> object:
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise _ConfigError(
            f"config field {key!r} has invalid value {raw!r}"
        ) from None


def parse_config_file(path) -> dict:
    """Parse a key=value config file into a fully defaulted dict."""
    cfg = _config_defaults()
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise _ConfigError(f"config line {lineno} is not key=value: {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in cfg:
            raise _ConfigError(f"unknown config field {key!r}")
        cfg[key] = _coerce(key, raw, cfg[key])
    return cfg


def resolve_config(args) -> dict:
    """Defaults, then config file, then environment, then flags."""
    if getattr(args, "config", None):
        config_path = Path(args.config)
        if not config_path.exists():
            raise _DataError(f"config file not found: {config_path}")
        cfg = parse_config_file(config_path)
    else:
        cfg = _config_defaults()
    env_seed = os.environ.get("ATTNSHIFT_SEED")
    if env_seed is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError:
            raise _ConfigError(
                f"ATTNSHIFT_SEED is not an integer: {env_seed!r}"
            ) from None
    for key in ("seed", "band", "scheme", "jobs"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["band"] not in BAND_CHOICES:
        raise _ConfigError(f"config field 'band' has invalid value {cfg['band']!r}")
    if cfg["scheme"] not in SCHEMES:
        raise _ConfigError(f"config field 'scheme' has invalid value {cfg['scheme']!r}")
    return cfg


def _gen_config(cfg: dict) -> GenConfig:
    g = GenConfig(
        n_subjects=cfg["n_subjects"],
        trials_min=cfg["trials_min"],
        trials_max=cfg["trials_max"],
        class_balance=cfg["class_balance"],
        fs=cfg["fs"],
        duration_s=cfg["duration_s"],
        delta=cfg["delta"],
        signature_size=cfg["signature_size"],
        seed=cfg["seed"],
        shared_signature=cfg["shared_signature"],
    )
    try:
        g.validate()
    except ValueError as exc:
        raise _ConfigError(str(exc)) from None
    return g


def _pipeline_config(cfg: dict) -> PipelineConfig:
    budget = cfg["budget"]
    if budget == "default":
        budget = None
    else:
        try:
            budget = int(budget)
        except ValueError:
            raise _ConfigError(
                f"config field 'budget' has invalid value {cfg['budget']!r}"
            ) from None
    p = PipelineConfig(
        band=cfg["band"],
        n_folds=cfg["n_folds"],
        budget=budget,
        n_trees=cfg["n_trees"],
        max_depth=cfg["max_depth"],
        min_samples_split=cfg["min_samples_split"],
        seed=cfg["seed"],
        jobs=cfg["jobs"],
        compute_shap=cfg["shap"],
        beeswarm_k=cfg["beeswarm_k"],
    )
    try:
        p.validate()
    except ValueError as exc:
        raise _ConfigError(str(exc)) from None
    return p


def _load_dataset(cfg: dict, inp):
    source = inp if inp is not None else cfg["dataset"]
    if source == "generate" and inp is None:
        return generate(_gen_config(cfg))
    try:
        return read_dataset(source)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise _DataError(f"cannot read dataset at {source}: {exc}") from None


def _echo_config(cfg: dict) -> dict:
    # jobs schedules work but never changes results, so it stays out
    # of the echo; report bytes stay comparable across worker counts
    return {k: cfg[k] for k in sorted(cfg) if k != "jobs"}


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _md_table(header: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |"]
    lines.append("|" + "|".join(" --- " for _ in header) + "|")
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def _share_table(title: str, order, shares: dict) -> str:
    rows = [[name, f"{shares.get(name, 0.0):.3f}"] for name in order]
    return f"# {title}\n\n" + _md_table(["name", "share"], rows)


def _write_attribution_tables(out: Path, mean_shares: dict) -> None:
    bands = mean_shares["band_shares"]
    (out / "attribution_bands.md").write_text(
        _share_table("Attribution share by band", BAND_NAMES, bands)
    )
    text = _share_table(
        "Attribution share by feature category",
        CATEGORY_ORDER,
        mean_shares["category_shares"],
    )
    text += "\n" + _share_table(
        "Attribution share by feature subtype",
        SUBTYPE_ORDER,
        mean_shares["subtype_shares"],
    )
    (out / "attribution_feature_types.md").write_text(text)
    (out / "attribution_rois.md").write_text(
        _share_table(
            "Attribution share by region", ROI_NAMES, mean_shares["roi_shares"]
        )
    )


def _check_normalized(shares: dict, what: str) -> None:
    total = sum(shares.values())
    assert abs(total - 1.0) <= 1e-9, f"{what} shares sum to {total}, not 1"


def cmd_generate(args) -> int:
    cfg = resolve_config(args)
    trialsets = generate(_gen_config(cfg))
    out = Path(args.out)
    try:
        write_dataset(out, trialsets, _gen_config(cfg))
    except OSError as exc:
        raise _DataError(f"cannot write dataset: {exc}") from None
    print(f"wrote {len(trialsets)} subjects to {out}")
    return 0


def _run_within(cfg: dict, dataset, out: Path) -> int:
    pcfg = _pipeline_config(cfg)
    res = run_within(dataset, pcfg)
    doc = {"config": _echo_config(cfg)}
    doc.update(res.to_jsonable())
    _write_json(out / "report.json", doc)

    rows = []
    for s in res.subjects:
        rows.append(
            [
                s.subject_id,
                str(s.n_trials),
                f"{s.acc_mean:.3f} +/- {s.acc_sd:.3f}",
                f"{s.auc_mean:.3f} +/- {s.auc_sd:.3f}",
            ]
        )
    if res.subjects:
        rows.append(
            ["mean", "", f"{res.acc_mean:.3f}", f"{res.auc_mean:.3f}"]
        )
    (out / "metrics.md").write_text(
        f"# Decoding performance (within-subject, band: {cfg['band']})\n\n"
        + _md_table(["subject", "trials", "accuracy", "AUC"], rows)
    )

    if pcfg.compute_shap and res.subjects:
        mean_shares = res.to_jsonable()["attribution_mean"]
        for level, shares in mean_shares.items():
            _check_normalized(shares, level)
        _write_attribution_tables(out, mean_shares)
        figures = out / "figures"
        figures.mkdir(exist_ok=True)
        roi_shares = {
            name: mean_shares["roi_shares"].get(name, 0.0) for name in ROI_NAMES
        }
        svg = render_topomap(
            TopomapSpec(
                values=roi_shares,
                title="Mean attribution share by region",
                band=cfg["band"],
            )
        )
        (figures / "topomap_attribution.svg").write_text(svg)
        for s in res.subjects:
            bs = s.beeswarm
            svg = render_shap_summary(
                bs.phi,
                bs.values,
                bs.names,
                top_k=len(bs.names),
                title=f"{s.subject_id} attribution summary",
            )
            (figures / f"beeswarm_{s.subject_id}.svg").write_text(svg)

    models = out / "models"
    features_dir = out / "features"
    models.mkdir(exist_ok=True)
    features_dir.mkdir(exist_ok=True)
    failed = {sid for sid, _ in res.failures}
    for index, ts in enumerate(dataset):
        if ts.subject_id in failed:
            continue
        model, selected = fold_artifacts(ts, pcfg, index, fold=0)
        save_model(model, models / f"{ts.subject_id}.json")
        write_features(features_dir / ts.subject_id, selected)

    for sid, msg in res.failures:
        print(f"skipped {sid}: {msg}", file=sys.stderr)
    print(f"wrote report bundle to {out}")
    return 1 if res.failures else 0


def _run_loso(cfg: dict, dataset, out: Path) -> int:
    pcfg = _pipeline_config(cfg)
    try:
        res = run_loso(dataset, pcfg)
    except ValueError as exc:
        raise _ConfigError(str(exc)) from None
    doc = {"config": _echo_config(cfg)}
    doc.update(res.to_jsonable())
    _write_json(out / "report.json", doc)
    rows = [
        [f.subject_id, str(f.n_test), f"{f.accuracy:.3f}", f"{f.auc:.3f}"]
        for f in res.folds
    ]
    rows.append(
        [
            "mean",
            "",
            f"{res.acc_mean:.3f} +/- {res.acc_sd:.3f}",
            f"{res.auc_mean:.3f} +/- {res.auc_sd:.3f}",
        ]
    )
    (out / "metrics.md").write_text(
        f"# Decoding performance (leave-one-subject-out, band: {cfg['band']})\n\n"
        + _md_table(["held-out subject", "trials", "accuracy", "AUC"], rows)
    )
    print(f"wrote report bundle to {out}")
    return 0


def _run_roi_grid(cfg: dict, dataset, out: Path) -> int:
    pcfg = _pipeline_config(cfg)
    grids = [
        roi_band_importance(ts, pcfg, index) for index, ts in enumerate(dataset)
    ]
    mean_grid = np.mean([g.values for g in grids], axis=0)
    doc = {
        "config": _echo_config(cfg),
        "scheme": "roi-grid",
        "subjects": [g.to_jsonable() for g in grids],
        "roi_names": list(ROI_NAMES),
        "band_order": list(GRID_BAND_ORDER),
        "mean_values": [[float(v) for v in row] for row in mean_grid],
    }
    _write_json(out / "report.json", doc)

    rows = [
        [ROI_NAMES[i]] + [f"{mean_grid[i, j]:.3f}" for j in range(mean_grid.shape[1])]
        for i in range(mean_grid.shape[0])
    ]
    text = (
        "# Mean CV AUC by region and band\n\n"
        + _md_table(["region"] + list(GRID_BAND_ORDER), rows)
    )
    flagged = [(g.subject_id, r, b) for g in grids for r, b in g.flagged]
    if flagged:
        text += "\nEmpty feature pools (cell held at 0.5):\n"
        for sid, r, b in flagged:
            text += f"- {sid}: {r} / {b}\n"
    (out / "grid.md").write_text(text)

    figures = out / "figures"
    figures.mkdir(exist_ok=True)
    for j, band in enumerate(GRID_BAND_ORDER):
        values = {ROI_NAMES[i]: float(mean_grid[i, j]) for i in range(len(ROI_NAMES))}
        svg = render_topomap(
            TopomapSpec(
                values=values,
                title=f"Mean CV AUC by region ({band})",
                band=band,
            )
        )
        (figures / f"grid_{band}.svg").write_text(svg)
    print(f"wrote report bundle to {out}")
    return 0


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    dataset = _load_dataset(cfg, args.inp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg["scheme"] == "within":
        return _run_within(cfg, dataset, out)
    if cfg["scheme"] == "loso":
        return _run_loso(cfg, dataset, out)
    return _run_roi_grid(cfg, dataset, out)


def cmd_explain(args) -> int:
    from .features import read_features

    try:
        model = load_model(args.model)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise _DataError(f"cannot load model: {exc}") from None
    try:
        fm = read_features(args.features)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise _DataError(f"cannot load features: {exc}") from None
    if fm.n_features != model.n_features:
        raise _DataError(
            f"model expects {model.n_features} features, "
            f"matrix has {fm.n_features}"
        )

    att = tree_shap(model, fm.values)
    summary = aggregate(att.phi, fm.metas)
    for level in ("band_shares", "category_shares", "subtype_shares", "roi_shares"):
        _check_normalized(getattr(summary, level), level)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    residual = np.abs(att.base + att.phi.sum(axis=1) - att.prediction)
    doc = {
        "base": att.base,
        "local_accuracy_max": float(residual.max()),
        "n_trials": fm.n_trials,
        "n_features": fm.n_features,
        "attribution": summary.to_jsonable(),
    }
    _write_json(out / "attribution.json", doc)
    _write_attribution_tables(
        out,
        {
            "band_shares": summary.band_shares,
            "category_shares": summary.category_shares,
            "subtype_shares": summary.subtype_shares,
            "roi_shares": summary.roi_shares,
        },
    )

    k = min(args.topk, fm.n_features)
    order = np.argsort(-summary.mean_abs, kind="stable")[:k]
    names = [fm.metas[i].name for i in order]
    svg = render_shap_summary(
        att.phi[:, order],
        fm.values[:, order],
        names,
        top_k=k,
        title="attribution summary",
    )
    figures = out / "figures"
    figures.mkdir(exist_ok=True)
    (figures / "shap_summary.svg").write_text(svg)
    print(f"wrote attribution bundle to {out}")
    return 0


def cmd_topomap(args) -> int:
    try:
        values = json.loads(Path(args.inp).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise _DataError(f"cannot read values file: {exc}") from None
    if not isinstance(values, dict):
        raise _DataError("values file must be a JSON object of region: value")
    try:
        spec = TopomapSpec(
            values={str(k): float(v) for k, v in values.items()},
            title=args.title,
            band=args.band,
        )
        svg = render_topomap(spec)
    except (TypeError, ValueError) as exc:
        raise _DataError(str(exc)) from None
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    print(f"wrote {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attnshift",
        description="Interpretable decoding of attention-shift intent from EEG.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset directory")
    g.add_argument("--config", help="key=value config file")
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--seed", type=int, help="override the config seed")
    g.set_defaults(handler=cmd_generate)

    r = sub.add_parser("run", help="run a decoding scheme and write a report bundle")
    r.add_argument("--config", help="key=value config file")
    r.add_argument("--in", dest="inp", help="dataset directory (else generate)")
    r.add_argument("--out", required=True, help="report bundle directory")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--band", choices=BAND_CHOICES, help="band setting")
    r.add_argument("--scheme", choices=SCHEMES, help="evaluation scheme")
    r.add_argument("--jobs", type=int, help="worker processes")
    r.set_defaults(handler=cmd_run)

    e = sub.add_parser("explain", help="attribution tables for a saved model")
    e.add_argument("--model", required=True, help="model JSON path")
    e.add_argument("--features", required=True, help="feature matrix path prefix")
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--topk", type=int, default=20, help="beeswarm row count")
    e.set_defaults(handler=cmd_explain)

    t = sub.add_parser("topomap", help="render a region-value JSON file to SVG")
    t.add_argument("--in", dest="inp", required=True, help="JSON region: value map")
    t.add_argument("--out", required=True, help="output SVG path")
    t.add_argument("--title", default="", help="figure title")
    t.add_argument("--band", default="", help="band label")
    t.set_defaults(handler=cmd_topomap)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except _ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

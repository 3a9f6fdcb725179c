"""Command pipelines: train, evaluate, predict, synth.

All orchestration is deterministic given (config, seed): every random
stream is derived from the master seed with a fixed tag path, folds
and members run in a canonical order, and files carry no timestamps,
so reruns reproduce outputs byte for byte.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import sys
import time

import numpy as np

from .bayes import mc_predict_batch
from .config import RunConfig, adam_config, base_network_config, train_settings
from .data import (
    labels_to_ints,
    load_dataset,
    prepare_batch,
    read_pgm,
    resize,
    standardize,
    synth_generate,
    write_manifest,
    write_pgm,
)
from .ensemble import MemberPrediction, build_bank, fuse
from .metrics import (
    ConfusionCounts,
    binary_metrics,
    class_weights,
    cohen_kappa,
    confusion_matrix,
    kappa_uncertainty_table,
    multiclass_report,
    roc_curve_auc,
    stratified_folds,
)
from .nn import load_checkpoint, save_checkpoint
from .rng import derive
from .train import train_member
from .tree import DEFAULT_TREE, LABELS, combined_uncertainty, route_from_decisions

# Binary class names per tree level (negative, positive).
LEVEL_CLASSES = (("CTL", "PNEU"), ("BAC", "VIR"), ("VIR_NO_COVID", "COVID"))

ENSEMBLE_MANIFEST = "ensemble.json"


def _progress(message: str) -> None:
    """Status line on stderr; output files stay byte-deterministic."""
    print(message, file=sys.stderr, flush=True)


def _load_images(cfg: RunConfig):
    if cfg.manifest:
        return load_dataset(cfg.manifest)
    return synth_generate(cfg.synth_n_per_class, cfg.synth_side, cfg.seed)


def _level_subset(y4: np.ndarray, level: int):
    """Indices belonging to a level and their binary labels.

    The label chain is ordered (CTL < BAC < VIR_NO_COVID < COVID), so
    level l covers classes >= l and its positive branch is >= l+1.
    """
    member = np.flatnonzero(y4 >= level)
    ybin = (y4[member] >= level + 1).astype(np.int64)
    return member, ybin


def _train_level_members(cfg: RunConfig, x, y4, train_idx, seed_tags, log_lines):
    """Train the member bank for every tree level on train_idx."""
    bank = build_bank(base_network_config(cfg), cfg.kernel_sizes)
    adam = adam_config(cfg)
    levels = []
    for level, (node_name, _) in enumerate(DEFAULT_TREE.levels):
        member_local, ybin_local = _level_subset(y4[train_idx], level)
        sub = train_idx[member_local]
        weights = class_weights(ybin_local, 2)
        settings = train_settings(cfg, level)
        members = []
        for net_cfg in bank:
            seed = derive(cfg.seed, "train", *seed_tags, node_name, net_cfg.kernel_size)
            pset, history = train_member(
                net_cfg,
                x[sub],
                ybin_local,
                settings=settings,
                adam_cfg=adam,
                rng_seed=seed,
                class_weight_vec=weights,
            )
            for row in history:
                line = (
                    f"level {level + 1} ({node_name}) member k={net_cfg.kernel_size} "
                    f"epoch {row['epoch']}/{settings.epochs} loss {row['loss']:.6f}"
                )
                if "val_loss" in row:
                    line += f" val_loss {row['val_loss']:.6f} val_acc {row['val_acc']:.4f}"
                log_lines.append(line)
            members.append((net_cfg, pset))
            _progress(
                f"trained {'/'.join(str(t) for t in seed_tags)} level {level + 1} "
                f"({node_name}) k={net_cfg.kernel_size}: "
                f"final loss {history[-1]['loss']:.6f}"
            )
        levels.append(members)
    return levels


def _level_decisions(cfg: RunConfig, levels_members, x_eval, seed_tags):
    """EnsembleDecision per (level, sample) for an evaluation batch."""
    decisions = []
    for level, members in enumerate(levels_members):
        node_name = DEFAULT_TREE.levels[level][0]
        member_dists = []
        for net_cfg, pset in members:
            seed = derive(cfg.seed, "mc", *seed_tags, node_name, net_cfg.kernel_size)
            member_dists.append(
                mc_predict_batch(net_cfg, pset, x_eval, T=cfg.mc_samples_t, rng_seed=seed)
            )
        level_dec = []
        for j in range(x_eval.shape[0]):
            preds = [
                MemberPrediction(
                    member_id=f"k{net_cfg.kernel_size}",
                    kernel_size=net_cfg.kernel_size,
                    mean_probs=dists[j].mean_probs,
                    uncertainties=dists[j].total_uncertainty,
                )
                for (net_cfg, _), dists in zip(members, member_dists)
            ]
            level_dec.append(fuse(preds))
        decisions.append(level_dec)
    return decisions


def _log_header(cfg: RunConfig):
    epoch_parts = " | ".join(
        f"level {i + 1} ({node}): {cfg.epochs[i]}"
        for i, (node, _) in enumerate(DEFAULT_TREE.levels)
    )
    return [
        f"seed {cfg.seed}",
        f"kernel bank: {','.join(str(k) for k in cfg.kernel_sizes)}",
        f"epochs per level: {epoch_parts}",
    ]


def cmd_synth(cfg: RunConfig) -> dict:
    """Write a synthetic PGM dataset plus manifest into out_dir."""
    cfg = cfg.validated()
    img_dir = os.path.join(cfg.out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    images = synth_generate(cfg.synth_n_per_class, cfg.synth_side, cfg.seed)
    records = []
    for img in images:
        rel = os.path.join("images", f"{img.source_id}.pgm")
        write_pgm(os.path.join(cfg.out_dir, rel), img.pixels)
        records.append((rel, img.label))
    manifest_path = os.path.join(cfg.out_dir, "manifest.csv")
    write_manifest(manifest_path, records)
    return {"manifest": manifest_path, "n_images": len(images)}


def cmd_train(cfg: RunConfig) -> dict:
    """Train the full bank on all data; write checkpoints + manifest."""
    cfg = cfg.validated()
    images = _load_images(cfg)
    x = prepare_batch(images, cfg.input_side)
    y4 = labels_to_ints(images)
    ckpt_dir = os.path.join(cfg.out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)

    log_lines = _log_header(cfg)
    levels = _train_level_members(cfg, x, y4, np.arange(len(images)), ("full",), log_lines)

    manifest = {
        "format_version": 1,
        "seed": cfg.seed,
        "mc_samples_t": cfg.mc_samples_t,
        "levels": [],
    }
    for level, members in enumerate(levels):
        node_name = DEFAULT_TREE.levels[level][0]
        entry = {"node": node_name, "members": []}
        for net_cfg, pset in members:
            rel = os.path.join(
                "checkpoints", f"level{level + 1}_k{net_cfg.kernel_size}.npz"
            )
            save_checkpoint(os.path.join(cfg.out_dir, rel), net_cfg, pset)
            entry["members"].append(
                {"kernel_size": net_cfg.kernel_size, "checkpoint": rel}
            )
        manifest["levels"].append(entry)

    manifest_path = os.path.join(cfg.out_dir, ENSEMBLE_MANIFEST)
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log_path = os.path.join(cfg.out_dir, "train_log.txt")
    with open(log_path, "w") as fh:
        fh.write("\n".join(log_lines) + "\n")
    return {"manifest": manifest_path, "log": log_path, "n_checkpoints": sum(len(m) for m in levels)}


def _load_trained(cfg: RunConfig):
    """Reload (net_cfg, pset) members per level from out_dir."""
    manifest_path = os.path.join(cfg.out_dir, ENSEMBLE_MANIFEST)
    if not os.path.exists(manifest_path):
        raise ValueError(f"no trained ensemble found at {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    levels = []
    for entry in manifest["levels"]:
        members = []
        for member in entry["members"]:
            path = os.path.join(cfg.out_dir, member["checkpoint"])
            members.append(load_checkpoint(path))
        levels.append(members)
    return levels, manifest


def _fnum(value) -> str:
    return "" if value is None else repr(float(value))


def _agg(values):
    """Mean and spread across folds, ignoring absent entries."""
    present = [v for v in values if v is not None]
    if not present:
        return None, None
    mean = float(np.mean(present))
    std = float(np.std(present, ddof=1)) if len(present) > 1 else 0.0
    return mean, std


def _pct_pair(mean, std) -> str:
    return "" if mean is None else f"{mean * 100:.2f} ± {std * 100:.2f}"


def _plain_pair(mean, std) -> str:
    return "" if mean is None else f"{mean:.4f} ± {std:.4f}"


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


METRIC_COLUMNS = ("acc", "sens", "spec", "prec", "auc_balanced", "f1", "roc_auc", "kappa")
PERCENT_COLUMNS = ("acc", "sens", "spec", "prec", "auc_balanced", "f1")


def cmd_evaluate(cfg: RunConfig) -> dict:
    """Stratified-CV evaluation; emits metrics, ROC, kappa-uncertainty
    and confusion CSVs into out_dir and returns a summary."""
    started = time.monotonic()
    cfg = cfg.validated()
    os.makedirs(cfg.out_dir, exist_ok=True)
    images = _load_images(cfg)
    x = prepare_batch(images, cfg.input_side)
    y4 = labels_to_ints(images)
    try:
        plan = stratified_folds(y4, cfg.n_folds, derive(cfg.seed, "folds"))
    except ValueError as exc:
        raise ValueError(f"fold construction failed: {exc}") from None

    level_names = [node for node, _ in DEFAULT_TREE.levels]
    n_levels = len(level_names)
    # fold -> classifier -> MetricReport; plus diagram/ROC/confusion rows
    fold_reports = {name: [] for name in level_names + ["multiclass"]}
    level_fold_u = [[] for _ in range(n_levels)]
    diagram = {name: [] for name in level_names + ["multiclass"]}
    roc_rows = []
    confusion_rows = []
    log_lines = _log_header(cfg)

    for fold in range(cfg.n_folds):
        train_idx, test_idx = plan.train_test(fold)
        log_lines.append(
            f"fold {fold}: {len(train_idx)} train / {len(test_idx)} test samples"
        )
        levels_members = _train_level_members(
            cfg, x, y4, train_idx, (f"fold{fold}",), log_lines
        )
        decisions = _level_decisions(cfg, levels_members, x[test_idx], (f"fold{fold}",))
        y_test = y4[test_idx]

        # Per-level binary reports on the level's own true subset.
        pos_share = np.empty((n_levels, len(test_idx)))
        for level in range(n_levels):
            for j in range(len(test_idx)):
                s = decisions[level][j].scores
                pos_share[level, j] = s[1] / (s[0] + s[1])
            rel, ytrue = _level_subset(y_test, level)
            ypred = np.array([decisions[level][j].label for j in rel], dtype=np.int64)
            report = binary_metrics(ConfusionCounts.from_pairs(ytrue, ypred))
            points, auc = roc_curve_auc(
                [(pos_share[level, j], yt) for j, yt in zip(rel, ytrue)]
            )
            kappa = cohen_kappa(confusion_matrix(ytrue, ypred, 2))
            report = dataclasses.replace(report, roc_auc=auc, kappa=kappa)
            fold_reports[level_names[level]].append(report)
            for fpr, tpr, thr in points:
                roc_rows.append(
                    [level_names[level], str(fold), _fnum(fpr), _fnum(tpr), _fnum(thr)]
                )
            level_u = float(
                np.mean(
                    [
                        decisions[level][j].ensemble_uncertainty[decisions[level][j].label]
                        for j in rel
                    ]
                )
            )
            level_fold_u[level].append(level_u)
            diagram[level_names[level]].append((kappa, level_u))

        # Tree routing for the multiclass view.
        routes = [
            route_from_decisions([decisions[l][j] for l in range(n_levels)], DEFAULT_TREE)
            for j in range(len(test_idx))
        ]
        label_index = {label: i for i, label in enumerate(LABELS)}
        ypred4 = np.array([label_index[r.final_label] for r in routes], dtype=np.int64)
        conf4 = confusion_matrix(y_test, ypred4, len(LABELS))
        for ti, true_label in enumerate(LABELS):
            for pi, pred_label in enumerate(LABELS):
                confusion_rows.append(
                    [str(fold), true_label, pred_label, str(int(conf4[ti, pi]))]
                )
        macro, _ = multiclass_report(conf4)

        # One-vs-rest ROC from the chained level scores.
        chain = np.empty((len(test_idx), len(LABELS)))
        s1, s2, s3 = pos_share
        chain[:, 0] = 1.0 - s1
        chain[:, 1] = s1 * (1.0 - s2)
        chain[:, 2] = s1 * s2 * (1.0 - s3)
        chain[:, 3] = s1 * s2 * s3
        ovr_aucs = []
        for c, label in enumerate(LABELS):
            points, auc = roc_curve_auc(
                [(chain[j, c], int(y_test[j] == c)) for j in range(len(test_idx))]
            )
            ovr_aucs.append(auc)
            for fpr, tpr, thr in points:
                roc_rows.append(
                    [f"multiclass_{label}", str(fold), _fnum(fpr), _fnum(tpr), _fnum(thr)]
                )
        macro = dataclasses.replace(macro, roc_auc=float(np.mean(ovr_aucs)))
        fold_reports["multiclass"].append(macro)

        # Fig-6-style multiclass point: the level uncertainties of this
        # fold combined in quadrature, against the multiclass kappa.
        u_fold = [level_fold_u[level][fold] for level in range(n_levels)]
        u_multi = combined_uncertainty(u_fold, DEFAULT_TREE.sensitivities)
        diagram["multiclass"].append((macro.kappa, u_multi))
        fold_line = (
            f"fold {fold}: multiclass acc {macro.acc:.4f} kappa {macro.kappa:.4f} "
            f"combined uncertainty {u_multi:.6f}"
        )
        log_lines.append(fold_line)
        _progress(fold_line)

    # metrics.csv: per-fold rows plus one aggregate row per classifier.
    metric_rows = []
    for name in level_names + ["multiclass"]:
        for fold, report in enumerate(fold_reports[name]):
            metric_rows.append(
                [name, str(fold)] + [_fnum(getattr(report, col)) for col in METRIC_COLUMNS]
            )
        agg_cells = []
        for col in METRIC_COLUMNS:
            mean, std = _agg([getattr(r, col) for r in fold_reports[name]])
            agg_cells.append(
                _pct_pair(mean, std) if col in PERCENT_COLUMNS else _plain_pair(mean, std)
            )
        metric_rows.append([name, "aggregate"] + agg_cells)

    out = {}
    out["metrics"] = os.path.join(cfg.out_dir, "metrics.csv")
    _write_csv(out["metrics"], ["classifier", "fold"] + list(METRIC_COLUMNS), metric_rows)

    out["roc"] = os.path.join(cfg.out_dir, "roc.csv")
    _write_csv(out["roc"], ["classifier", "fold", "fpr", "tpr", "threshold"], roc_rows)

    points = kappa_uncertainty_table(diagram)
    out["kappa_uncertainty"] = os.path.join(cfg.out_dir, "kappa_uncertainty.csv")
    _write_csv(
        out["kappa_uncertainty"],
        ["classifier_id", "fold", "kappa", "uncertainty", "is_centroid"],
        [
            [p.classifier_id, str(p.fold), _fnum(p.kappa), _fnum(p.uncertainty),
             "true" if p.is_centroid else "false"]
            for p in points
        ],
    )

    out["confusion"] = os.path.join(cfg.out_dir, "confusion_multiclass.csv")
    _write_csv(out["confusion"], ["fold", "true_label", "pred_label", "count"], confusion_rows)

    out["log"] = os.path.join(cfg.out_dir, "eval_log.txt")
    with open(out["log"], "w") as fh:
        fh.write("\n".join(log_lines) + "\n")

    summary = {
        "paths": out,
        "multiclass_acc_mean": _agg([r.acc for r in fold_reports["multiclass"]])[0],
        "level_balanced_acc_mean": {
            name: _agg([r.auc_balanced for r in fold_reports[name]])[0]
            for name in level_names
        },
        "elapsed_seconds": time.monotonic() - started,
    }
    return summary


def cmd_predict(cfg: RunConfig, image_paths) -> dict:
    """Route images through a trained ensemble; write predictions.csv."""
    cfg = cfg.validated()
    levels_members, _ = _load_trained(cfg)
    input_side = levels_members[0][0][0].input_side

    header = ["path", "label"]
    for level in range(len(levels_members)):
        header += [
            f"level{level + 1}_class",
            f"level{level + 1}_uncertainty",
            f"level{level + 1}_score_neg",
            f"level{level + 1}_score_pos",
        ]
    header += ["combined_uncertainty", "error"]

    rows = []
    for path in image_paths:
        try:
            pixels = read_pgm(path)
            sample = standardize(resize(pixels, input_side))
            xb = sample[None, :, :, None].astype(np.float32)
            decisions = []
            for level, members in enumerate(levels_members):
                node_name = DEFAULT_TREE.levels[level][0]
                preds = []
                for net_cfg, pset in members:
                    seed = derive(cfg.seed, "predict", path, node_name, net_cfg.kernel_size)
                    dist = mc_predict_batch(
                        net_cfg, pset, xb, T=cfg.mc_samples_t, rng_seed=seed
                    )[0]
                    preds.append(
                        MemberPrediction(
                            member_id=f"k{net_cfg.kernel_size}",
                            kernel_size=net_cfg.kernel_size,
                            mean_probs=dist.mean_probs,
                            uncertainties=dist.total_uncertainty,
                        )
                    )
                decisions.append(fuse(preds))
            route = route_from_decisions(decisions, DEFAULT_TREE)
            cells = [path, route.final_label]
            for level in range(len(levels_members)):
                if level < len(route.steps):
                    _, decision, level_u = route.steps[level]
                    cells += [
                        LEVEL_CLASSES[level][decision.label],
                        _fnum(level_u),
                        _fnum(decision.scores[0]),
                        _fnum(decision.scores[1]),
                    ]
                else:
                    cells += ["", "", "", ""]
            cells += [_fnum(route.combined_uncertainty), ""]
            rows.append(cells)
        except (ValueError, OSError) as exc:
            rows.append([path, ""] + [""] * (4 * len(levels_members)) + ["", str(exc)])

    out_path = os.path.join(cfg.out_dir, "predictions.csv")
    _write_csv(out_path, header, rows)
    return {"predictions": out_path, "n_rows": len(rows)}

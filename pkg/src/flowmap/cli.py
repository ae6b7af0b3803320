"""Command-line pipeline: synth, ingest, split, train, embed, explain, eval, export-plot.

Each command validates its inputs, reads/writes plain CSV/JSON artifacts,
and is idempotent for a fixed seed. Configuration is a plain-text file
with bracketed sections; unknown sections or keys are rejected. A single
top-level seed (overridable with ``--seed``) feeds every random choice.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric failure.
Failures print a one-line JSON error object to stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import explain as xp
from . import graphbuild as gb
from . import ingest as ing
from . import metrics as mx
from . import model as mdl
from . import synthgen as sg
from . import training as tr
from . import viz
from .errors import ConfigError, DataError, FlowmapError
from .featurize import PortVocabulary, load_vocabulary

PARTITIONS = gb.PARTITION_NAMES

_PROFILE_FIELDS = ("pkt_rate", "size_log_mean", "size_log_sigma", "duration_mean", "reverse_frac")

# (type, default) per key; None default means "no value unless configured".
CONFIG_SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "pipeline": {"seed": (int, 7)},
    "synth": {
        "preset": (str, "static"),
        "n_devices": (int, 40),
        "horizon": (float, 600.0),
        "flows_benign": (int, 700),
        "flows_dos": (int, 500),
        "flows_mirai_like": (int, 400),
        "flows_recon": (int, 400),
        "mimicry": (str, ""),
    },
    "ingest": {"input": (str, ""), "sort": (bool, False), "slack": (float, 0.0)},
    "featurize": {"vocab": (str, "")},
    "model": {
        "variant": (str, "cls"),
        "gin_layers": (int, 2),
        "hidden_dim": (int, 64),
        "edge_latent_dim": (int, 64),
        "low_dim": (int, 2),
        "mlp_depth": (int, 2),
        "row_norm": (bool, True),
        "kernel_a": (float, 0.0),
        "kernel_b": (float, 0.0),
        "lambda_task": (float, 1.0),
        "lambda_topo": (float, 1.0),
        "gamma_pos": (float, 0.0),
        "gamma_neg": (float, 4.0),
    },
    "train": {
        "epochs": (int, 200),
        "learning_rate": (float, 1e-3),
        "beta1": (float, 0.9),
        "beta2": (float, 0.999),
        "adam_eps": (float, 1e-8),
        "neg_ratio": (int, 5),
        "min_dist": (float, 0.1),
        "spread": (float, 1.0),
        "resample_pairs": (bool, True),
    },
    "explain": {
        "samples": (int, 2000),
        "background": (int, 100),
        "grouped": (bool, True),
        "entities": (int, 8),
        "entity_type": (str, "flow"),
        "partition": (str, "testA"),
    },
    "eval": {"partitions": (str, "train,testA,testB,testC")},
    "export": {"formats": (str, "svg,csv")},
}
for _cls in sg.CLASS_ORDER:
    for _field in _PROFILE_FIELDS:
        CONFIG_SCHEMA["synth"][f"{_cls}.{_field}"] = (float, None)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


class PipelineConfig:
    """Typed view over the sectioned plain-text configuration."""

    def __init__(self, values: dict[tuple[str, str], object], explicit: list[tuple[str, str]]):
        self._values = values
        self._explicit = explicit

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        values: dict[tuple[str, str], object] = {}
        explicit: list[tuple[str, str]] = []
        for section in parser.sections():
            if section not in CONFIG_SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in CONFIG_SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                kind, _ = CONFIG_SCHEMA[section][key]
                try:
                    value = _parse_bool(raw) if kind is bool else kind(raw)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
                values[(section, key)] = value
                explicit.append((section, key))
        return cls(values, explicit)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        return cls.from_text(text)

    @classmethod
    def defaults(cls) -> "PipelineConfig":
        return cls({}, [])

    def get(self, section: str, key: str):
        if (section, key) in self._values:
            return self._values[(section, key)]
        return CONFIG_SCHEMA[section][key][1]

    def set(self, section: str, key: str, value) -> None:
        if (section, key) not in self._values:
            self._explicit.append((section, key))
        self._values[(section, key)] = value

    def dumps(self) -> str:
        """Canonical serialization of the explicitly configured entries."""
        by_section: dict[str, list[str]] = {}
        for section in CONFIG_SCHEMA:
            keys = [k for s, k in self._explicit if s == section]
            if keys:
                ordered = [k for k in CONFIG_SCHEMA[section] if k in keys]
                by_section[section] = ordered
        out = io.StringIO()
        for section, keys in by_section.items():
            out.write(f"[{section}]\n")
            for key in keys:
                value = self._values[(section, key)]
                rendered = str(value).lower() if isinstance(value, bool) else repr(value) if isinstance(value, float) else str(value)
                out.write(f"{key} = {rendered}\n")
            out.write("\n")
        return out.getvalue()


def _scenario_from_config(cfg: PipelineConfig, seed: int) -> sg.ScenarioConfig:
    preset = cfg.get("synth", "preset")
    if preset == "static":
        scenario = sg.ScenarioConfig(seed=seed)
    elif preset == "drift":
        scenario = sg.drift_scenario(seed=seed)
    else:
        raise ConfigError(f"unknown synth preset {preset!r}")
    scenario = replace(
        scenario,
        n_devices=cfg.get("synth", "n_devices"),
        horizon=cfg.get("synth", "horizon"),
        flow_counts={
            name: cfg.get("synth", f"flows_{name}") for name in sg.CLASS_ORDER
        },
    )
    mimicry = cfg.get("synth", "mimicry")
    if mimicry:
        parts = mimicry.split(":")
        if parts[0] == "constant" and len(parts) == 2:
            scenario = replace(scenario, mimicry=sg.MimicrySchedule("constant", value=float(parts[1])))
        elif parts[0] == "ramp" and len(parts) == 3:
            scenario = replace(
                scenario, mimicry=sg.MimicrySchedule("ramp", start=float(parts[1]), end=float(parts[2]))
            )
        else:
            raise ConfigError(f"bad mimicry spec {mimicry!r} (use constant:V or ramp:START:END)")
    profiles = dict(scenario.profiles)
    for cls_name in sg.CLASS_ORDER:
        overrides = {}
        for field in _PROFILE_FIELDS:
            value = cfg.get("synth", f"{cls_name}.{field}")
            if value is not None:
                overrides[field] = value
        if overrides:
            profiles[cls_name] = replace(profiles[cls_name], **overrides)
    return replace(scenario, profiles=profiles)


def _model_config(cfg: PipelineConfig) -> mdl.ModelConfig:
    kernel_a = cfg.get("model", "kernel_a") or None
    kernel_b = cfg.get("model", "kernel_b") or None
    return mdl.ModelConfig(
        variant=cfg.get("model", "variant"),
        gin_layers=cfg.get("model", "gin_layers"),
        hidden_dim=cfg.get("model", "hidden_dim"),
        edge_latent_dim=cfg.get("model", "edge_latent_dim"),
        low_dim=cfg.get("model", "low_dim"),
        mlp_depth=cfg.get("model", "mlp_depth"),
        row_norm=cfg.get("model", "row_norm"),
        kernel_a=kernel_a,
        kernel_b=kernel_b,
        lambda_task=cfg.get("model", "lambda_task"),
        lambda_topo=cfg.get("model", "lambda_topo"),
        gamma_pos=cfg.get("model", "gamma_pos"),
        gamma_neg=cfg.get("model", "gamma_neg"),
    )


def _train_config(cfg: PipelineConfig, seed: int) -> tr.TrainConfig:
    return tr.TrainConfig(
        epochs=cfg.get("train", "epochs"),
        learning_rate=cfg.get("train", "learning_rate"),
        beta1=cfg.get("train", "beta1"),
        beta2=cfg.get("train", "beta2"),
        adam_eps=cfg.get("train", "adam_eps"),
        neg_ratio=cfg.get("train", "neg_ratio"),
        seed=seed,
        min_dist=cfg.get("train", "min_dist"),
        spread=cfg.get("train", "spread"),
        resample_pairs=cfg.get("train", "resample_pairs"),
    )


def _vocab(cfg: PipelineConfig) -> PortVocabulary:
    path = cfg.get("featurize", "vocab")
    return load_vocabulary(path) if path else PortVocabulary.default()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_input(args, cfg: Optional[PipelineConfig] = None) -> str:
    """Resolve the command's input path; only ingest may take it from config."""
    if getattr(args, "input", None):
        return args.input
    if cfg is not None:
        configured = cfg.get("ingest", "input")
        if configured:
            return configured
    raise ConfigError("no input path given (use --input)")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args, cfg: PipelineConfig, seed: int) -> None:
    scenario = _scenario_from_config(cfg, seed)
    events = sg.generate(scenario)
    out = _out_dir(args)
    ing.write_packets_csv(events, out / "stream.csv")
    print(f"wrote {len(events)} packet events to {out / 'stream.csv'}")


def cmd_ingest(args, cfg: PipelineConfig, seed: int) -> None:
    path = _require_input(args, cfg)
    events = ing.read_packets_jsonl(path) if str(path).endswith(".jsonl") else ing.read_packets_csv(path)
    if args.sort or cfg.get("ingest", "sort"):
        events.sort(key=lambda e: e.ts)
    records = list(ing.segment_stream(events, slack=cfg.get("ingest", "slack")))
    records.sort(key=lambda r: r.t_start)
    out = _out_dir(args)
    ing.write_flows_csv(records, out / "flows.csv")
    print(f"wrote {len(records)} flows to {out / 'flows.csv'}")


def cmd_split(args, cfg: PipelineConfig, seed: int) -> None:
    path = _require_input(args)
    flows = ing.read_flows_csv(path)
    flows.sort(key=lambda r: r.t_start)
    vocab = _vocab(cfg)
    parts = gb.split_flows(flows)
    out = _out_dir(args)
    for name, chunk in parts.items():
        snap = gb.build_snapshot(chunk, vocab)
        gb.save_snapshot(snap, out / name, vocab)
    sizes = {name: len(chunk) for name, chunk in parts.items()}
    print(f"wrote snapshots {sizes} under {out}")


def cmd_train(args, cfg: PipelineConfig, seed: int) -> None:
    split_dir = Path(_require_input(args))
    snapshot = gb.load_snapshot(split_dir / "train")
    params, history = tr.train(snapshot, _model_config(cfg), _train_config(cfg, seed))
    out = _out_dir(args)
    mdl.save_checkpoint(params, out / "checkpoint.json")
    tr.write_history_csv(history, out / "history.csv")
    print(
        f"trained {params.config.variant} for {len(history)} epochs; "
        f"final loss {history[-1].total:.4f}; checkpoint at {out / 'checkpoint.json'}"
    )


EMBED_CSV_FIELDS = ("entity_type", "id", "dim1", "dim2", "true_label", "pred_label", "partition")


def _write_embeddings_csv(path, snapshot: gb.GraphSnapshot, result: tr.EmbedResult, partition: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EMBED_CSV_FIELDS)
        for i in range(snapshot.n_nodes):
            true = snapshot.node_labels[i] if snapshot.node_labels else ""
            writer.writerow(
                [
                    "device",
                    ing.ip_text(snapshot.node_ids[i]),
                    repr(float(result.node_coords[i, 0])),
                    repr(float(result.node_coords[i, 1])),
                    true,
                    "",
                    partition,
                ]
            )
        for k in range(snapshot.n_edges):
            true = snapshot.edge_labels[k] if snapshot.edge_labels else ""
            pred = result.pred_labels[k] if result.pred_labels else ""
            writer.writerow(
                [
                    "flow",
                    f"e{k}",
                    repr(float(result.edge_coords[k, 0])),
                    repr(float(result.edge_coords[k, 1])),
                    true,
                    pred,
                    partition,
                ]
            )


def _read_embeddings_csv(path) -> dict[str, list[dict]]:
    rows: list[dict] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(EMBED_CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"embeddings CSV missing columns: {sorted(missing)}")
        rows = list(reader)
    grouped: dict[str, list[dict]] = {}
    for row in rows:
        grouped.setdefault(row["entity_type"], []).append(row)
    return grouped


def _partition_list(cfg: PipelineConfig) -> list[str]:
    names = [p.strip() for p in str(cfg.get("eval", "partitions")).split(",") if p.strip()]
    for name in names:
        if name not in PARTITIONS:
            raise ConfigError(f"unknown partition {name!r}")
    return names


def cmd_embed(args, cfg: PipelineConfig, seed: int) -> None:
    split_dir = Path(_require_input(args))
    params = mdl.load_checkpoint(args.checkpoint)
    out = _out_dir(args)
    for name in _partition_list(cfg):
        snapshot = gb.load_snapshot(split_dir / name)
        result = tr.embed(snapshot, params)
        _write_embeddings_csv(out / f"embeddings_{name}.csv", snapshot, result, name)
    print(f"wrote embeddings for {_partition_list(cfg)} under {out}")


def cmd_explain(args, cfg: PipelineConfig, seed: int) -> None:
    split_dir = Path(_require_input(args))
    params = mdl.load_checkpoint(args.checkpoint)
    vocab = _vocab(cfg)
    train_snap = gb.load_snapshot(split_dir / "train")
    partition = cfg.get("explain", "partition")
    if partition not in PARTITIONS:
        raise ConfigError(f"unknown partition {partition!r}")
    target_snap = gb.load_snapshot(split_dir / partition)

    entity_type = cfg.get("explain", "entity_type")
    if entity_type not in ("flow", "device"):
        raise ConfigError(f"entity_type must be 'flow' or 'device', got {entity_type!r}")
    n_entities = cfg.get("explain", "entities")
    n_background = cfg.get("explain", "background")
    n_samples = cfg.get("explain", "samples")
    grouped = cfg.get("explain", "grouped")

    rng = np.random.default_rng(seed)
    coord_model = xp.CoordinateModel(params, target_snap)
    results: list[xp.AttributionResult] = []
    if entity_type == "flow":
        pool = train_snap.edge_feat
        background = pool[rng.choice(len(pool), size=min(n_background, len(pool)), replace=False)]
        groups = xp.FeatureGroups.edge_groups(vocab, grouped=grouped)
        total = target_snap.n_edges
        picks = rng.choice(total, size=min(n_entities, total), replace=False)
        for k in sorted(int(v) for v in picks):
            entity_rng = np.random.default_rng(np.random.SeedSequence((seed, 1, k)))
            label = target_snap.edge_labels[k] if target_snap.edge_labels else None
            results.append(
                xp.mc_shap(
                    coord_model.edge_fn(k),
                    target_snap.edge_feat[k],
                    background,
                    groups,
                    n_samples,
                    entity_rng,
                    entity_id=f"e{k}",
                    entity_type="flow",
                    label=label,
                )
            )
    else:
        pool = train_snap.node_feat
        background = pool[rng.choice(len(pool), size=min(n_background, len(pool)), replace=False)]
        groups = xp.FeatureGroups.node_groups()
        total = target_snap.n_nodes
        picks = rng.choice(total, size=min(n_entities, total), replace=False)
        for i in sorted(int(v) for v in picks):
            entity_rng = np.random.default_rng(np.random.SeedSequence((seed, 2, i)))
            label = target_snap.node_labels[i] if target_snap.node_labels else None
            results.append(
                xp.mc_shap(
                    coord_model.node_fn(i),
                    target_snap.node_feat[i],
                    background,
                    groups,
                    n_samples,
                    entity_rng,
                    entity_id=ing.ip_text(target_snap.node_ids[i]),
                    entity_type="device",
                    label=label,
                )
            )

    out = _out_dir(args)
    xp.write_attributions_csv(results, out / "attributions.csv")
    by_class: dict[str, list[xp.AttributionResult]] = {}
    for r in results:
        by_class.setdefault(r.label or "unlabeled", []).append(r)
    for axis, stem in ((0, "drivers_dim1"), (1, "drivers_dim2")):
        xp.write_driver_table_csv(xp.global_importance(by_class, axis), out / f"{stem}.csv")
    print(f"wrote attributions for {len(results)} entities under {out}")


def _validity_block(rows: list[dict], prefix: str) -> dict[str, float]:
    labeled = [r for r in rows if r["true_label"]]
    if not labeled or len({r["true_label"] for r in labeled}) < 2:
        return {}
    points = np.asarray([[float(r["dim1"]), float(r["dim2"])] for r in labeled])
    labels = [r["true_label"] for r in labeled]
    return {
        f"dbi_{prefix}": mx.davies_bouldin(points, labels),
        f"silhouette_{prefix}": mx.silhouette(points, labels),
    }


def cmd_eval(args, cfg: PipelineConfig, seed: int) -> None:
    embed_dir = Path(args.embeddings)
    baseline_dir = Path(args.baseline) if args.baseline else None
    report = mx.EvalReport()
    coords: dict[str, np.ndarray] = {}
    labels: dict[str, list[str]] = {}
    scores: dict[str, dict] = {}
    for name in _partition_list(cfg):
        path = embed_dir / f"embeddings_{name}.csv"
        if not path.exists():
            raise DataError(f"missing embeddings file {path}")
        grouped = _read_embeddings_csv(path)
        block: dict = {}
        for entity_key, entity_rows in (("edges", grouped.get("flow", [])), ("nodes", grouped.get("device", []))):
            entity_block = _validity_block(entity_rows, "model")
            if baseline_dir is not None:
                base_path = baseline_dir / f"embeddings_{name}.csv"
                if not base_path.exists():
                    raise DataError(f"missing baseline embeddings file {base_path}")
                base_rows = _read_embeddings_csv(base_path).get(
                    "flow" if entity_key == "edges" else "device", []
                )
                entity_block.update(_validity_block(base_rows, "baseline"))
            block[entity_key] = entity_block
        flows = grouped.get("flow", [])
        if flows and any(r["pred_label"] for r in flows):
            y_true = [r["true_label"] for r in flows]
            y_pred = [r["pred_label"] for r in flows]
            block["f1"] = mx.f1_suite(y_true, y_pred)
            scores[name] = block["f1"]
        if flows:
            coords[name] = np.asarray([[float(r["dim1"]), float(r["dim2"])] for r in flows])
            labels[name] = [r["true_label"] for r in flows]
        report.partitions[name] = block

    if all(p in scores for p in mx.DRIFT_PARTITIONS):
        report.drift = mx.drift_report(coords, labels, scores)

    out = _out_dir(args)
    with open(out / "report.json", "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    report.write_csv(out / "report.csv")
    print(f"wrote evaluation report under {out}")


def cmd_export_plot(args, cfg: PipelineConfig, seed: int) -> None:
    embed_dir = Path(args.embeddings)
    formats = [f.strip() for f in str(cfg.get("export", "formats")).split(",") if f.strip()]
    for fmt in formats:
        if fmt not in ("svg", "csv"):
            raise ConfigError(f"unknown export format {fmt!r}")
    out = _out_dir(args)
    written = []
    for name in _partition_list(cfg):
        path = embed_dir / f"embeddings_{name}.csv"
        if not path.exists():
            raise DataError(f"missing embeddings file {path}")
        flows = _read_embeddings_csv(path).get("flow", [])
        if not flows:
            continue
        points = np.asarray([[float(r["dim1"]), float(r["dim2"])] for r in flows])
        truths = [r["true_label"] or "unlabeled" for r in flows]
        preds = [r["pred_label"] for r in flows]
        if "svg" in formats:
            svg = viz.render_scatter_svg(points, truths, preds, title=f"flow embedding - {name}")
            (out / f"plot_{name}.svg").write_text(svg)
            written.append(f"plot_{name}.svg")
        if "csv" in formats:
            with open(out / f"plot_{name}_points.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(("id", "dim1", "dim2", "true_label", "pred_label", "misclassified"))
                for r in flows:
                    mis = bool(r["pred_label"]) and r["pred_label"] != r["true_label"]
                    writer.writerow(
                        [r["id"], r["dim1"], r["dim2"], r["true_label"], r["pred_label"], int(mis)]
                    )
            written.append(f"plot_{name}_points.csv")
    print(f"wrote {written} under {out}")


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="pipeline configuration file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate a labeled synthetic packet stream")
    common(p)

    p = sub.add_parser("ingest", help="segment a packet stream into flows")
    common(p)
    p.add_argument("--input", help="packet CSV (or .jsonl) path")
    p.add_argument("--sort", action="store_true", help="sort events by timestamp first")

    p = sub.add_parser("split", help="build the four chronological snapshots")
    common(p)
    p.add_argument("--input", help="flows CSV path")

    p = sub.add_parser("train", help="train on the training snapshot")
    common(p)
    p.add_argument("--input", help="split directory (contains train/)")

    p = sub.add_parser("embed", help="project snapshots with a trained checkpoint")
    common(p)
    p.add_argument("--input", help="split directory")
    p.add_argument("--checkpoint", required=True, help="checkpoint JSON path")

    p = sub.add_parser("explain", help="attribute embedding coordinates to features")
    common(p)
    p.add_argument("--input", help="split directory")
    p.add_argument("--checkpoint", required=True, help="checkpoint JSON path")

    p = sub.add_parser("eval", help="compute validity, classification and drift tables")
    common(p)
    p.add_argument("--embeddings", required=True, help="directory with embeddings_*.csv")
    p.add_argument("--baseline", help="directory with baseline embeddings_*.csv")

    p = sub.add_parser("export-plot", help="render SVG scatters and point tables")
    common(p)
    p.add_argument("--embeddings", required=True, help="directory with embeddings_*.csv")

    return parser


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "split": cmd_split,
    "train": cmd_train,
    "embed": cmd_embed,
    "explain": cmd_explain,
    "eval": cmd_eval,
    "export-plot": cmd_export_plot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig.defaults()
        seed = args.seed if args.seed is not None else cfg.get("pipeline", "seed")
        COMMANDS[args.command](args, cfg, seed)
    except FlowmapError as exc:
        code = getattr(exc, "exit_code", 3)
        payload = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
        print(json.dumps(payload), file=sys.stderr)
        return code
    except OSError as exc:
        payload = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": 3}}
        print(json.dumps(payload), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipeline: synth, ingest, field, derive, edges, segment, undo, render.

Exit codes: 0 success, 1 usage error, 2 data error.  Every
artifact-producing run writes a manifest.json beside its outputs; outputs
are deterministic under fixed seeds (the manifest's timestamp is the one
non-deterministic field).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import boundary as boundary_mod
from . import calculus, figures, learn, render
from .corpus import (
    ParseError,
    SyntheticConfig,
    TokenizerOptions,
    VersionedDocument,
    export_json_lines,
    ingest,
    inject_undo_events,
    paper_fig1_config,
    synthesize,
)
from .field import KernelSpec, SpaceTimeField, build_field


class _Parser(argparse.ArgumentParser):
    # argparse's default usage-error exit code is 2; the contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.exit_usage(message))

    def exit_usage(self, message) -> int:
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return 1


class DataError(Exception):
    pass


def _parse_pair(value: str, sep: str, what: str, cast):
    parts = str(value).split(sep)
    if len(parts) != 2:
        raise ValueError(f"{what} must look like A{sep}B, got {value!r}")
    return cast(parts[0]), cast(parts[1])


def _parse_split(value: str) -> tuple[str, float]:
    policy, _, frac = str(value).partition(":")
    if policy not in ("random", "time") or not frac:
        raise ValueError(f"--split must look like random:0.7 or time:0.7, got {value!r}")
    return ("random" if policy == "random" else "time-ordered", float(frac))


def _mode(value: str) -> str:
    if value in ("normalized",):
        return "normalized"
    if value in ("raw", "non-normalized"):
        return "non-normalized"
    raise ValueError(f"--mode must be normalized or raw, got {value!r}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _hash_inputs(paths) -> dict:
    out = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for f in sorted(p.iterdir()):
                if f.is_file():
                    out[str(f)] = _sha256(f)
        elif p.is_file():
            out[str(p)] = _sha256(p)
    return out


def _write_manifest(out_dir: Path, args_ns, inputs, outputs, config: dict) -> None:
    manifest = {
        "tool": "revfield",
        "version": __version__,
        "command": list(getattr(args_ns, "_argv", [])),
        "seed": config.get("seed"),
        "config": {k: v for k, v in sorted(config.items())},
        "inputs": _hash_inputs(inputs),
        "outputs": [str(Path(p).name) for p in outputs],
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _out_dir(args) -> Path:
    out = Path(getattr(args, "out", ".") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _write_json(path: Path, obj) -> Path:
    path.write_text(
        json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return path


def _load_config(args) -> dict:
    cfg_path = getattr(args, "config", None)
    if not cfg_path:
        return {}
    try:
        cfg = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {cfg_path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise DataError(f"config {cfg_path} must hold a JSON object")
    return cfg


def _resolve(args, defaults: dict) -> dict:
    """Effective settings: spec defaults <- config file <- explicit flags."""
    cfg = {**defaults, **_load_config(args)}
    for key in defaults:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            cfg[key] = val
    return cfg


def _ingest_corpus(path: str, options=None) -> VersionedDocument:
    try:
        return ingest(path, options=options) if options else ingest(path)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from exc


def _build_field_from(doc: VersionedDocument, cfg: dict) -> SpaceTimeField:
    mode = _mode(cfg["mode"])
    grid = cfg.get("grid")
    if grid is not None:
        grid = _parse_pair(grid, "x", "--grid", int) if isinstance(grid, str) else tuple(grid)
    kernel = None
    if cfg.get("bandwidth") is not None:
        bw = cfg["bandwidth"]
        hs, ht = (
            _parse_pair(bw, ",", "--bandwidth", float)
            if isinstance(bw, str)
            else tuple(bw)
        )
        kernel = KernelSpec(hs, ht, float(cfg.get("truncation", 3.0)))
    return build_field(doc, mode=mode, grid=grid, kernel=kernel)


def _norm_fields(field: SpaceTimeField):
    return tuple(
        calculus.derivative_norm_field(field, which)
        for which in ("d1_space", "d1_time", "d2_space", "d2_time")
    )


# --- subcommands --------------------------------------------------------


def _cmd_synth(args) -> int:
    defaults = {
        "seed": 0,
        "versions": 60,
        "vocab": 2,
        "segments": "0.3:30:2,0.7:40:0,0.5:120:-1",
        "undo-rate": 0.0,
    }
    cfg = _resolve(args, defaults)
    if getattr(args, "paper_fig1", False):
        config = paper_fig1_config(int(cfg["seed"]))
    else:
        segs = []
        for part in str(cfg["segments"]).split(","):
            p, init, growth = part.split(":")
            segs.append((float(p), float(init), float(growth)))
        config = SyntheticConfig(
            tuple(segs), int(cfg["versions"]), int(cfg["vocab"]), int(cfg["seed"])
        )
    doc, labels = synthesize(config)
    rate = float(cfg["undo-rate"])
    if rate > 0.0:
        doc = inject_undo_events(doc, rate, int(cfg["seed"]))
    out = _out_dir(args)
    corpus_path = out / "corpus.jsonl"
    export_json_lines(doc, corpus_path)
    labels_path = _write_json(out / "labels.json", labels)
    _write_manifest(out, args, [], [corpus_path, labels_path], cfg)
    return 0


def _cmd_ingest(args) -> int:
    cfg = _resolve(args, {"format": "auto", "strip-html": False})
    options = TokenizerOptions(strip_html=bool(cfg["strip-html"]))
    try:
        doc = ingest(args.input, fmt=str(cfg["format"]), options=options)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from exc
    out = _out_dir(args)
    corpus_path = out / "corpus.jsonl"
    export_json_lines(doc, corpus_path)
    _write_manifest(out, args, [args.input], [corpus_path], cfg)
    return 0


_FIELD_DEFAULTS = {
    "mode": "normalized",
    "grid": None,
    "bandwidth": None,
    "truncation": 3.0,
}


def _cmd_field(args) -> int:
    cfg = _resolve(args, dict(_FIELD_DEFAULTS))
    doc = _ingest_corpus(args.corpus)
    f = _build_field_from(doc, cfg)
    out = _out_dir(args)
    field_path = out / "field.json"
    f.to_json(field_path)
    _write_manifest(out, args, [args.corpus], [field_path], cfg)
    return 0


def _cmd_derive(args) -> int:
    cfg = _resolve(args, {"curve": None})
    try:
        f = SpaceTimeField.from_json(args.field)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot load field {args.field}: {exc}") from exc
    out = _out_dir(args)
    outputs = []
    names = ("d1_space", "d1_time", "d2_space", "d2_time")
    fields = {}
    for which in names:
        nf = calculus.derivative_norm_field(f, which)
        fields[which] = nf
        outputs.append(_write_text(out / f"{which}.csv", render.scalar_field_csv(nf)))
        outputs.append(
            figures.heatmap_png(nf.values, f.extent, out / f"{which}.png", which)
        )
    h = calculus.integrated_change(fields["d1_space"], "space")
    g = calculus.integrated_change(fields["d1_time"], "time")
    s_coords, t_coords = fields["d1_space"].coords()
    outputs.append(_write_text(out / "h.csv", render.curve_csv("s", s_coords, h)))
    outputs.append(_write_text(out / "g.csv", render.curve_csv("t", t_coords, g)))
    outputs.append(figures.curves_png(s_coords, h, t_coords, g, out / "curves.png"))
    inputs = [args.field]
    if cfg.get("curve"):
        curve_path = Path(cfg["curve"])
        try:
            samples = json.loads(curve_path.read_text(encoding="utf-8"))
            curve = calculus.Curve(np.asarray(samples, dtype=float))
            value = calculus.directional_change(f, curve)
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot evaluate curve {curve_path}: {exc}") from exc
        outputs.append(_write_json(out / "directional.json", {"value": value}))
        inputs.append(curve_path)
    _write_manifest(out, args, inputs, outputs, cfg)
    return 0


_EDGES_DEFAULTS = {
    **_FIELD_DEFAULTS,
    "cells": "20x20",
    "threshold": 0.2,
    "seed": 0,
    "split": "random:0.7",
    "texttiling-w": 20,
}


def _cmd_edges(args) -> int:
    cfg = _resolve(args, dict(_EDGES_DEFAULTS))
    doc = _ingest_corpus(args.corpus)
    if doc.boundaries is None or not any(doc.boundaries):
        raise DataError("corpus carries no boundary annotations; cannot label cells")
    f = _build_field_from(doc, cfg)
    d1s = calculus.derivative_norm_field(f, "d1_space")
    d1t = calculus.derivative_norm_field(f, "d1_time")
    magnitude = calculus.ScalarField(d1s.values + d1t.values, f.extent)
    edges = boundary_mod.detect_edges(magnitude, float(cfg["threshold"]))
    cells = _parse_pair(cfg["cells"], "x", "--cells", int)
    grid_cells = boundary_mod.build_cell_grid(
        doc.boundaries, d1s, cells, revision_lengths=doc.lengths(), mode=f.mode
    )
    X = grid_cells.feature_matrix()
    y = grid_cells.label_vector()
    policy, fraction = _parse_split(cfg["split"])
    seed = int(cfg["seed"])
    train_idx, test_idx = learn.split(len(y), policy, fraction, seed)
    if y[train_idx].all() or not y[train_idx].any():
        raise DataError("training cells are single-class; enlarge the corpus or cells")

    maj = learn.majority_baseline(y[train_idx])
    report_a = learn.evaluate(maj.predict(len(test_idx)), y[test_idx])

    predicted_cells = set()
    w = int(cfg["texttiling-w"])
    for j, rev in enumerate(doc.revisions):
        offsets = learn.texttiling(rev, w=w)
        pts = boundary_mod.boundary_spacetime_points(
            [offsets], [len(rev)], f.mode
        )
        pts = [(s, float(j)) for s, _ in pts]
        predicted_cells |= boundary_mod.cells_of_boundaries(pts, f.extent, cells)
    y_tt = np.zeros(len(y), dtype=bool)
    for ca, cb in predicted_cells:
        y_tt[ca * cells[1] + cb] = True
    report_b = learn.evaluate(y_tt[test_idx], y[test_idx])

    model = learn.train(X[train_idx], y[train_idx], "logistic", seed=seed)
    pred_c, _scores = learn.predict(model, X[test_idx])
    report_c = learn.evaluate(pred_c, y[test_idx])

    row = {
        "article": Path(args.corpus).stem,
        "revisions": doc.num_revisions,
        "vocab_size": len(doc.vocabulary),
        "p_y": report_a.positives_rate,
        "accuracy": {
            "a": report_a.accuracy,
            "b": report_b.accuracy,
            "c": report_c.accuracy,
        },
        "f1": {"a": report_a.f1, "b": report_b.f1, "c": report_c.f1},
    }
    out = _out_dir(args)
    outputs = [
        _write_text(out / "edges.csv", render.edge_csv(edges, f.extent)),
        _write_json(
            out / "report.json",
            {
                "row": row,
                "methods": {
                    "a": report_a.to_dict(),
                    "b": report_b.to_dict(),
                    "c": report_c.to_dict(),
                },
            },
        ),
        _write_text(out / "report.txt", learn.format_report_table([row])),
        figures.heatmap_png(
            magnitude.values, f.extent, out / "magnitude.png", "gradient magnitude",
            edges=edges.flags,
        ),
        figures.report_bar_png([row], out / "report.png"),
    ]
    model.to_json(out / "model.json")
    outputs.append(out / "model.json")
    _write_manifest(out, args, [args.corpus], outputs, cfg)
    return 0


_SEGMENT_DEFAULTS = {
    **_FIELD_DEFAULTS,
    "k": 3,
    "c1": None,
    "c2": None,
    "seed": 0,
    "method": "embedded-lloyd",
}


def _cmd_segment(args) -> int:
    cfg = _resolve(args, dict(_SEGMENT_DEFAULTS))
    inputs = []
    if getattr(args, "field", None):
        try:
            f = SpaceTimeField.from_json(args.field)
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"cannot load field {args.field}: {exc}") from exc
        inputs.append(args.field)
    elif getattr(args, "corpus", None):
        doc = _ingest_corpus(args.corpus)
        f = _build_field_from(doc, cfg)
        inputs.append(args.corpus)
    else:
        raise DataError("segment needs --field or --corpus")
    c1 = cfg.get("c1")
    c2 = cfg.get("c2")
    seg = boundary_mod.segment(
        f,
        int(cfg["k"]),
        None if c1 is None else float(c1),
        None if c2 is None else float(c2),
        int(cfg["seed"]),
        str(cfg["method"]),
    )
    out = _out_dir(args)
    outputs = [
        _write_text(out / "segmentation.csv", render.segmentation_csv(seg, f.extent)),
        (out / "segmentation.pgm"),
        figures.segmentation_png(
            seg.assignment, f.extent, seg.k, out / "segmentation.png"
        ),
        _write_json(
            out / "report.json",
            {
                "k": seg.k,
                "method": seg.method,
                "weights": list(seg.weights),
                "objective": seg.objective,
                "iterations": seg.iterations,
            },
        ),
    ]
    (out / "segmentation.pgm").write_bytes(render.segmentation_pgm(seg))
    _write_manifest(out, args, inputs, outputs, cfg)
    return 0


_UNDO_DEFAULTS = {
    **_FIELD_DEFAULTS,
    "seed": 0,
    "split": "time:0.7",
}


def _cmd_undo(args) -> int:
    cfg = _resolve(args, dict(_UNDO_DEFAULTS))
    doc = _ingest_corpus(args.corpus)
    if doc.undo_flags is None or not any(doc.undo_flags):
        raise DataError("corpus carries no undo annotations")
    f = _build_field_from(doc, cfg)
    if f.grid_t != doc.num_revisions:
        raise DataError("undo requires one time-grid row per revision (grid T = l)")
    nf = _norm_fields(f)
    h = calculus.integrated_change(nf[0], "space")
    g = calculus.integrated_change(nf[1], "time")
    X, y = learn.undo_dataset(nf, h, g, doc.undo_flags)
    if y.all() or not y.any():
        raise DataError("undo labels are single-class")
    X_tf = np.stack(
        [doc.term_frequencies(t) for t in range(doc.num_revisions - 1)]
    )
    policy, fraction = _parse_split(cfg["split"])
    seed = int(cfg["seed"])
    train_idx, test_idx = learn.split(len(y), policy, fraction, seed)
    if y[train_idx].all() or not y[train_idx].any():
        raise DataError("training rows are single-class; adjust the split")

    maj = learn.majority_baseline(y[train_idx])
    report_a = learn.evaluate(maj.predict(len(test_idx)), y[test_idx])
    model_tf = learn.train(X_tf[train_idx], y[train_idx], "hinge", seed=seed)
    report_b = learn.evaluate(learn.predict(model_tf, X_tf[test_idx])[0], y[test_idx])
    model_grad = learn.train(X[train_idx], y[train_idx], "hinge", seed=seed)
    report_c = learn.evaluate(learn.predict(model_grad, X[test_idx])[0], y[test_idx])

    row = {
        "article": Path(args.corpus).stem,
        "revisions": doc.num_revisions,
        "vocab_size": len(doc.vocabulary),
        "p_y": report_a.positives_rate,
        "accuracy": {
            "a": report_a.accuracy,
            "b": report_b.accuracy,
            "c": report_c.accuracy,
        },
        "f1": {"a": report_a.f1, "b": report_b.f1, "c": report_c.f1},
    }
    out = _out_dir(args)
    outputs = [
        _write_json(
            out / "report.json",
            {
                "row": row,
                "methods": {
                    "a": report_a.to_dict(),
                    "b": report_b.to_dict(),
                    "c": report_c.to_dict(),
                },
            },
        ),
        _write_text(out / "report.txt", learn.format_report_table([row])),
        figures.report_bar_png([row], out / "report.png"),
    ]
    model_grad.to_json(out / "model.json")
    outputs.append(out / "model.json")
    _write_manifest(out, args, [args.corpus], outputs, cfg)
    return 0


def _cmd_render(args) -> int:
    cfg = _resolve(args, {"component": None, "norm": None, "quiver": None, "range": None})
    try:
        f = SpaceTimeField.from_json(args.field)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot load field {args.field}: {exc}") from exc
    spec = render.ImageSpec()
    if cfg.get("range"):
        lo, hi = _parse_pair(cfg["range"], ",", "--range", float)
        spec = render.ImageSpec("fixed", lo, hi)
    out = _out_dir(args)
    outputs = []
    if cfg.get("component") is not None:
        cid = int(cfg["component"])
        values = f.component(cid)
        sf = calculus.ScalarField(values, f.extent)
        (out / f"component_{cid}.pgm").write_bytes(render.to_pgm(values, spec))
        outputs.append(out / f"component_{cid}.pgm")
        outputs.append(
            _write_text(out / f"component_{cid}.csv", render.scalar_field_csv(sf))
        )
        outputs.append(
            figures.heatmap_png(
                values, f.extent, out / f"component_{cid}.png", f"component {cid}"
            )
        )
    if cfg.get("norm"):
        which = str(cfg["norm"])
        nf = calculus.derivative_norm_field(f, which)
        (out / f"{which}.pgm").write_bytes(render.to_pgm(nf, spec))
        outputs.append(out / f"{which}.pgm")
        outputs.append(_write_text(out / f"{which}.csv", render.scalar_field_csv(nf)))
    if cfg.get("quiver") is not None:
        cid = int(cfg["quiver"])
        ds, dt = calculus.component_gradient(f, cid)
        outputs.append(
            _write_text(out / f"quiver_{cid}.csv", render.quiver_csv(ds, dt))
        )
    if not outputs:
        raise DataError("render needs --component, --norm, or --quiver")
    _write_manifest(out, args, [args.field], outputs, cfg)
    return 0


# --- parser -------------------------------------------------------------


def _add_common(p: _Parser, *names: str) -> None:
    if "out" in names:
        p.add_argument("--out", default=".", help="output directory")
    if "config" in names:
        p.add_argument("--config", help="JSON config file; flags override it")
    if "seed" in names:
        p.add_argument("--seed", type=int, default=None)
    if "fieldflags" in names:
        p.add_argument("--mode", default=None, help="normalized|raw")
        p.add_argument("--grid", default=None, help="SxT, e.g. 256x60")
        p.add_argument("--bandwidth", default=None, help="hs,ht")
        p.add_argument("--truncation", type=float, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="revfield", description=__doc__)
    parser.add_argument("--version", action="version", version=f"revfield {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand",
                                parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--paper-fig1", action="store_true", help="three-segment reference config")
    p.add_argument("--segments", default=None, help="p:init:growth,... per segment")
    p.add_argument("--versions", type=int, default=None)
    p.add_argument("--vocab", type=int, default=None)
    p.add_argument("--undo-rate", type=float, default=None, dest="undo_rate")
    _add_common(p, "out", "config", "seed")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="normalize a corpus to json-lines")
    p.add_argument("--input", required=True)
    p.add_argument("--format", default=None, help="auto|jsonl|dir")
    p.add_argument("--strip-html", action="store_true", default=None, dest="strip_html")
    _add_common(p, "out", "config")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("field", help="build and serialize a field")
    p.add_argument("--corpus", required=True)
    _add_common(p, "out", "config", "fieldflags")
    p.set_defaults(func=_cmd_field)

    p = sub.add_parser("derive", help="derivative norms and change curves")
    p.add_argument("--field", required=True, help="serialized field JSON")
    p.add_argument("--curve", default=None, help="JSON [[s,t],...] curve samples")
    _add_common(p, "out", "config")
    p.set_defaults(func=_cmd_derive)

    p = sub.add_parser("edges", help="edge detection and prediction report")
    p.add_argument("--corpus", required=True)
    p.add_argument("--cells", default=None, help="AxB")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--split", default=None, help="random:0.7|time:0.7")
    p.add_argument("--texttiling-w", type=int, default=None, dest="texttiling_w")
    _add_common(p, "out", "config", "seed", "fieldflags")
    p.set_defaults(func=_cmd_edges)

    p = sub.add_parser("segment", help="cluster the field grid")
    p.add_argument("--field", default=None)
    p.add_argument("--corpus", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--c1", type=float, default=None)
    p.add_argument("--c2", type=float, default=None)
    p.add_argument("--method", default=None, help="embedded-lloyd|exact-medoids")
    _add_common(p, "out", "config", "seed", "fieldflags")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("undo", help="undo-prediction report")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", default=None, help="random:0.7|time:0.7")
    _add_common(p, "out", "config", "seed", "fieldflags")
    p.set_defaults(func=_cmd_undo)

    p = sub.add_parser("render", help="PGM/CSV exports of a field")
    p.add_argument("--field", required=True)
    p.add_argument("--component", type=int, default=None, help="vocabulary id")
    p.add_argument("--norm", default=None, help="d1_space|d1_time|d2_space|d2_time")
    p.add_argument("--quiver", type=int, default=None, help="component id for gradient CSV")
    p.add_argument("--range", default=None, help="lo,hi fixed intensity range")
    _add_common(p, "out", "config")
    p.set_defaults(func=_cmd_render)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._argv = ["revfield"] + argv
    try:
        return args.func(args)
    except DataError as exc:
        print(f"revfield: error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, ValueError, IndexError, OSError) as exc:
        print(f"revfield: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

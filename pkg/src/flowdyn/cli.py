"""Command-line entry point: ``flowdyn <subcommand> [options]``.

Every option may also come from a JSON file given with ``--config``: keys
at the top level apply to all subcommands, keys under a subcommand name
apply to that subcommand only.  Flags override the file, the file
overrides the built-in defaults.  Exit status is 0 on success, 2 on usage
errors and 1 on runtime errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import classifier, corpus, estimator, features, flow, hallucinator, selector, study, viz
from .correction import CorrectionParams, Rescale, correct
from .errors import FlowDynError, MissingSelection

log = logging.getLogger("flowdyn")

DEFAULTS = {
    "common": {"seed": 0, "jobs": 1},
    "generate": {"spec": "default", "gt": True},
    "estimate": {"strides": "1,2,4", "type": "hs", "pattern": "*.png"},
    "correct": {"gamma": 1.0, "subtract_dominant": False, "keep_normalized": False},
    "visualize": {"gammas": None, "max_mag": None},
    "featurize": {"types": "hs", "strides": "1,2,4", "gammas": "1", "descriptor": "COMBINED", "bins": features.DEFAULT_BINS, "grid": "4,4"},
    "train": {"reg": 1e-3, "epochs": 50},
    "select": {"mode": "best_type_only", "descriptor": "COMBINED", "bins": features.DEFAULT_BINS, "grid": "4,4", "reg": selector.SCORING_REG, "epochs": 50},
    "hal-train": {"lambda_mse": 1.0, "epochs": 200, "lr": 1e-2, "batch": 8, "descriptor": "COMBINED", "grid": "4,4", "teacher_forcing": False},
    "predict": {},
    "eval": {},
    "reproduce": {"spec": "default", "seeds": "0,1,2,3,4", "clips_per_class": 10},
}


class UsageError(Exception):
    pass


def _ints(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _floats(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _strs(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(str(x) for x in text)
    return tuple(x.strip() for x in str(text).split(",") if x.strip())


# -- corpus on disk ----------------------------------------------------------

CORPUS_FILE = "corpus.json"


def write_corpus(spec: corpus.CorpusSpec, out, gt: bool = True) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for clip, flows in corpus.generate(spec):
        cdir = out / clip.clip_id
        names = flow.save_frames(clip, cdir)
        recs = []
        if gt:
            (cdir / "gt").mkdir(exist_ok=True)
            for t, f in enumerate(flows):
                name = f"gt/s1_t{t:04d}.flo"
                flow.write_flo(f, cdir / name)
                recs.append({"file": name, "estimator": "ground_truth", "stride": 1, "t": t})
        flow.write_manifest(flow.clip_manifest(clip, names, [1] if gt else [], recs), cdir / "manifest.json")
        entries.append(f"{clip.clip_id}/manifest.json")
    index = {"spec": spec.to_dict(), "clips": entries}
    (out / CORPUS_FILE).write_text(json.dumps(index, indent=2))
    return out / CORPUS_FILE


def load_corpus(path) -> list:
    p = Path(path)
    if p.is_dir():
        p = p / CORPUS_FILE
    index = flow.read_manifest(p)
    clips = []
    for rel in index["clips"]:
        mpath = p.parent / rel
        clips.append(flow.clip_from_manifest(flow.read_manifest(mpath), mpath.parent))
    return clips


def _named_spec(name: str, seed: int, clips_per_class=None) -> corpus.CorpusSpec:
    kw = {} if clips_per_class is None else {"clips_per_class": int(clips_per_class)}
    if name in ("default", "mixed"):
        return study.mixed_speed_spec(seed=seed, **kw)
    if name == "engineered":
        return study.engineered_spec(seed=seed, **kw)
    doc = json.loads(Path(name).read_text())
    doc.setdefault("seed", seed)
    return corpus.CorpusSpec.from_dict(doc)


# -- subcommands ---------------------------------------------------------------


def cmd_generate(o):
    spec = _named_spec(o.spec, o.seed, o.clips_per_class)
    path = write_corpus(spec, o.out, o.gt)
    print(f"wrote {spec.n_clips} clips to {path}")


def cmd_estimate(o):
    clip = flow.load_frames(o.frames, o.pattern)
    strides = estimator.StrideSet(_ints(o.strides))
    cfg = features.FLOW_TYPES[o.type]
    if o.alpha is not None or o.iterations is not None:
        cfg = estimator.EstimatorConfig(o.alpha or cfg.alpha, o.iterations or cfg.iterations, cfg.pyramid_levels, cfg.pyramid_scale, cfg.warps)
    out = Path(o.out)
    out.mkdir(parents=True, exist_ok=True)
    pairs = estimator.pair_frames(clip, strides)
    fields = estimator.estimate_clip(clip, strides, cfg, o.jobs)
    recs = []
    it = iter(fields)
    for s, ps in pairs.items():
        for t0, _ in ps:
            name = f"{o.type}_s{s}_t{t0:04d}.flo"
            flow.write_flo(next(it), out / name, {"stride": s, "t": t0, "estimator": o.type, "source": "estimated"})
            recs.append({"file": name, "estimator": o.type, "stride": s, "t": t0})
    frames = [str(Path(os.path.relpath(o.frames, out)) / f) for f in clip.meta.get("files", [])]
    flow.write_manifest(flow.clip_manifest(clip, frames, pairs.keys(), recs), out / "manifest.json")
    dropped = [s for s in strides if s not in pairs]
    print(f"{len(recs)} fields written to {out}" + (f"; dropped strides {dropped}" if dropped else ""))


def cmd_correct(o):
    f = flow.read_flo(o.flo)
    rescale = Rescale.KEEP_NORMALIZED if o.keep_normalized else Rescale.RESTORE_SCALE
    g = correct(f, CorrectionParams(float(o.gamma), bool(o.subtract_dominant), rescale))
    meta = {"gamma": float(o.gamma), "source": "corrected"}
    flow.write_flo(g, o.out, meta)
    print(f"corrected field written to {o.out}")


def cmd_visualize(o):
    f = flow.read_flo(o.flo)
    if o.gammas:
        gs = _floats(o.gammas)
        fields = [correct(f, CorrectionParams(g)) for g in gs]
        img = viz.side_by_side(fields, [f"gamma={g:g}" for g in gs], o.max_mag)
    else:
        img = viz.colorize(f, o.max_mag)
    viz.save_png(img, o.out)
    print(f"image written to {o.out}")


def cmd_featurize(o):
    clips = load_corpus(o.corpus)
    store = features.FlowStore(jobs=o.jobs)
    out = Path(o.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = _ints(o.grid)
    index = []
    for clip in clips:
        for t in _strs(o.types):
            for s in _ints(o.strides):
                if s >= clip.frame_count:
                    continue
                for g in _floats(o.gammas):
                    feat = features.featurize_stream(clip, t, s, CorrectionParams(g), o.descriptor, store=store, bins=int(o.bins), grid=grid)
                    name = features.feature_filename(clip.clip_id, t, s, g, o.descriptor)
                    features.write_feature(feat, out / name, clip.clip_id, label=clip.label)
                    index.append(name)
    (out / "index.json").write_text(json.dumps({"records": index}, indent=2))
    print(f"{len(index)} feature records written to {out}")


def _read_store(directory, point=None):
    """Feature records of a store, optionally filtered to one (type, stride, gamma)."""
    d = Path(directory)
    index = json.loads((d / "index.json").read_text())["records"]
    rows = [features.read_feature(d / name) for name in index]
    points = sorted({tuple(f.provenance) for f, _ in rows})
    if point is None:
        if len(points) != 1:
            raise UsageError(f"store holds {len(points)} grid points; pick one with --type/--stride/--gamma")
        point = points[0]
    keep = [(f, h) for f, h in rows if f.provenance[0] == point[0] and f.provenance[1] == point[1] and abs(f.provenance[2] - point[2]) < 1e-12]
    if not keep:
        raise UsageError(f"no records at {point}")
    return keep, point


def _point(o):
    if o.type is None and o.stride is None and o.gamma is None:
        return None
    if None in (o.type, o.stride, o.gamma):
        raise UsageError("--type, --stride and --gamma go together")
    return (o.type, int(o.stride), float(o.gamma))


def cmd_train(o):
    rows, point = _read_store(o.features, _point(o))
    model = classifier.train([f for f, _ in rows], [h["label"] for _, h in rows], float(o.reg), int(o.epochs), o.seed)
    model.save(o.out)
    print(f"model on {point} with {len(rows)} clips written to {o.out}")


def _selection_setup(o, clips):
    doc = json.loads(Path(o.grid_file).read_text())
    grid = selector.SelectionGrid.from_dict(doc)
    grid = grid.truncated(min(c.frame_count for c in clips))
    return grid


def cmd_select(o):
    clips = load_corpus(o.corpus)
    grid = _selection_setup(o, clips)
    bank = study.FeatureBank(clips, o.descriptor, _ints(o.grid), features.FlowStore(jobs=o.jobs))
    scores = selector.cross_score(
        [c.clip_id for c in clips], [c.label for c in clips], grid, bank, seed=o.seed, reg=float(o.reg), epochs=int(o.epochs), jobs=o.jobs
    )
    records = selector.select_per_video(scores, o.mode, grid.flow_types)
    selector.save_selections(records, o.out, grid)
    print(f"{len(records)} selections written to {o.out}")


def cmd_hal_train(o):
    clips = load_corpus(o.corpus)
    records = selector.load_selections(o.selections)
    model, hist = hallucinator.train_hal(
        clips,
        records,
        lambda_mse=float(o.lambda_mse),
        epochs=int(o.epochs),
        seed=o.seed,
        lr=float(o.lr),
        batch=int(o.batch),
        descriptor=o.descriptor,
        off_grid=_ints(o.grid),
        store=features.FlowStore(jobs=o.jobs),
        teacher_forcing=bool(o.teacher_forcing),
    )
    model.save(o.out)
    last = hist[-1]
    print(f"model written to {o.out}; final loss {last['loss']:.4f} (mse {last['mse']:.4f}, ce {last['ce']:.4f})")


def _model_kind(path) -> str:
    with open(path, "rb") as fh:
        return json.loads(fh.readline())["kind"]


def cmd_predict(o):
    model = hallucinator.HalModel.load(o.model)
    clips = load_corpus(o.corpus) if o.corpus else [flow.load_frames(o.frames)]
    out = []
    for c in clips:
        label, off = hallucinator.predict(model, c)
        out.append({"clip_id": c.clip_id, "label": label, "off_norm": float(np.linalg.norm(off))})
        print(f"{c.clip_id}\t{label}")
    if o.out:
        Path(o.out).write_text(json.dumps(out, indent=2))


def cmd_eval(o):
    kind = _model_kind(o.model)
    if kind == "hallucinator":
        if not o.corpus:
            raise UsageError("--corpus is required for a hallucinator model")
        model = hallucinator.HalModel.load(o.model)
        acc = hallucinator.accuracy(model, load_corpus(o.corpus))
    else:
        if not o.features:
            raise UsageError("--features is required for a linear model")
        model = classifier.LinearModel.load(o.model)
        rows, _ = _read_store(o.features, _point(o))
        acc = classifier.accuracy(model, [f for f, _ in rows], [h["label"] for _, h in rows])
    print(f"accuracy {acc:.4f}")


def cmd_reproduce(o):
    if o.spec not in ("default", "quick"):
        raise UsageError("--spec must be 'default' or 'quick'")
    seeds = _ints(o.seeds)
    cpc = int(o.clips_per_class)
    if o.spec == "quick":
        seeds, cpc = seeds[:1], min(cpc, 6)
    t0 = time.time()
    results, table = study.reproduce(seeds, clips_per_class=cpc, jobs=o.jobs)
    print(table)
    print(f"({len(seeds)} seed(s), {time.time() - t0:.0f} s)")
    if o.out:
        doc = {"seeds": list(seeds), "rows": [[r.to_dict() for r in rows] for rows in results]}
        Path(o.out).write_text(json.dumps(doc, indent=2))


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowdyn", description="Multi-stride, power-normalized optical-flow features.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common])

    s = add("generate", "write a synthetic corpus")
    s.add_argument("--spec", help="'default', 'engineered' or a CorpusSpec JSON file")
    s.add_argument("--out", required=True)
    s.add_argument("--clips-per-class", type=int)
    s.add_argument("--no-gt", dest="gt", action="store_false", default=None)

    s = add("estimate", "estimate flow for every stride pair of a frame directory")
    s.add_argument("--frames", required=True)
    s.add_argument("--strides")
    s.add_argument("--out", required=True)
    s.add_argument("--type", choices=sorted(features.FLOW_TYPES))
    s.add_argument("--alpha", type=float)
    s.add_argument("--iterations", type=int)
    s.add_argument("--pattern")

    s = add("correct", "power-normalize a .flo field")
    s.add_argument("--flo", required=True)
    s.add_argument("--gamma", type=float)
    s.add_argument("--subtract-dominant", action="store_true", default=None)
    s.add_argument("--keep-normalized", action="store_true", default=None)
    s.add_argument("--out", required=True)

    s = add("visualize", "render a .flo field (or a gamma panel) to PNG")
    s.add_argument("--flo", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--max-mag", type=float)
    s.add_argument("--gammas", help="comma list; renders one panel per gamma")

    s = add("featurize", "write feature records for a corpus")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--types")
    s.add_argument("--strides")
    s.add_argument("--gammas")
    s.add_argument("--descriptor", choices=[d.value for d in features.Descriptor])
    s.add_argument("--bins", type=int)
    s.add_argument("--grid")

    s = add("train", "train a linear classifier on a feature store")
    s.add_argument("--features", required=True)
    s.add_argument("--out", required=True)
    for name, typ in (("--type", str), ("--stride", int), ("--gamma", float), ("--reg", float), ("--epochs", int)):
        s.add_argument(name, type=typ)

    s = add("select", "cross-score a grid and pick (type, stride, gamma) per clip")
    s.add_argument("--corpus", required=True)
    s.add_argument("--grid", dest="grid_file", required=True, help="SelectionGrid JSON")
    s.add_argument("--mode", choices=[m.value for m in selector.Mode])
    s.add_argument("--out", required=True)
    s.add_argument("--descriptor", choices=[d.value for d in features.Descriptor])
    s.add_argument("--feature-grid", dest="grid")
    s.add_argument("--bins", type=int)
    s.add_argument("--reg", type=float)
    s.add_argument("--epochs", type=int)

    s = add("hal-train", "train the flow-feature hallucinator")
    s.add_argument("--corpus", required=True)
    s.add_argument("--selections", required=True)
    s.add_argument("--out", required=True)
    for name, typ in (("--lambda-mse", float), ("--epochs", int), ("--lr", float), ("--batch", int)):
        s.add_argument(name, type=typ)
    s.add_argument("--descriptor", choices=[d.value for d in features.Descriptor])
    s.add_argument("--feature-grid", dest="grid")
    s.add_argument("--teacher-forcing", action="store_true", default=None)

    s = add("predict", "classify clips from appearance with a hallucinator model")
    s.add_argument("--model", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--corpus")
    g.add_argument("--frames")
    s.add_argument("--out")

    s = add("eval", "accuracy of a linear or hallucinator model")
    s.add_argument("--model", required=True)
    s.add_argument("--corpus")
    s.add_argument("--features")
    for name, typ in (("--type", str), ("--stride", int), ("--gamma", float)):
        s.add_argument(name, type=typ)

    s = add("reproduce", "run the synthetic stride/gamma study and print the results table")
    s.add_argument("--spec", help="'default' (5 seeds) or 'quick' (1 seed, small corpus)")
    s.add_argument("--seeds")
    s.add_argument("--clips-per-class", type=int)
    s.add_argument("--out")
    return p


COMMANDS = {
    "generate": cmd_generate,
    "estimate": cmd_estimate,
    "correct": cmd_correct,
    "visualize": cmd_visualize,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "select": cmd_select,
    "hal-train": cmd_hal_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "reproduce": cmd_reproduce,
}


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge built-in defaults, the config file and explicit flags."""
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
    merged = dict.fromkeys(vars(args))
    merged.update(DEFAULTS["common"])
    merged.update(DEFAULTS.get(args.command, {}))
    merged.update({k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, dict)})
    merged.update({k.replace("-", "_"): v for k, v in cfg.get(args.command, {}).items()})
    merged.update({k: v for k, v in vars(args).items() if v is not None})
    return argparse.Namespace(**merged)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = resolve(args)
    except (UsageError, json.JSONDecodeError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"flowdyn: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if opts.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[opts.command](opts)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"flowdyn: error: {exc}", file=sys.stderr)
        return 2
    except (FlowDynError, MissingSelection, OSError, ValueError, KeyError) as exc:
        print(f"flowdyn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())

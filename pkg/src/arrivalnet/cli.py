"""Command-line entry point: ``arrivalnet {train,predict,evaluate,generate}``.

Exit codes: 0 ok, 2 parse/config error, 3 training diverged, 4 empty
dataset, 5 checkpoint does not fit the data.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import datagen, model, neural
from .features import NormStats, fit_normalizer, normalize_features
from .io import ParseError, read_config, read_transactions, write_rows, write_transactions
from .metrics import auc_quantile_summary, mean_custom_loss, rmse, roc_auc
from .pipeline import holdout_labels, prepare, segment

log = logging.getLogger("arrivalnet")

EXIT_PARSE, EXIT_DIVERGED, EXIT_EMPTY, EXIT_SHAPE = 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


@dataclasses.dataclass
class RunConfig:
    input: str = ""
    checkpoint: str = ""
    out: str = ""
    train_end: int = 78
    horizon: int = 4
    hidden: int = 36
    learning_rate: float = 1e-3
    iterations: int = 100
    clip: float = 5.0
    loss_mode: str = "matrnn"
    k_max: float = 10.0
    seed: int = 0
    batch_size: int = 0
    segment_window: int = 0
    segment_stride: int = 1
    bin_convention: str = "cell"
    processes: tuple[str, ...] = ()
    basket: tuple[str, ...] = ()

    def __post_init__(self):
        if self.train_end < 2:
            raise ValueError("train_end must be >= 2")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


def _coerce(cls, raw: dict[str, str]):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in fields:
            raise ValueError(f"unknown config key {key!r}")
        default = fields[key].default
        if isinstance(default, tuple):
            parts = [v.strip() for v in value.split(",") if v.strip()]
            kwargs[key] = tuple(float(v) for v in parts) if default and isinstance(default[0], float) else tuple(parts)
        elif isinstance(default, bool):
            kwargs[key] = value.lower() in ("1", "true", "yes")
        elif isinstance(default, int):
            kwargs[key] = int(value)
        elif isinstance(default, float):
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def load_run_config(args) -> RunConfig:
    raw = read_config(args.config) if args.config else {}
    for key in ("checkpoint", "out", "input"):
        if getattr(args, key, None):
            raw[key] = getattr(args, key)
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    try:
        return _coerce(RunConfig, raw)
    except (ValueError, TypeError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_PARSE) from None


def _require(cfg, *names):
    for n in names:
        if not getattr(cfg, n):
            raise CliError(f"missing required setting {n!r}", EXIT_PARSE)


def _read_log(path):
    try:
        return read_transactions(path)
    except (ParseError, OSError) as exc:
        raise CliError(str(exc), EXIT_PARSE) from None


def _sibling(path, suffix):
    p = Path(path)
    return p.with_name(p.stem + suffix)


def cmd_train(cfg: RunConfig):
    _require(cfg, "input", "checkpoint")
    txlog = _read_log(cfg.input)
    procs = list(cfg.processes) or txlog.processes()
    prep = prepare(txlog, cfg.train_end, procs, basket=cfg.basket or None)
    if not prep.subjects:
        raise CliError("no subject has an arrival in the training window", EXIT_EMPTY)
    stats = fit_normalizer(prep.features)
    x = normalize_features(prep.features, stats)
    targets = prep.targets
    if cfg.segment_window:
        x, targets = segment(x, targets, cfg.segment_window, cfg.segment_stride)
    anchors = model.scale_anchors(prep.targets, cfg.train_end)
    mcfg = model.ModelConfig(
        n_processes=len(procs),
        mean_interarrival=anchors,
        hidden=cfg.hidden,
        loss_mode=cfg.loss_mode,
        k_max=cfg.k_max,
        learning_rate=cfg.learning_rate,
        iterations=cfg.iterations,
        clip=cfg.clip,
        seed=cfg.seed,
        batch_size=cfg.batch_size or None,
        bin_convention=cfg.bin_convention,
    )
    try:
        result = model.train(x, targets, mcfg)
    except model.TrainingDiverged as exc:
        raise CliError(str(exc), EXIT_DIVERGED) from None
    meta = {
        "model": dataclasses.asdict(mcfg),
        "processes": procs,
        "basket": list(cfg.basket),
        "train_end": cfg.train_end,
        "n_inputs": int(x.shape[-1]),
        "norm_mean": stats.mean.tolist(),
        "norm_std": stats.std.tolist(),
    }
    neural.save_checkpoint(cfg.checkpoint, result.state, meta)
    history = cfg.out or str(_sibling(cfg.checkpoint, "_loss.csv"))
    write_rows(history, ["iteration", "loss"], [[i, repr(v)] for i, v in enumerate(result.history)])
    log.info("trained on %d subjects; final loss %.6f", len(prep.subjects), result.final_loss)
    return 0


def _load(cfg: RunConfig):
    _require(cfg, "input", "checkpoint")
    try:
        state, meta = neural.load_checkpoint(cfg.checkpoint)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read checkpoint: {exc}", EXIT_PARSE) from None
    mdict = dict(meta["model"])
    mdict["mean_interarrival"] = tuple(mdict["mean_interarrival"])
    mcfg = model.ModelConfig(**mdict)
    txlog = _read_log(cfg.input)
    procs = meta["processes"]
    if cfg.processes and list(cfg.processes) != procs:
        raise CliError(f"config processes {list(cfg.processes)} != checkpoint processes {procs}", EXIT_SHAPE)
    prep = prepare(txlog, cfg.train_end, procs, basket=meta["basket"] or None)
    if prep.features.shape[-1] != meta["n_inputs"]:
        raise CliError(
            f"data has {prep.features.shape[-1]} input channels, checkpoint expects {meta['n_inputs']}", EXIT_SHAPE
        )
    stats = NormStats(np.asarray(meta["norm_mean"]), np.asarray(meta["norm_std"]))
    x = normalize_features(prep.features, stats)
    return state, mcfg, prep, x


def cmd_predict(cfg: RunConfig):
    state, mcfg, prep, x = _load(cfg)
    if not prep.subjects:
        raise CliError("no subject has an arrival before train_end", EXIT_EMPTY)
    hit = model.predict_hit_probability(state, x, prep.tse_final, cfg.horizon, mcfg)
    point = model.predict_point(state, x, prep.tse_final, mcfg, "mode")
    col = "score" if mcfg.loss_mode == "sqloss" else "hit_probability"
    rows = []
    for i, s in enumerate(prep.subjects):
        for j, p in enumerate(prep.processes):
            rows.append([s, p, repr(float(hit[i, j])), repr(float(point[i, j])), int(prep.tse_final[i, j])])
    out = cfg.out or "predictions.csv"
    write_rows(out, ["subject_id", "process_id", col, "mode", "tse"], rows)
    return 0


def cmd_evaluate(cfg: RunConfig):
    state, mcfg, prep, x = _load(cfg)
    if not prep.subjects:
        raise CliError("no subject has an arrival before train_end", EXIT_EMPTY)
    txlog = _read_log(cfg.input)
    labels, actual = holdout_labels(txlog, prep.subjects, prep.processes, cfg.train_end, cfg.horizon)
    scores = model.predict_hit_probability(state, x, prep.tse_final, cfg.horizon, mcfg)
    point = model.predict_point(state, x, prep.tse_final, mcfg, "mode")
    rows, aucs = [], []
    for j, p in enumerate(prep.processes):
        pos = int(labels[:, j].sum())
        auc = ""
        if 0 < pos < len(prep.subjects):
            auc_v = roc_auc(scores[:, j], labels[:, j])
            aucs.append(auc_v)
            auc = repr(auc_v)
        seen = ~np.isnan(actual[:, j])
        rm = mc = ""
        if seen.any():
            rm = repr(rmse(point[seen, j], actual[seen, j]))
            mc = repr(mean_custom_loss(point[seen, j], actual[seen, j]))
        rows.append([p, len(prep.subjects), pos, auc, rm, mc])
    out = cfg.out or "report.csv"
    write_rows(out, ["process_id", "subjects", "positives", "roc_auc", "rmse", "mcl"], rows)
    summary = [mcfg.loss_mode, len(prep.processes), len(aucs)]
    summary += [repr(v) for v in auc_quantile_summary(aucs).as_row()] if aucs else [""] * 6
    write_rows(
        _sibling(out, "_summary.csv"),
        ["model", "processes", "processes_scored", "min", "q25", "q50", "q75", "max", "mean"],
        [summary],
    )
    return 0


GENERATOR_KEYS = {f.name for f in dataclasses.fields(datagen.GeneratorSpec)}


def load_generator_spec(path, seed=None) -> datagen.GeneratorSpec:
    try:
        raw = read_config(path)
        if seed is not None:
            raw["seed"] = str(seed)
        return _coerce(datagen.GeneratorSpec, raw)
    except (ParseError, OSError, ValueError, TypeError) as exc:
        raise CliError(f"invalid generator spec: {exc}", EXIT_PARSE) from None


def cmd_generate(args):
    if not args.config:
        raise CliError("generate needs --config <spec file>", EXIT_PARSE)
    spec = load_generator_spec(args.config, args.seed)
    ds = datagen.generate(spec)
    out = args.out or "transactions.csv"
    write_transactions(out, ds.to_transactions())
    write_rows(
        _sibling(out, "_truth.csv"),
        ["process_id", "scale", "shape", "covariate_effect"],
        [[datagen.process_id(i), repr(spec.scales[i]), repr(spec.shapes[i]), repr(spec.covariate_effect)] for i in range(spec.n_processes)],
    )
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="arrivalnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "predict", "evaluate", "generate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file")
        p.add_argument("--checkpoint")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        if name != "generate":
            p.add_argument("--input", help="transactions CSV")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "generate":
            return cmd_generate(args)
        cfg = load_run_config(args)
        return {"train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate}[args.command](cfg)
    except CliError as exc:
        print(f"arrivalnet {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())

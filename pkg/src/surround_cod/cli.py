"""Command-line entry point.

Subcommands: gen-surround, scct, sacloss, refine, eval, synth, train,
bench. Exit codes: 0 success, 2 usage error, 1 runtime error. Diagnostics
go to stderr; data goes to files or stdout. Randomized subcommands take
an explicit --seed so runs are reproducible.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import backend as _backend
from . import io as sio
from .bench import bench_sacloss
from .errors import SurroundCodError
from .metrics import evaluate_batch
from .refine import GuidanceBundle, refine_chain
from .sacloss import SacConfig, SamplingMode, SignConvention, sacloss_multi_layer
from .scct import ScctLayout, scct_forward, scct_inverse
from .surround import sigma_for_side, surrounding_label
from .synth import synth_sample
from .train import TrainConfig, train

_MODES = {m.value: m for m in SamplingMode}
_SIGNS = {s.value: s for s in SignConvention}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surround-cod",
        description="Surrounding-aware concealed object detection toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-surround", help="surrounding label from a binary mask image")
    p.add_argument("--gt", required=True, help="binary mask image (PGM/PNG, bytes 0/255)")
    p.add_argument("--sigma", type=float, required=True, help="halo width in pixels")
    p.add_argument("--out", required=True, help="output grayscale image")

    p = sub.add_parser("scct", help="stride-interleave a tensor (or invert it)")
    p.add_argument("--k", type=int, choices=(2, 3, 4), required=True)
    p.add_argument("--inverse", action="store_true")
    p.add_argument("--in", dest="infile", required=True, help="input SCT1 file")
    p.add_argument("--out", required=True, help="output SCT1 file")

    p = sub.add_parser("sacloss", help="contrastive loss of a feature map, JSON to stdout")
    p.add_argument("--features", required=True, help="SCT1 feature tensor")
    p.add_argument("--gt", required=True, help="binary mask image")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--mode", choices=sorted(_MODES), default="full")
    p.add_argument("--k", type=int, choices=(2, 3, 4), default=4, help="layer index")
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--sign", choices=sorted(_SIGNS), default="pull-background")

    p = sub.add_parser("refine", help="fold guidance tensors over a coarse map")
    p.add_argument("--coarse", required=True, help="SCT1 coarse map (1, H, W)")
    p.add_argument("--g-obj", action="append", default=[], help="SCT1 object guidance, repeat per layer (k = 4, 3, 2)")
    p.add_argument("--g-sur", action="append", default=[], help="SCT1 surrounding guidance, repeat per layer")
    p.add_argument("--out", required=True, help="output SCT1 file")

    p = sub.add_parser("eval", help="score a directory of predictions against masks")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True, help="report path (CSV)")
    p.add_argument("--json", action="store_true", help="also write a JSON report next to the CSV")

    p = sub.add_parser("synth", help="generate synthetic concealed-object samples")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--difficulty", type=float, default=0.5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", help="train the toy model from a key=value config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("bench", help="compare sampling strategies (and kernel backends)")
    p.add_argument("--h", type=int, default=64)
    p.add_argument("--w", type=int, default=64)
    p.add_argument("--c", type=int, default=16)
    p.add_argument("--k", type=int, choices=(2, 3, 4), default=3)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--all-backends", action="store_true")
    return parser


def _cmd_gen_surround(args) -> int:
    gt = sio.read_mask(args.gt)
    label = surrounding_label(gt, args.sigma)
    sio.write_gray(args.out, label.map)
    return 0


def _cmd_scct(args) -> int:
    tensor = sio.read_tensor(args.infile)
    layout = ScctLayout(args.k)
    out = scct_inverse(tensor, layout) if args.inverse else scct_forward(tensor, layout)
    sio.write_tensor(args.out, out)
    return 0


def _cmd_sacloss(args) -> int:
    features = sio.read_tensor(args.features)
    gt = sio.read_mask(args.gt)
    lm = surrounding_label(gt, args.sigma)
    cfg = SacConfig(
        margin=args.margin,
        surround_threshold=args.threshold,
        mode=_MODES[args.mode],
        sign_convention=_SIGNS[args.sign],
    )
    total, rows = sacloss_multi_layer([(features, args.k)], gt, lm.map, cfg, detail=True)
    print(json.dumps({"value": total, "mode": args.mode, "layers": rows}, indent=2))
    return 0


def _cmd_refine(args) -> int:
    coarse = sio.read_tensor(args.coarse)
    if coarse.shape[0] != 1:
        raise SurroundCodError(f"coarse map must have one channel, got {coarse.shape[0]}")
    g_obj = tuple(sio.read_tensor(p) for p in args.g_obj)
    g_sur = tuple(sio.read_tensor(p) for p in args.g_sur)
    refined = refine_chain(coarse[0], GuidanceBundle(g_obj=g_obj, g_sur=g_sur))
    sio.write_tensor(args.out, refined)
    return 0


def _cmd_eval(args) -> int:
    report = evaluate_batch(args.pred, args.gt)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_csv_text())
    if args.json:
        out.with_suffix(".json").write_text(json.dumps(report.to_json_obj(), indent=2))
    for stem in report.unmatched:
        print(f"unmatched stem: {stem}", file=sys.stderr)
    return 0


def _cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.n):
        sample = synth_sample(args.seed + i, args.side, args.difficulty)
        stem = f"{i:04d}"
        sio.write_image(out / f"{stem}_image.png", sample.image)
        sio.write_tensor(out / f"{stem}_image.sct", sample.image)
        sio.write_gray(out / f"{stem}_gt.pgm", sample.gt)
        sio.write_gray(out / f"{stem}_edge.pgm", sample.edge)
        sio.write_gray(out / f"{stem}_lm.pgm", sample.lm.map)
        sio.write_tensor(out / f"{stem}_lm.sct", sample.lm.map)
    return 0


def _parse_config(path: str):
    keys: dict = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SurroundCodError(f"bad config line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        keys[key] = value
    int_keys = {"decay_period", "max_epochs", "batch", "side", "seed", "holdout",
                "guide_channels", "n_train", "n_eval"}
    float_keys = {"lr0", "decay", "sigma", "w_coarse", "w_pred", "w_sac", "difficulty",
                  "sac_margin", "sac_threshold"}
    parsed: dict = {}
    for key, value in keys.items():
        if key in int_keys:
            parsed[key] = int(value)
        elif key in float_keys:
            parsed[key] = float(value)
        elif key == "channels":
            parsed[key] = tuple(int(v) for v in value.split(","))
        elif key in ("sac_mode", "sign"):
            parsed[key] = value
        elif key == "soft_surround_targets":
            parsed[key] = value.lower() in ("1", "true", "yes")
        else:
            raise SurroundCodError(f"unknown config key: {key}")
    if "seed" not in parsed:
        raise SurroundCodError("config must set seed=<int>")

    sac_mode = parsed.pop("sac_mode", "scct")
    if sac_mode == "off":
        sac = None
    else:
        sac = SacConfig(
            margin=parsed.pop("sac_margin", 0.0),
            surround_threshold=parsed.pop("sac_threshold", 0.1),
            mode=_MODES[sac_mode],
            sign_convention=_SIGNS[parsed.pop("sign", "pull-background")],
        )
    parsed.pop("sac_margin", None)
    parsed.pop("sac_threshold", None)
    parsed.pop("sign", None)
    n_train = parsed.pop("n_train", 8)
    n_eval = parsed.pop("n_eval", 4)
    difficulty = parsed.pop("difficulty", 0.35)
    cfg = TrainConfig(sac=sac, holdout=n_eval, **parsed)
    cfg_extra = {"n_train": n_train, "n_eval": n_eval, "difficulty": difficulty}
    return cfg, cfg_extra


def _cmd_train(args) -> int:
    cfg, extra = _parse_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = [
        synth_sample(cfg.seed + 1000 + i, cfg.side, extra["difficulty"], cfg.sigma)
        for i in range(extra["n_train"] + extra["n_eval"])
    ]
    model, curve, report = train(dataset, cfg)

    with open(out / "loss_curve.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "lr", "total", "coarse", "pred", "sac"])
        writer.writeheader()
        writer.writerows(curve)
    np.savez(out / "checkpoint.npz", **model.params)
    (out / "metrics.csv").write_text(report.to_csv_text())
    (out / "metrics.json").write_text(json.dumps(report.to_json_obj(), indent=2))
    print(
        json.dumps(
            {
                "params": model.param_count(),
                "final_loss": curve[-1]["total"],
                "holdout_s_alpha": report.means.s_alpha if report.means else None,
            }
        )
    )
    return 0


def _cmd_bench(args) -> int:
    backends = _backend.available_backends() if args.all_backends else None
    results = bench_sacloss(
        args.h, args.w, args.c, args.k, args.repeats, seed=args.seed, backends=backends
    )
    rows = [
        {
            "mode": r.mode.value,
            "backend": r.backend,
            "wall_time": r.wall_time,
            "distance_evals": r.distance_evals,
            "loss_value": r.loss_value,
        }
        for r in results
    ]
    print(json.dumps(rows, indent=2))
    return 0


_COMMANDS = {
    "gen-surround": _cmd_gen_surround,
    "scct": _cmd_scct,
    "sacloss": _cmd_sacloss,
    "refine": _cmd_refine,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "train": _cmd_train,
    "bench": _cmd_bench,
}


def run(argv) -> int:
    """Parse and execute; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help (0) and usage errors (2)
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (SurroundCodError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

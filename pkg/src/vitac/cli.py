"""Command line entry points for the full experiment pipeline.

Every subcommand reads the same TOML config (all optional, defaults apply)
plus repeatable ``--set section.key=value`` overrides, so a whole study is
reproducible from one file. Stages write into content-addressed run
directories unless an explicit output path is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .config import Experiment, load_config


def _experiment(args) -> Experiment:
    return load_config(args.config, args.set or ())


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, help="TOML config file (defaults used when omitted)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config entry, e.g. --set agent.lr=3e-4")


def cmd_collect(args) -> int:
    from .dataset import collect_pairs

    exp = _experiment(args)
    sec = exp.section("collect")
    out = Path(args.out) if args.out else exp.run_dir("data", sec["seed"])
    dataset = collect_pairs(
        exp.world, sec["n_sequences"], sec["seed"], out,
        probe_episodes=sec["probe_episodes"])
    exp.dump(out / "experiment.json")
    print(f"collected {len(dataset.sequences)} sequences -> {out}")
    return 0


def cmd_train_gen(args) -> int:
    from .dataset import load_dataset
    from .vtgen import train_generator

    exp = _experiment(args)
    sec = exp.section("vtgen")
    dataset = load_dataset(args.data)
    out_dir = Path(args.out) if args.out else exp.run_dir("vtgen", sec["seed"])
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "generator.vtac"
    gen, history, test_report = train_generator(
        dataset,
        epochs=sec["epochs"], batch_size=sec["batch_size"], seed=sec["seed"],
        lr=sec["lr"], frame_stride=sec["frame_stride"], lambda_pix=sec["lambda_pix"],
        eval_stride=sec["eval_stride"], out_path=ckpt, log=print)
    with open(out_dir / "history.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "loss", "val_psnr", "val_ssim"])
        writer.writeheader()
        writer.writerows(history)
    with open(out_dir / "test_report.json", "w") as fh:
        json.dump(test_report, fh, indent=2, sort_keys=True)
    exp.dump(out_dir / "experiment.json")
    print(f"generator -> {ckpt}")
    if test_report["ssim"] is not None:
        print(f"test psnr {test_report['psnr']:.2f} dB  ssim {test_report['ssim']:.4f}")
    return 0


def cmd_train_policy(args) -> int:
    from .experiments import write_curves_csv
    from .vtcon import run_vtcon_training, save_agent
    from .vtgen import load_generator

    exp = _experiment(args)
    sec = exp.section("train")
    gen = load_generator(args.gen) if args.gen else None
    if exp.agent.touch == "generated" and gen is None:
        print("error: agent.touch = 'generated' needs --gen CHECKPOINT", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else exp.run_dir("policy", sec["seed"])
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_vtcon_training(
        exp.world, exp.agent, steps=sec["steps"], seed=sec["seed"], gen=gen,
        log=print, log_every=sec["log_every"])
    save_agent(result.agent, out_dir / "agent.vtac")
    write_curves_csv(out_dir / "curves.csv", result.curves)
    exp.dump(out_dir / "experiment.json")
    print(f"agent -> {out_dir / 'agent.vtac'}  ({len(result.curves)} episodes)")
    return 0


def cmd_evaluate(args) -> int:
    from .experiments import evaluate, write_eval_csv
    from .vtcon import load_agent
    from .vtgen import load_generator

    exp = _experiment(args)
    sec = exp.section("evaluate")
    agent = load_agent(args.agent) if args.agent else None
    gen = load_generator(args.gen) if args.gen else None
    report = evaluate(
        agent, exp.world, episodes=sec["episodes"], seed=sec["seed"],
        threshold=sec["threshold"], gen=gen)
    for key, value in report.summary().items():
        print(f"{key}: {value}")
    if args.out:
        write_eval_csv(args.out, report)
        print(f"episodes -> {args.out}")
    return 0


def cmd_ablate(args) -> int:
    from .experiments import run_ablation, write_eval_csv
    from .vtgen import load_generator

    exp = _experiment(args)
    sec = exp.section("ablate")
    axis = args.axis or sec["axis"]
    gen = load_generator(args.gen) if args.gen else None
    seeds = sec["seeds"] if isinstance(sec["seeds"], (list, tuple)) else [sec["seeds"]]
    result = run_ablation(
        axis, exp.world, exp.agent, steps=sec["steps"], seeds=list(seeds),
        eval_episodes=sec["eval_episodes"], threshold=sec["threshold"],
        gen=gen, log=print)
    table = result.table()
    print(table)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "table.txt").write_text(table + "\n")
        for cell in result.cells:
            write_eval_csv(out_dir / f"{axis}-{cell.variant}-s{cell.seed}.csv", cell.report)
        exp.dump(out_dir / "experiment.json")
        print(f"table -> {out_dir / 'table.txt'}")
    return 0


def cmd_render_dataset(args) -> int:
    from .dataset import load_dataset, render_preview

    dataset = load_dataset(args.data)
    out = Path(args.out) if args.out else Path(args.data) / "preview"
    written = render_preview(dataset, out, max_sequences=args.max_sequences, stride=args.stride)
    print(f"wrote {len(written)} images -> {out}")
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import full_suite

    report = full_suite(seed=args.seed, log=print)
    print(f"worst max_rel_err {report.worst:.3e}")
    if not report.passed:
        print("gradient check FAILED", file=sys.stderr)
        return 1
    print("all gradient checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vitac",
        description="visual-tactile pushing lab: data collection, touch generation, RL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="record expert pushing episodes as paired sequences")
    _add_common(p)
    p.add_argument("--out", default=None, help="dataset directory")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train-gen", help="train the vision-to-touch generator")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset directory from 'collect'")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_train_gen)

    p = sub.add_parser("train-policy", help="train the contrastive visual-tactile SAC agent")
    _add_common(p)
    p.add_argument("--gen", default=None, help="frozen touch-generator checkpoint")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_train_policy)

    p = sub.add_parser("evaluate", help="roll a trained agent (or random policy) and report stats")
    _add_common(p)
    p.add_argument("--agent", default=None, help="agent checkpoint; omit for the random baseline")
    p.add_argument("--gen", default=None, help="touch-generator checkpoint for generated-touch agents")
    p.add_argument("--out", default=None, help="write per-episode CSV here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train and compare variants along one config axis")
    _add_common(p)
    p.add_argument("axis", nargs="?", default=None, choices=["fusion", "contrastive", "touch"],
                   help="config axis to sweep (default from config)")
    p.add_argument("--gen", default=None, help="touch-generator checkpoint if any variant needs it")
    p.add_argument("--out", default=None, help="write table and per-cell CSVs here")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("render-dataset", help="write PPM/PGM previews of a collected dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--max-sequences", type=int, default=4)
    p.add_argument("--stride", type=int, default=40)
    p.set_defaults(func=cmd_render_dataset)

    p = sub.add_parser("gradcheck", help="finite-difference check of every differentiable op")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    # progress lines should land promptly when stdout is a pipe or file
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(line_buffering=True)
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

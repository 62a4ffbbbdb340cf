"""Command-line entry point: ``pfsurrogate <command> ...``.

Exit codes: 0 success, 1 input/validation error, 2 AC non-convergence,
3 diverged training or too many rejected samples.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path

from . import acpf, dcpf
from .caseparse import CaseParseError, parse_case, validate
from .dataset import TooManyRejections, generate_samples, load_samples, save_samples
from .mlp import DivergedLoss
from .pipeline import Checkpoint, PipelineConfig, compare_model, evaluate, trace_csv, train_model

log = logging.getLogger("pfsurrogate")

DEFAULTS = {
    "solve-ac": {"tol": 1e-8, "max_iter": 30, "flat_start": True, "out": None},
    "solve-dc": {"out": None},
    "gen-data": {"count": 10000, "perturb": 0.1, "seed": 0, "out": None, "workers": 1,
                 "perturb_voltage": True, "tag": None},
    "train": {"epochs": 600, "learning_rate": 0.3, "batch_size": 64, "hidden": [64, 64, 64, 64, 64],
              "leak": 0.01, "seed": 0, "ratios": [0.8, 0.1, 0.1], "separate_heads": False, "out": None},
    "eval": {"out": None},
    "compare": {"thresholds": [50.0, 100.0, 150.0, 200.0], "out": None, "case": None},
}


class UsageError(Exception):
    pass


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfsurrogate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file of option values (flags take precedence)")
        return p

    p = add("solve-ac", "Newton-Raphson AC power flow of a MATPOWER case; JSON solution out")
    p.add_argument("case")
    p.add_argument("--tol", type=float, default=S, help="mismatch tolerance, pu (1e-8)")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=S, help="iteration cap (30)")
    p.add_argument("--no-flat-start", dest="flat_start", action="store_false", default=S,
                   help="start from the case file's Vm/Va")
    p.add_argument("--out", default=S, help="write JSON here instead of stdout")

    p = add("solve-dc", "DC power flow of a MATPOWER case; JSON solution out")
    p.add_argument("case")
    p.add_argument("--out", default=S)

    p = add("gen-data", "Generate an ACPF-labelled dataset (.pfds.json)")
    p.add_argument("case")
    p.add_argument("--count", type=int, default=S, help="number of samples (10000)")
    p.add_argument("--perturb", type=float, default=S, help="uniform +/- fraction (0.1)")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--workers", type=int, default=S, help="worker processes (1)")
    p.add_argument("--no-voltage-perturb", dest="perturb_voltage", action="store_false", default=S,
                   help="perturb demand only, keep voltage setpoints")
    p.add_argument("--tag", default=S, help="system tag (defaults to the case file stem)")
    p.add_argument("--out", default=S, help="output path (<case>.pfds.json)")

    p = add("train", "Train the surrogate on a dataset (.pfnn.json + trace CSV)")
    p.add_argument("dataset")
    p.add_argument("--epochs", type=int, default=S)
    p.add_argument("--lr", dest="learning_rate", type=float, default=S)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=S)
    p.add_argument("--hidden", type=_ints, default=S, help="comma-separated widths (64,64,64,64,64)")
    p.add_argument("--leak", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--ratios", type=_floats, default=S, help="train,val,test (0.8,0.1,0.1)")
    p.add_argument("--separate-heads", dest="separate_heads", action="store_true", default=S,
                   help="train separate voltage and flow networks")
    p.add_argument("--out", default=S, help="checkpoint path (<dataset>.pfnn.json)")

    p = add("eval", "Test-split accuracy of a trained checkpoint")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--out", default=S)

    p = add("compare", "NN vs DCPF report against ACPF on the test split")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--thresholds", type=_floats, default=S, help="MW levels (50,100,150,200)")
    p.add_argument("--case", default=S, help="case file, if the dataset lacks embedded case text")
    p.add_argument("--out", default=S, help="directory for report.txt/.json/.csv")
    return parser


def resolve(args) -> dict:
    """Merge defaults < config file < flags."""
    cfg = dict(DEFAULTS[args.command])
    given = vars(args)
    if given.get("config"):
        path = Path(given["config"])
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        from_file = json.loads(path.read_text())
        unknown = set(from_file) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(from_file)
    cfg.update({k: v for k, v in given.items() if k not in ("command", "config", "verbose")})
    return cfg


@contextmanager
def timed(label):
    start = time.perf_counter()
    yield
    print(f"[time] {label}: {time.perf_counter() - start:.3f} s", file=sys.stderr)


def _echo(command, cfg):
    print(f"[config] {command} {json.dumps(cfg, sort_keys=True)}", file=sys.stderr)


def _read_case(path):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"case file not found: {p}")
    text = p.read_text(encoding="utf-8")
    net = parse_case(text)
    errors = [d for d in validate(net) if d.severity == "error"]
    if errors:
        raise UsageError("; ".join(d.message for d in errors))
    return net, text


def _emit(doc_text: str, out):
    if out:
        Path(out).write_text(doc_text)
    else:
        sys.stdout.write(doc_text)


def _require(path, what):
    if not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")


def cmd_solve_ac(cfg):
    net, _ = _read_case(cfg["case"])
    opts = acpf.SolverOptions(tol=cfg["tol"], max_iter=cfg["max_iter"], flat_start=cfg["flat_start"])
    with timed("solve-ac"):
        sol = acpf.solve_nr(net, opts)
    _emit(json.dumps(acpf.solution_to_dict(net, sol), indent=2) + "\n", cfg["out"])


def cmd_solve_dc(cfg):
    net, _ = _read_case(cfg["case"])
    with timed("solve-dc"):
        sol = dcpf.solve_dc(net)
    _emit(json.dumps(dcpf.solution_to_dict(net, sol), indent=2) + "\n", cfg["out"])


def cmd_gen_data(cfg):
    net, text = _read_case(cfg["case"])
    stem = Path(cfg["case"]).stem
    tag = cfg["tag"] or stem
    out = cfg["out"] or f"{stem}.pfds.json"
    with timed("gen-data"):
        samples = generate_samples(net, cfg["count"], cfg["perturb"], cfg["seed"],
                                   perturb_voltage=cfg["perturb_voltage"], workers=cfg["workers"],
                                   system_tag=tag, case_text=text)
    save_samples(samples, out)
    print(f"wrote {len(samples)} samples ({samples.meta['rejected']} rejected draws) to {out}",
          file=sys.stderr)


def cmd_train(cfg):
    _require(cfg["dataset"], "dataset")
    samples = load_samples(cfg["dataset"])
    config = PipelineConfig(hidden=tuple(cfg["hidden"]), leak=cfg["leak"],
                            learning_rate=cfg["learning_rate"], batch_size=cfg["batch_size"],
                            epochs=cfg["epochs"], seed=cfg["seed"], ratios=tuple(cfg["ratios"]),
                            separate_heads=cfg["separate_heads"])
    out = Path(cfg["out"] or str(cfg["dataset"]).replace(".pfds.json", "") + ".pfnn.json")

    def progress(epoch, tr, va):
        if epoch == 1 or epoch % 50 == 0 or epoch == config.epochs:
            print(f"epoch {epoch:5d} train_mse {tr:.6e} val_mse {va:.6e}", file=sys.stderr)

    with timed("train"):
        ckpt, traces = train_model(samples, config, on_epoch=progress)
    ckpt.save(out)
    trace_path = out.with_name(out.name.replace(".pfnn.json", "") + ".trace.csv")
    trace_path.write_text(trace_csv(traces))
    print(f"wrote {out} and {trace_path}", file=sys.stderr)


def cmd_eval(cfg):
    _require(cfg["model"], "model")
    _require(cfg["dataset"], "dataset")
    ckpt, samples = Checkpoint.load(cfg["model"]), load_samples(cfg["dataset"])
    with timed("eval"):
        result = evaluate(ckpt, samples)
    _emit(json.dumps(result, indent=2) + "\n", cfg["out"])


def cmd_compare(cfg):
    _require(cfg["model"], "model")
    _require(cfg["dataset"], "dataset")
    ckpt, samples = Checkpoint.load(cfg["model"]), load_samples(cfg["dataset"])
    net = _read_case(cfg["case"])[0] if cfg["case"] else None
    with timed("compare"):
        report = compare_model(ckpt, samples, cfg["thresholds"], net)
    text = report.to_text()
    sys.stdout.write(text)
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        (out / "report.json").write_text(report.to_json())
        (out / "errors.csv").write_text(report.to_csv())
        print(f"wrote report.txt, report.json, errors.csv to {out}", file=sys.stderr)


COMMANDS = {
    "solve-ac": cmd_solve_ac,
    "solve-dc": cmd_solve_dc,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        _echo(args.command, cfg)
        COMMANDS[args.command](cfg)
    except acpf.NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergedLoss, TooManyRejections) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (UsageError, CaseParseError, OSError, ValueError, KeyError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``qevote <command> ...``.

Exit status is 0 on success, 1 when an experiment fails its check or a
replay does not reproduce, and 2 on configuration or usage errors.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from .. import adversary as adv
from .. import election as el
from .. import transcript as tr
from ..errors import ConfigError, QevoteError
from . import bounds as bnd
from . import experiments as ex
from .inputs import ElectionInput, load_input

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

EXPERIMENTS = ("t1", "t2", "t3", "correctness", "privacy", "logicalor", "example", "verify")


def default_seed(fallback=0):
    raw = os.environ.get("QEVOTE_SEED")
    if raw is None or raw == "":
        return fallback
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"QEVOTE_SEED must be an integer, got {raw!r}") from exc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_bounds(args, out):
    if args.config:
        config = load_input(args.config).config
    else:
        config = el.ElectionConfig(args.n, epsilon=args.epsilon, delta=args.delta, eta=args.eta,
                                   gamma=args.gamma, sigma=args.sigma, lam=args.lam,
                                   candidates=args.candidates, amplification_rounds=args.q)
    b = bnd.compute_bounds(config)
    out.write("parameters: " + " ".join(f"{k}={v}" for k, v in b.params.items()) + "\n")
    for name, value, raw in b.table():
        extra = ""
        if raw != "" and raw != value:
            extra = f"  (raw {raw:.6g})"
        out.write(f"{name:28s} {value:.6g}{extra}\n")
    for note in b.notes:
        out.write(f"note: {note}\n")
    return EXIT_OK


def _run_input(inp, level):
    transcript = tr.Transcript(level)
    name = next(k for k, v in tr.LEVELS.items() if v == level)
    transcript.emit(tr.SUMMARY, 0, 0, "run.input", payload=inp.compact(), step=name)
    outcome = inp.run(transcript)
    return outcome, transcript


def cmd_run(args, out):
    inp = load_input(args.input)
    if args.seed is not None:
        inp = inp.with_seed(args.seed)
    elif os.environ.get("QEVOTE_SEED"):
        inp = inp.with_seed(default_seed())
    level = tr.LEVELS[args.level]
    if level == tr.OFF:
        raise ConfigError("run needs a transcript level of at least 'summary' so it can be replayed")
    outcome, transcript = _run_input(inp, level)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    transcript.write(outdir / "transcript.txt")
    (outdir / "outcome.txt").write_text(outcome.record(), encoding="utf-8")
    out.write(outcome.record())
    out.write(f"outcome_hash={outcome.digest()}\n")
    return EXIT_OK


def replay(transcript_path, outcome_path=None):
    """Re-execute the run recorded in a transcript. Returns ``(identical, message)``."""
    recorded = tr.Transcript.read(transcript_path)
    if not recorded.events or recorded.events[0].kind != "run.input":
        raise ConfigError(f"{transcript_path}: first event must be run.input")
    inp = ElectionInput.from_mapping(json.loads(recorded.events[0].payload))
    level = tr.LEVELS.get(recorded.events[0].step)
    if level is None:
        raise ConfigError(f"{transcript_path}: unknown recording level {recorded.events[0].step!r}")
    outcome, transcript = _run_input(inp, level)
    if transcript.text() != Path(transcript_path).read_text(encoding="utf-8"):
        return False, "transcript differs", outcome
    if outcome_path is None:
        outcome_path = Path(transcript_path).with_name("outcome.txt")
    if Path(outcome_path).exists() and Path(outcome_path).read_text(encoding="utf-8") != outcome.record():
        return False, "outcome record differs", outcome
    return True, "identical", outcome


def cmd_replay(args, out):
    ok, message, outcome = replay(args.transcript, args.outcome)
    out.write(f"replay: {message}\n")
    out.write(f"outcome_hash={outcome.digest()}\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_fig1(args, out):
    board, e, tally = el.worked_example()
    out.write("B =\n")
    for row in board.rows:
        out.write("  " + " ".join(str(b) for b in row) + "\n")
    out.write("E = (" + ",".join(str(b) for b in e.e) + ")\n")
    out.write("T = (" + ",".join(str(c) for c in tally.counts) + ")\n")
    out.write(f"winner = {tally.winner}\n")
    return EXIT_OK


def _experiment(name, args):
    seed = args.seed
    t = args.trials
    if name == "t1":
        coins = 12 if args.full else 6
        config = el.ElectionConfig(4, epsilon=0.6, delta=0.05, eta=0.001, coins=coins)
        return [ex.experiment_theorem1(config, t or (100 if args.full else 1000), seed)]
    if name == "t2":
        return [ex.experiment_theorem2(seed=seed)]
    if name == "t3":
        return [ex.experiment_theorem3(4, eps, t or 100_000, seed) for eps in (0.3, 0.6)]
    if name == "verify":
        return [ex.experiment_verification(4, eps, t or 100_000, seed) for eps in (0.3, 0.6)]
    if name == "correctness":
        config = el.ElectionConfig(4, epsilon=0.1, delta=0.001, eta=0.001, gamma=3, sigma=1)
        trials = t or 10_000
        return [ex.experiment_correctness(config, trials, seed=seed),
                ex.experiment_correctness(config, trials, inject=args.inject, seed=seed + 1)]
    if name == "privacy":
        coalition = adv.Coalition(frozenset({0}), 4)
        return [ex.experiment_privacy(4, 0.6, coalition, t or 10_000, seed, amplification=1),
                ex.experiment_privacy(4, 0.6, coalition, t or 10_000, seed + 1, amplification=5)]
    if name == "logicalor":
        return [ex.experiment_logicalor(trials=t or 100_000, seed=seed)]
    if name == "example":
        return [ex.experiment_example()]
    raise ConfigError(f"unknown experiment {name!r}")


def cmd_experiment(args, out):
    reports = _experiment(args.name, args)
    for rep in reports:
        out.write(rep.text())
    if args.json:
        Path(args.json).write_text(json.dumps([r.to_dict() for r in reports], indent=2), encoding="utf-8")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="qevote", description="Simulate and analyse GHZ-based anonymous elections.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="print closed-form parameters for a configuration")
    b.add_argument("--config", help="election input file (JSON)")
    b.add_argument("--n", type=int, default=4)
    b.add_argument("--epsilon", type=float, default=0.6)
    b.add_argument("--delta", type=float, default=0.05)
    b.add_argument("--eta", type=float, default=0.001)
    b.add_argument("--gamma", type=int, default=3)
    b.add_argument("--sigma", type=int, default=1)
    b.add_argument("--lambda", dest="lam", type=float, default=0.1)
    b.add_argument("--candidates", type=int, default=2)
    b.add_argument("--q", type=int, default=15, help="amplification rounds")
    b.set_defaults(func=cmd_bounds)

    r = sub.add_parser("run", help="run one election from an input file")
    r.add_argument("input")
    r.add_argument("--out", default="qevote-run")
    r.add_argument("--level", choices=[k for k in tr.LEVELS if k != "off"], default="public")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="re-execute a recorded run and compare")
    rp.add_argument("transcript")
    rp.add_argument("--outcome", help="outcome record to compare (default: outcome.txt next to the transcript)")
    rp.set_defaults(func=cmd_replay)

    e = sub.add_parser("experiment", help="run a named experiment")
    e.add_argument("name", choices=EXPERIMENTS)
    e.add_argument("--trials", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--full", action="store_true", help="use the full coin count in t1 (slow)")
    e.add_argument("--inject", type=int, default=2, help="wrong rows injected in the soundness check")
    e.add_argument("--json", help="also write the reports as JSON to this path")
    e.set_defaults(func=cmd_experiment)

    f = sub.add_parser("fig1", help="rebuild the four-agent worked example")
    f.set_defaults(func=cmd_fig1)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if getattr(args, "seed", None) is None and args.command == "experiment":
            args.seed = default_seed()
        return args.func(args, out)
    except ConfigError as exc:
        sys.stderr.write(f"qevote: configuration error: {exc}\n")
        return EXIT_CONFIG
    except (QevoteError, OSError) as exc:
        sys.stderr.write(f"qevote: error: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

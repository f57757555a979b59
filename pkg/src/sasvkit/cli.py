"""Command-line entry points: synth | train | score | evaluate | fuse.

Exit codes: 0 success, 1 usage error, 2 data/validation error (the
message names the offending file, line or trial), 3 numeric failure
(diverged training). Every run writes a ``config.resolved.cfg`` echo of
its fully resolved configuration next to its outputs, and no subcommand
mutates its inputs.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .cm import CountermeasureClassifier
from .embeddings import read_embedding_store, write_embedding_store
from .exceptions import ConfigInvalidError, NonFiniteLossError, SasvError
from .heads import make_head
from .metrics import COST_PRESETS, evaluate
from .model_io import load_model, save_model
from .pipeline import branch_scores, cm_training_set, features_for_trials, score_trials, trial_targets
from .scores import fuse_scores, read_scores, write_scores
from .synth import SynthConfig, generate_corpus
from .trials import build_enrollment, read_enrollment_map, read_trials, write_enrollment_map, write_trials

CLI_STRATEGIES = {
    "tdt1": "matrix_linear",
    "tdtd": "diag_zero",
    "tdtm": "prob_product",
    "scoresum": "score_sum",
    "concat": "concat",
    "conv": "conv",
    "attn": "attention",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stage_seeds(seed):
    state = np.random.SeedSequence(int(seed)).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def _cmd_synth(args):
    resolved = cfgmod.resolve_config(
        "synth",
        args.config,
        {
            "n_speakers": args.n_speakers,
            "utts_per_speaker": args.utts_per_speaker,
            "spoof_fraction": args.spoof_fraction,
            "dim": args.dim,
            "within_std": args.within_std,
            "cm_gap": args.cm_gap,
            "cm_std": args.cm_std,
            "seed": args.seed,
            "n_enroll": args.n_enroll,
            "max_trials": args.max_trials,
        },
    )
    out = _out_dir(args)
    corpus_cfg = SynthConfig(**resolved)
    asv, cm, trials, enroll = generate_corpus(corpus_cfg)
    write_embedding_store(asv, out / "asv.semb")
    write_embedding_store(cm, out / "cm.semb")
    write_trials(trials, out / "trials.txt")
    write_enrollment_map(enroll, out / "enroll.txt")
    cfgmod.echo_config({"command": "synth", **resolved}, out / "config.resolved.cfg")
    return 0


def _head_kwargs(strategy, resolved, head_seed):
    kwargs = {
        "normalize_asv": resolved["normalize_asv"],
        "seed": head_seed,
    }
    if strategy in ("matrix_linear", "diag_zero", "attention"):
        kwargs["expansion"] = resolved["expansion"]
        kwargs["joint"] = resolved["joint"]
    if strategy == "conv":
        kwargs["channels"] = resolved["channels"]
        kwargs["joint"] = resolved["joint"]
    if strategy == "concat":
        kwargs["hidden_sizes"] = tuple(
            int(s) for s in resolved["hidden_sizes"].split(",") if s.strip()
        )
    if strategy == "score_sum":
        kwargs["minmax_normalize"] = resolved["minmax_normalize"]
    if strategy in ("prob_product", "score_sum"):
        kwargs.pop("seed")
    else:
        for key in ("lr", "epochs", "batch_size", "momentum"):
            if resolved[key] is not None:
                kwargs[key] = resolved[key]
        kwargs["bce_weights"] = (resolved["bce_neg"], resolved["bce_pos"])
        kwargs["prob_epsilon"] = resolved["prob_epsilon"]
    return kwargs


def _cmd_train(args):
    flag_values = {
        key: getattr(args, key)
        for key in cfgmod.TRAIN_KEYS
        if hasattr(args, key)
    }
    resolved = cfgmod.resolve_config("train", args.config, flag_values)
    if resolved["strategy"] not in CLI_STRATEGIES:
        raise ConfigInvalidError(
            "strategy", f"expected one of {sorted(CLI_STRATEGIES)}, got {resolved['strategy']!r}"
        )
    strategy = CLI_STRATEGIES[resolved["strategy"]]
    out = _out_dir(args)

    asv_store = read_embedding_store(args.asv_store)
    cm_store = read_embedding_store(args.cm_store)
    trials = read_trials(args.trials)
    enroll_map = read_enrollment_map(args.enroll)
    enroll_store = build_enrollment(enroll_map, asv_store)

    cm_seed, head_seed = _stage_seeds(resolved["seed"])
    _, X_cm, y_cm, X_spk = cm_training_set(trials, cm_store, asv_store)
    cm_model = CountermeasureClassifier(
        margin=resolved["aam_margin"],
        scale=resolved["aam_scale"],
        orth_lambda=resolved["orth_lambda"],
        assist=resolved["assist"],
        lr=resolved["cm_lr"],
        epochs=resolved["cm_epochs"],
        batch_size=resolved["cm_batch_size"],
        momentum=resolved["cm_momentum"],
        seed=cm_seed,
    )
    cm_model.fit(X_cm, y_cm, speaker=X_spk if resolved["assist"] else None)

    head = make_head(strategy, cm_model=cm_model, **_head_kwargs(strategy, resolved, head_seed))
    X = features_for_trials(trials, asv_store, cm_store, enroll_store)
    head.fit(X, trial_targets(trials))

    save_model(head, out / "model.json")
    report = {"cm": cm_model.report_.to_dict()}
    if head.report_ is not None:
        report["head"] = head.report_.to_dict()
    (out / "train_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    # echo the hyperparameters the estimators actually used
    effective = dict(resolved)
    for key in ("lr", "epochs", "batch_size", "momentum"):
        if effective[key] is None:
            effective[key] = head.get_params().get(key, "unused")
    cfgmod.echo_config(
        {
            "command": "train",
            "asv_store": args.asv_store,
            "cm_store": args.cm_store,
            "trials": args.trials,
            "enroll": args.enroll,
            **effective,
        },
        out / "config.resolved.cfg",
    )
    return 0


def _cmd_score(args):
    resolved = cfgmod.resolve_config("score", args.config, {"emit_branch": args.emit_branch})
    out = _out_dir(args)
    head = load_model(args.model)
    asv_store = read_embedding_store(args.asv_store)
    cm_store = read_embedding_store(args.cm_store)
    trials = read_trials(args.trials)
    enroll_map = read_enrollment_map(args.enroll)
    enroll_store = build_enrollment(enroll_map, asv_store)

    records = score_trials(head, trials, asv_store, cm_store, enroll_store)
    write_scores(records, out / "scores.tsv")
    if resolved["emit_branch"]:
        if head.cm_model_ is None:
            raise ConfigInvalidError("emit_branch", "model carries no countermeasure parameters")
        asv_records, cm_records = branch_scores(head.cm_model_, trials, asv_store, cm_store, enroll_store)
        write_scores(asv_records, out / "asv_scores.tsv")
        write_scores(cm_records, out / "cm_scores.tsv")
    cfgmod.echo_config(
        {
            "command": "score",
            "model": args.model,
            "asv_store": args.asv_store,
            "cm_store": args.cm_store,
            "trials": args.trials,
            "enroll": args.enroll,
            **resolved,
        },
        out / "config.resolved.cfg",
    )
    return 0


def _cmd_evaluate(args):
    resolved = cfgmod.resolve_config(
        "evaluate", args.config, {"tdcf": args.tdcf, "det": args.det}
    )
    out = _out_dir(args)
    trials = read_trials(args.trials)
    scores = read_scores(args.scores)

    cost_model = None
    asv_scores = cm_scores = None
    if resolved["tdcf"]:
        preset = resolved["tdcf"]
        if preset not in COST_PRESETS:
            raise ConfigInvalidError("tdcf", f"unknown preset {preset!r}, have {sorted(COST_PRESETS)}")
        if not args.asv_scores or not args.cm_scores:
            raise ConfigInvalidError("tdcf", "tandem cost needs --asv-scores and --cm-scores")
        cost_model = COST_PRESETS[preset]
        asv_scores = read_scores(args.asv_scores)
        cm_scores = read_scores(args.cm_scores)

    report = evaluate(
        trials,
        scores,
        cost_model=cost_model,
        asv_scores=asv_scores,
        cm_scores=cm_scores,
        with_det=resolved["det"],
    )
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    if resolved["det"]:
        for name, points in report.det.items():
            lines = [f"{thr:.8f}\t{far:.8f}\t{frr:.8f}" for thr, far, frr in points]
            (out / f"det_{name}.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    cfgmod.echo_config(
        {"command": "evaluate", "trials": args.trials, "scores": args.scores, **resolved},
        out / "config.resolved.cfg",
    )
    sys.stdout.write(report.to_text())
    return 0


def _cmd_fuse(args):
    resolved = cfgmod.resolve_config("fuse", args.config, {"weights": args.weights})
    if not resolved["weights"]:
        raise ConfigInvalidError("weights", "comma-separated weights are required")
    weights = [float(w) for w in resolved["weights"].split(",") if w.strip()]
    out = _out_dir(args)
    score_sets = [read_scores(path) for path in args.score_files]
    fused = fuse_scores(score_sets, weights)
    write_scores(fused, out / "fused.tsv")
    cfgmod.echo_config(
        {
            "command": "fuse",
            "score_files": ",".join(args.score_files),
            "weights": resolved["weights"],
        },
        out / "config.resolved.cfg",
    )
    return 0


def build_parser():
    parser = _Parser(prog="sasvkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic corpus")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-speakers", dest="n_speakers", type=int)
    p.add_argument("--utts-per-speaker", dest="utts_per_speaker", type=int)
    p.add_argument("--spoof-fraction", dest="spoof_fraction", type=float)
    p.add_argument("--dim", type=int)
    p.add_argument("--within-std", dest="within_std", type=float)
    p.add_argument("--cm-gap", dest="cm_gap", type=float)
    p.add_argument("--cm-std", dest="cm_std", type=float)
    p.add_argument("--n-enroll", dest="n_enroll", type=int)
    p.add_argument("--max-trials", dest="max_trials", type=int)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="two-stage training of a scoring system")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--asv-store", required=True)
    p.add_argument("--cm-store", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--enroll", required=True)
    p.add_argument("--strategy", choices=sorted(CLI_STRATEGIES))
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--momentum", type=float)
    p.add_argument("--bce-neg", dest="bce_neg", type=float)
    p.add_argument("--bce-pos", dest="bce_pos", type=float)
    p.add_argument("--prob-epsilon", dest="prob_epsilon", type=float)
    p.add_argument("--normalize-asv", dest="normalize_asv", action="store_true", default=None)
    p.add_argument("--no-normalize-asv", dest="normalize_asv", action="store_false", default=None)
    p.add_argument("--expansion", choices=["matrix", "printed"])
    p.add_argument("--channels", type=int)
    p.add_argument("--hidden-sizes", dest="hidden_sizes")
    p.add_argument("--minmax-normalize", dest="minmax_normalize", action="store_true", default=None)
    p.add_argument("--joint", action="store_true", default=None)
    p.add_argument("--assist", action="store_true", default=None)
    p.add_argument("--cm-lr", dest="cm_lr", type=float)
    p.add_argument("--cm-epochs", dest="cm_epochs", type=int)
    p.add_argument("--cm-batch-size", dest="cm_batch_size", type=int)
    p.add_argument("--cm-momentum", dest="cm_momentum", type=float)
    p.add_argument("--aam-margin", dest="aam_margin", type=float)
    p.add_argument("--aam-scale", dest="aam_scale", type=float)
    p.add_argument("--orth-lambda", dest="orth_lambda", type=float)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("score", help="score trials with a trained model")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--asv-store", required=True)
    p.add_argument("--cm-store", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--enroll", required=True)
    p.add_argument("--emit-branch", dest="emit_branch", action="store_true", default=None)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("evaluate", help="three-EER report (and optional tandem cost)")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--tdcf")
    p.add_argument("--asv-scores", dest="asv_scores")
    p.add_argument("--cm-scores", dest="cm_scores")
    p.add_argument("--det", action="store_true", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("fuse", help="weighted score-level fusion")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--weights")
    p.add_argument("score_files", nargs="+")
    p.set_defaults(func=_cmd_fuse)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteLossError as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return 3
    except SasvError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())

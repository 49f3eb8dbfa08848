"""Command-line front end: one executable, config-file driven subcommands.

Exit codes: 0 success, 1 usage error (usage text on stderr), 2 data/config
error (the message names the offending file or field).

Subcommands::

    gen-synth       write synthetic participant directories
    features        extract engineered-feature CSVs per participant
    augment         expand train sets on disk (WAV + CSV mirrors)
    select          rank features by forest importance, write rankings
    train           fit one model per participant, save pipeline checkpoints
    evaluate        score saved checkpoints on the test split
    grid-search     full sweep -> report.json / accuracy.csv
    stability       hyperparameter + seed stability studies -> CSVs
    report          interpretability: feature tally + confusion aggregate
    gradient-check  verify analytic gradients against finite differences

A JSON config file can predefine any experiment field; flags override file
values and unknown config keys produce a warning naming them.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .audio_io import generate_synthetic, load_participant, write_participant_dir
from .augment import default_waveform_plan, expand_dataset
from .dsp import FEATURE_NAMES, MEL_BAND_CHOICES, feature_matrix
from .errors import VocalPercError
from .featsel import SELECT_K_CHOICES, forest_importances, select_top_k
from .nn.gradcheck import format_report, gradient_check

CLI_MODEL_NAMES = {
    "mlp": "mlp",
    "cnn": "cnn",
    "tcnn": "tcnn",
    "rf": "rforest",
    "knn": "knn",
    "svm-linear": "svm_linear",
    "svm-rbf": "svm_rbf",
    "dtree": "dtree",
    "adaboost": "adaboost",
    "gnb": "gnb",
    "qda": "qda",
    "slp": "slp",
}

KNOWN_CONFIG_KEYS = {
    "participants", "model", "grid", "n_bands", "select_k", "augment",
    "augment_plan", "batch_size", "seed", "jobs", "out", "data", "n_seeds",
    "candidate",
}


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="vocalperc", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p, data=False, out=True, model=False):
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="master RNG seed")
        if data:
            p.add_argument("--data", type=Path, help="participant directory or root of them")
        if out:
            p.add_argument("--out", type=Path, help="output directory")
        if model:
            p.add_argument("--model", choices=sorted(CLI_MODEL_NAMES), default=None)
            p.add_argument("--mel-bands", type=int, choices=MEL_BAND_CHOICES, default=None)
            p.add_argument("--select-k", type=int, choices=SELECT_K_CHOICES, default=None)
            p.add_argument(
                "--augment", choices=ex.AUGMENT_MODES, default=None,
                help="augmentation applied to train sets",
            )
        p.add_argument("--jobs", type=int, default=None, help="parallel workers")
        p.add_argument(
            "--deterministic", action="store_true",
            help="force sequential execution (jobs=1)",
        )

    p = sub.add_parser("gen-synth", help="write synthetic participant directories")
    common(p)
    p.add_argument("--participants", type=int, default=8)
    p.add_argument("--per-class", type=int, default=25)

    p = sub.add_parser("features", help="extract engineered-feature CSVs")
    common(p, data=True)
    p.add_argument("--select-k", type=int, choices=SELECT_K_CHOICES, default=None)

    p = sub.add_parser("augment", help="expand train sets on disk (waveform only)")
    common(p, data=True)
    p.add_argument(
        "--augment", choices=ex.AUGMENT_MODES, default="waveform",
        help="only 'waveform' output can be cached as WAV mirrors",
    )

    p = sub.add_parser("select", help="rank features by forest importance")
    common(p, data=True)
    p.add_argument("--select-k", type=int, choices=SELECT_K_CHOICES, default=8)

    p = sub.add_parser("train", help="fit one model per participant")
    common(p, data=True, model=True)

    p = sub.add_parser("evaluate", help="score saved checkpoints on test splits")
    common(p, data=True)
    p.add_argument("--checkpoints", type=Path, help="directory with *_pipeline.json")

    p = sub.add_parser("grid-search", help="hyperparameter sweep and report")
    common(p, data=True, model=True)

    p = sub.add_parser("stability", help="hyperparameter and seed stability studies")
    common(p, data=True, model=True)
    p.add_argument("--n-seeds", type=int, default=None, help="seed-study size (default 30)")

    p = sub.add_parser("report", help="interpretability report")
    common(p, data=True, model=True)

    p = sub.add_parser("gradient-check", help="verify analytic gradients")
    common(p, out=False)
    p.add_argument("--trials", type=int, default=100)

    return parser


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def load_config_file(path: Path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise VocalPercError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise VocalPercError(f"{path}: invalid JSON ({err})") from None
    unknown = sorted(set(raw) - KNOWN_CONFIG_KEYS)
    if unknown:
        print(f"warning: unknown config keys: {', '.join(unknown)}", file=sys.stderr)
    return raw


def _merged(args, defaults: dict) -> dict:
    """File values first, then non-None flags override."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        merged.update(load_config_file(args.config))
    for flag, key in (
        ("seed", "seed"), ("out", "out"), ("data", "data"), ("jobs", "jobs"),
        ("model", "model"), ("mel_bands", "n_bands"), ("select_k", "select_k"),
        ("augment", "augment"), ("n_seeds", "n_seeds"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            merged[key] = value
    if getattr(args, "deterministic", False):
        merged["jobs"] = 1
    return merged


def discover_participants(data_dir: Path) -> list[Path]:
    data_dir = Path(data_dir)
    if (data_dir / "improv.wav").exists():
        return [data_dir]
    children = sorted(p for p in data_dir.iterdir() if (p / "improv.wav").exists())
    if not children:
        raise VocalPercError(
            f"{data_dir}: no participant directories found (need improv.wav)"
        )
    return children


def _participant_specs(merged: dict) -> tuple:
    if merged.get("data"):
        return tuple(
            ex.ParticipantSpec(path=str(p)) for p in discover_participants(Path(merged["data"]))
        )
    participants = merged.get("participants")
    if not participants:
        raise VocalPercError("no participants: pass --data or list them in the config")
    return tuple(ex.ParticipantSpec.from_dict(d) for d in participants)


def _experiment_config(merged: dict) -> ex.ExperimentConfig:
    model_name = merged.get("model")
    if not model_name:
        raise VocalPercError("no model: pass --model or set it in the config")
    model = CLI_MODEL_NAMES.get(model_name, model_name)
    grid = merged.get("grid") or ex.default_model_grid(model)
    return ex.ExperimentConfig(
        participants=_participant_specs(merged),
        model=model,
        grid=tuple(grid),
        n_bands=merged.get("n_bands", 12),
        select_k=merged.get("select_k"),
        augment=merged.get("augment", "none"),
        augment_plan=merged.get("augment_plan"),
        batch_size=merged.get("batch_size"),
        seed=merged.get("seed", 0),
        jobs=merged.get("jobs", 1),
    )


def _out_dir(merged: dict) -> Path:
    out = merged.get("out")
    if not out:
        raise VocalPercError("no output directory: pass --out or set it in the config")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_gen_synth(args) -> int:
    merged = _merged(args, {"seed": 0})
    out = _out_dir(merged)
    seed = merged.get("seed", 0)
    for i in range(args.participants):
        sub_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        pid = f"p{i:02d}"
        train, test = generate_synthetic(sub_seed, args.per_class, pid)
        write_participant_dir(out / pid, train, test)
    print(f"wrote {args.participants} participant directories under {out}")
    return 0


def _cmd_features(args) -> int:
    merged = _merged(args, {})
    out = _out_dir(merged)
    for directory in discover_participants(Path(merged.get("data") or ".")):
        train, test = load_participant(directory)
        pid = directory.name
        for split, ds in (("train", train), ("test", test)):
            X = feature_matrix(ds.clips)
            path = out / f"{pid}_{split}_features.csv"
            from .dsp import export_feature_csv

            export_feature_csv(path, X, ds.labels)
        print(f"{pid}: {len(train)} train / {len(test)} test utterances")
    return 0


def _cmd_augment(args) -> int:
    merged = _merged(args, {"seed": 0, "augment": "waveform"})
    mode = merged.get("augment", "waveform")
    if mode != "waveform":
        raise VocalPercError(
            f"augment mode {mode!r} cannot be cached as WAV mirrors; only "
            f"'waveform' is writable (spectrogram masking happens in memory)"
        )
    out = _out_dir(merged)
    if merged.get("augment_plan"):
        from .augment import plan_from_dict

        plan = plan_from_dict(merged["augment_plan"], merged.get("seed", 0))
    else:
        plan = default_waveform_plan(merged.get("seed", 0))
    for directory in discover_participants(Path(merged.get("data") or ".")):
        train, test = load_participant(directory)
        expanded = expand_dataset(train, plan)
        write_participant_dir(out / directory.name, expanded, test)
        print(f"{directory.name}: {len(train)} -> {len(expanded)} train clips")
    return 0


def _cmd_select(args) -> int:
    merged = _merged(args, {"seed": 0, "select_k": 8})
    out = _out_dir(merged)
    k = merged.get("select_k", 8)
    for directory in discover_participants(Path(merged.get("data") or ".")):
        train, _ = load_participant(directory)
        X = feature_matrix(train.clips)
        ranking = forest_importances(X, train.labels, n_trees=100, seed=merged.get("seed", 0))
        (out / f"{directory.name}_ranking.csv").write_text(ranking.to_csv())
        top = select_top_k(ranking, k)
        names = [FEATURE_NAMES[i] for i in ranking.order[:k]]
        (out / f"{directory.name}_selected.csv").write_text(
            "index,feature\n"
            + "\n".join(f"{i},{FEATURE_NAMES[i]}" for i in sorted(top))
            + "\n"
        )
        print(f"{directory.name}: top-{k} = {', '.join(names)}")
    return 0


def _cmd_train(args) -> int:
    merged = _merged(args, {"seed": 0})
    cfg = _experiment_config(merged)
    out = _out_dir(merged)
    candidate = merged.get("candidate") or cfg.grid[0]
    for spec in cfg.participants:
        train, test, pid = spec.resolve()
        prep = ex.prepare_participant(train, test, cfg, pid, spec.ambiguous)
        result = ex.train_candidate(prep, cfg, dict(candidate), cfg.seed)
        ex.save_pipeline(out / f"{pid}_{cfg.model}_pipeline.json", result.pipeline)
        if cfg.model in ex.NN_MODELS:
            trained = (
                result.pipeline.payload["tcnn"]
                if cfg.model == "tcnn"
                else result.pipeline.payload
            )
            (out / f"{pid}_{cfg.model}_history.csv").write_text(trained.history_csv())
        print(
            f"{pid}: trained {cfg.model} (val accuracy {result.val_accuracy:.1f}%), "
            f"checkpoint saved"
        )
    return 0


def _cmd_evaluate(args) -> int:
    merged = _merged(args, {})
    out = _out_dir(merged)
    checkpoint_dir = Path(args.checkpoints or out)
    rows = ["participant,model,test_accuracy"]
    found = False
    for directory in discover_participants(Path(merged.get("data") or ".")):
        _, test = load_participant(directory)
        for ckpt in sorted(checkpoint_dir.glob(f"{directory.name}_*_pipeline.json")):
            found = True
            pipeline = ex.load_pipeline(ckpt)
            pred = pipeline.predict_clips(test.clips)
            confusion = ex.confusion_matrix(test.labels, pred)
            acc = ex.accuracy_from_confusion(confusion)
            rows.append(f"{directory.name},{pipeline.model_kind},{acc:.10g}")
            print(f"{directory.name} {pipeline.model_kind}: {acc:.1f}%")
    if not found:
        raise VocalPercError(f"no *_pipeline.json checkpoints under {checkpoint_dir}")
    (out / "evaluation.csv").write_text("\n".join(rows) + "\n")
    return 0


def _cmd_grid_search(args) -> int:
    merged = _merged(args, {"seed": 0})
    cfg = _experiment_config(merged)
    out = _out_dir(merged)
    report = ex.run_grid_search(cfg)
    ex.write_report_files(out, report)
    ex.write_timing_csv(
        out,
        [
            {
                "model": cfg.model,
                "train_seconds": round(report.mean_train_seconds, 3),
                "test_seconds": round(report.mean_test_seconds, 3),
                "mean_test_accuracy": report.mean_test_accuracy,
            }
        ],
    )
    print(
        f"{cfg.model}: mean test accuracy {report.mean_test_accuracy:.1f}% "
        f"over {len(report.participants)} participant(s); report under {out}"
    )
    return 0


def _cmd_stability(args) -> int:
    merged = _merged(args, {"seed": 0})
    cfg = _experiment_config(merged)
    out = _out_dir(merged)
    hyper = ex.run_stability_hyper(cfg)
    ex.write_stability_files(out, hyper, "hyper")
    report = ex.run_grid_search(cfg)
    chosen = [p.chosen for p in report.participants if p.error is None]
    counts: dict[str, tuple] = {}
    for cand in chosen:
        key = json.dumps(cand, sort_keys=True)
        counts[key] = (counts.get(key, (0, None))[0] + 1, cand)
    best = max(
        counts.values(),
        key=lambda pair: (pair[0], -[json.dumps(g, sort_keys=True) for g in cfg.grid].index(
            json.dumps(pair[1], sort_keys=True)
        )),
    )[1]
    seeds = ex.run_stability_seed(cfg, best, n_seeds=merged.get("n_seeds", 30))
    ex.write_stability_files(out, seeds, "seed")
    print(
        f"stability: {len(hyper.samples)} hyperparameter samples, "
        f"{len(seeds.samples)} seed samples; files under {out}"
    )
    return 0


def _cmd_report(args) -> int:
    merged = _merged(args, {"seed": 0, "select_k": 8})
    if not merged.get("model"):
        merged["model"] = "rf"
    if merged.get("select_k") is None:
        merged["select_k"] = 8
    cfg = _experiment_config(merged)
    out = _out_dir(merged)
    rankings, confusions = [], []
    for spec in cfg.participants:
        train, test, pid = spec.resolve()
        prep = ex.prepare_participant(train, test, cfg, pid, spec.ambiguous)
        result = ex.train_candidate(prep, cfg, dict(cfg.grid[0]), cfg.seed)
        pred = result.predict_test_on(prep)
        confusions.append(ex.confusion_matrix(prep.y_test, pred))
        if prep.ranking is None:
            X = feature_matrix(train.clips)
            rankings.append(
                forest_importances(X, train.labels, n_trees=100, seed=cfg.seed)
            )
        else:
            rankings.append(prep.ranking)
    report = ex.interpretability_report(rankings, merged["select_k"], confusions)
    (out / "feature_tally.csv").write_text(report.tally_csv())
    (out / "interpretability.json").write_text(json.dumps(report.to_dict(), indent=2))
    from .audio_io import CLASS_NAMES

    if report.most_confused_pair is None:
        print(f"no off-diagonal confusion at all; files under {out}")
    else:
        i, j = report.most_confused_pair
        print(
            f"most confused pair: {CLASS_NAMES[i]} vs {CLASS_NAMES[j]}; "
            f"files under {out}"
        )
    return 0


def _cmd_gradient_check(args) -> int:
    merged = _merged(args, {"seed": 0})
    results = gradient_check(n_trials=args.trials, seed=merged.get("seed", 0))
    print(format_report(results))
    return 0


_COMMANDS = {
    "gen-synth": _cmd_gen_synth,
    "features": _cmd_features,
    "augment": _cmd_augment,
    "select": _cmd_select,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "grid-search": _cmd_grid_search,
    "stability": _cmd_stability,
    "report": _cmd_report,
    "gradient-check": _cmd_gradient_check,
}


def run_command(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:  # argparse --help (0) or usage error (1)
        return int(exit_request.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (VocalPercError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()

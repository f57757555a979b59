"""Flat ``key = value`` run configuration.

Precedence is command-line flags over config file over defaults; unknown
keys are rejected; every run echoes its fully resolved configuration
into the output directory so a run is reproducible from the echo alone.
"""

from pathlib import Path

from .exceptions import ConfigInvalidError, MalformedLineError, UnknownKeyError


def _bool(raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


_PARSERS = {int: int, float: float, str: str, bool: _bool}

# key -> (type, default); None defaults mean "use the estimator default"
SYNTH_KEYS = {
    "n_speakers": (int, 10),
    "utts_per_speaker": (int, 10),
    "spoof_fraction": (float, 0.5),
    "dim": (int, 16),
    "within_std": (float, 0.3),
    "cm_gap": (float, 3.0),
    "cm_std": (float, 1.0),
    "seed": (int, 0),
    "n_enroll": (int, 3),
    "max_trials": (int, 0),
}

TRAIN_KEYS = {
    "strategy": (str, "tdt1"),
    "seed": (int, 0),
    "lr": (float, None),
    "epochs": (int, None),
    "batch_size": (int, None),
    "momentum": (float, None),
    "bce_neg": (float, 0.1),
    "bce_pos": (float, 0.9),
    "prob_epsilon": (float, 1e-7),
    "normalize_asv": (bool, True),
    "expansion": (str, "matrix"),
    "channels": (int, 8),
    "hidden_sizes": (str, "256,128,64"),
    "minmax_normalize": (bool, False),
    "joint": (bool, False),
    "assist": (bool, False),
    "cm_lr": (float, 0.05),
    "cm_epochs": (int, 100),
    "cm_batch_size": (int, 64),
    "cm_momentum": (float, 0.0),
    "aam_margin": (float, 0.2),
    "aam_scale": (float, 30.0),
    "orth_lambda": (float, 0.0),
}

SCORE_KEYS = {
    "emit_branch": (bool, False),
}

EVALUATE_KEYS = {
    "tdcf": (str, ""),
    "det": (bool, False),
}

FUSE_KEYS = {
    "weights": (str, ""),
}

COMMAND_KEYS = {
    "synth": SYNTH_KEYS,
    "train": TRAIN_KEYS,
    "score": SCORE_KEYS,
    "evaluate": EVALUATE_KEYS,
    "fuse": FUSE_KEYS,
}


def parse_config_file(path):
    """Parse ``key = value`` lines; '#' starts a comment."""
    values = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise MalformedLineError(line_no, f"expected 'key = value', got {body!r}")
        key, raw = body.split("=", 1)
        values[key.strip()] = raw.strip()
    return values


def resolve_config(command, config_path=None, flag_values=None):
    """Merge defaults <- config file <- flags into a typed dict."""
    schema = COMMAND_KEYS[command]
    resolved = {key: default for key, (_, default) in schema.items()}
    if config_path is not None:
        for key, raw in parse_config_file(config_path).items():
            if key not in schema:
                raise UnknownKeyError(key)
            typ, _ = schema[key]
            try:
                resolved[key] = _PARSERS[typ](raw)
            except ValueError as exc:
                raise ConfigInvalidError(key, str(exc)) from None
    for key, value in (flag_values or {}).items():
        if value is None:
            continue
        if key not in schema:
            raise UnknownKeyError(key)
        resolved[key] = value
    return resolved


def echo_config(resolved, path, header=None):
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header)
    for key in sorted(resolved):
        value = resolved[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

"""Flat ``key = value`` experiment configuration files.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Each experiment accepts a fixed set of keys (see ``SCHEMAS``); any other key
is an error. Lists are comma-separated numbers.
"""
import math
import os

from ..errors import ContractViolation


def _floats(text):
    text = text.strip()
    if not text:
        return ()
    return tuple(float(t) for t in text.split(","))


def _ints(text):
    return tuple(int(float(t)) for t in _floats(text))


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text}")
    return int(v)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text}")


COMMON = {
    "seed": (_int, 0, "base seed; replicate r uses seed + r"),
    "replicates": (_int, 5, "independent-seed replicates (at least 5 for standard errors)"),
    "out": (str, "", "output directory (default runs/<experiment>)"),
}

SCHEMAS = {
    "gmm2d": {
        "prior": (str, "three_mode", "three_mode, single_mode, two_mode, all, or a .gmm path"),
        "y": (_floats, (), "observation; empty draws it from y_seed"),
        "y_seed": (_int, 7, "seed for the observation when y is empty"),
        "sigma": (float, 1.0, "noise level of the 2D denoising likelihood"),
        "steps": (_int, 10000, "chain length"),
        "checkpoints": (_ints, (100, 300, 1000, 3000, 10000), "iterations at which W_p is traced"),
        "n_ref": (_int, 2000, "exact-posterior reference samples"),
        "n_sub": (_int, 2000, "maximum chain points entering exact OT"),
        "p": (_ints, (1, 2), "Wasserstein orders"),
        "ula_gamma": (float, 0.1, "PnP-ULA step size"),
        "ula_lam": (float, 1.5, "PnP-ULA regularization weight"),
        "ula_eps": (float, 0.5, "PnP-ULA denoiser level"),
        "ula_alpha": (float, math.inf, "PnP-ULA projection weight (inf drops it)"),
        "psgla_gamma": (float, 0.3, "PnP-PSGLA step size"),
        "psgla_lam": (float, 0.67, "PnP-PSGLA regularization weight"),
        "grid_half_width": (float, 8.0, "KDE grid is [-w, w]^2"),
        "grid_cells": (_int, 200, "KDE grid cells per axis"),
        "svg": (_bool, True, "write scatter plots"),
        "write_chains": (_bool, True, "write chain samples of the first replicate"),
    },
    "stability": {
        "target": (str, "ou", "ou or double_well"),
        "gamma": (float, 0.1, "step size"),
        "shifts": (_floats, (0.0, 1e-3, 1e-2, 1e-1, 1.0), "constant drift perturbations c"),
        "steps": (_int, 20000, "chain length"),
        "burn_in": (_int, 2000, "discarded iterations"),
        "thinning": (_int, 10, "keep every k-th iterate"),
        "chains": (_int, 200, "independent coordinates simulated together"),
        "grid_half_width": (float, 8.0, "TV histogram range [-w, w]"),
        "grid_cells": (_int, 160, "TV histogram cells"),
    },
    "discretization": {
        "target": (str, "ou", "ou or double_well"),
        "gammas": (_floats, (0.025, 0.05, 0.1, 0.2, 0.4), "step sizes"),
        "horizon": (float, 2000.0, "simulated time per chain"),
        "burn_time": (float, 20.0, "discarded simulated time"),
        "sample_every": (float, 0.5, "simulated time between retained iterates"),
        "chains": (_int, 1000, "independent coordinates simulated together"),
        "grid_half_width": (float, 8.0, "quadrature and TV range [-w, w]"),
        "grid_cells": (_int, 160, "TV histogram cells"),
    },
    "moreau": {
        "g": (str, "l1", "l1 or zero"),
        "weight": (float, 1.0, "Lipschitz constant L of g = L |x|"),
        "f_alpha": (float, 1.0, "f = alpha x^2 / 2"),
        "gammas": (_floats, (1e-1, 1e-2, 1e-3, 1e-4, 1e-5), "envelope parameters"),
        "grid_half_width": (float, 12.0, "quadrature range [-w, w]"),
        "grid_points": (_int, 400001, "quadrature nodes"),
    },
    "inpaint": {
        "image": (str, "synthetic", "PGM path or 'synthetic'"),
        "size": (_int, 64, "side of the synthetic image"),
        "mask_fraction": (float, 0.5, "fraction of hidden pixels"),
        "mask_seed": (_int, 11, "seed of the random mask"),
        "noise_seed": (_int, 12, "seed of the observation noise"),
        "sigma": (float, 5.0 / 255.0, "observation noise level"),
        "eps": (float, 10.0 / 255.0, "denoiser level"),
        "lam": (float, 10.0, "regularization weight scaling the data term"),
        "gamma": (float, 0.0, "step size; 0 means eps^2"),
        "tv_weight": (float, 0.0, "TV weight of the denoiser; 0 means 1/eps"),
        "inner_iters": (_int, 10, "TV dual iterations per step"),
        "steps": (_int, 1000, "chain length"),
        "burn_in": (_int, 100, "discarded iterations"),
    },
    "proxcheck": {
        "probes": (_int, 100, "finite-difference probes"),
        "pairs": (_int, 1000, "Lipschitz pairs per prox"),
    },
}

PATH_KEYS = {"gmm2d": ("prior",), "inpaint": ("image",)}
BUILTIN_NAMES = {"prior": ("three_mode", "single_mode", "two_mode", "all"), "image": ("synthetic",)}


class ExperimentConfig:
    """Validated settings of one experiment; keys are readable as attributes."""

    def __init__(self, experiment, values, source=None):
        self.experiment = experiment
        self.values = dict(values)
        self.source = source

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError as exc:
            raise AttributeError(key) from exc

    def __getitem__(self, key):
        return self.values[key]

    def with_values(self, **kw):
        unknown = set(kw) - set(self.values)
        if unknown:
            raise ContractViolation(f"unknown keys for {self.experiment}: {', '.join(sorted(unknown))}")
        v = dict(self.values)
        v.update(kw)
        return ExperimentConfig(self.experiment, v, self.source)

    @property
    def out_dir(self):
        return self.values["out"] or os.path.join("runs", self.experiment)

    def validate_paths(self):
        """Check referenced files exist and the output directory is writable."""
        for key in PATH_KEYS.get(self.experiment, ()):
            val = self.values[key]
            if val not in BUILTIN_NAMES.get(key, ()) and not os.path.isfile(val):
                raise ContractViolation(f"{key}: file not found: {val}")
        out = self.out_dir
        os.makedirs(out, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise ContractViolation(f"output directory not writable: {out}")


def schema(experiment):
    if experiment not in SCHEMAS:
        raise ContractViolation(f"unknown experiment {experiment!r}")
    merged = dict(COMMON)
    merged.update(SCHEMAS[experiment])
    return merged


def default_config(experiment):
    return ExperimentConfig(experiment, {k: entry[1] for k, entry in schema(experiment).items()})


def parse_config_text(experiment, text, source="<string>"):
    keys = schema(experiment)
    values = {k: entry[1] for k, entry in keys.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractViolation(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in keys:
            raise ContractViolation(f"{source}:{lineno}: unknown key {key!r} for {experiment}")
        if key in seen:
            raise ContractViolation(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            values[key] = keys[key][0](val)
        except ValueError as exc:
            raise ContractViolation(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return ExperimentConfig(experiment, values, source)


def load_config(experiment, path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ContractViolation(f"cannot read config file {path}: {exc.strerror}") from exc
    return parse_config_text(experiment, text, source=str(path))


def describe(experiment):
    """Human-readable key listing for the CLI help."""
    return "\n".join(f"  {k} = {entry[1]!r}  # {entry[2]}" for k, entry in schema(experiment).items())

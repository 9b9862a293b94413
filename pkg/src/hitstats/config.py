"""Experiment configuration: INI-style ``[system]``, ``[experiment]``, ``[output]``."""

import configparser
from dataclasses import asdict, dataclass, field
import hashlib
import json
import math

from .systems import make_system

DEFAULT_TARGET = math.sqrt(2.0) - 1.0


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class UnknownKey(ConfigError):
    pass


class OutOfRange(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass


FAMILIES = ("affine", "random-expanding", "beta", "perturbed")

# key -> (section, parser, default)
_int = int
_float = float


def _floats(text):
    return [float(v) for v in str(text).replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in str(text).replace(",", " ").split()]


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none") else float(text)


def _cutoff(text):
    t = str(text).strip().lower()
    return None if t in ("", "auto") else int(t)


def _start(text):
    t = str(text).strip().lower()
    return None if t in ("", "random") else float(t)


KEYS = {
    "system": {
        "family": (str, None),
        "multiplier": (_int, 2),
        "driver": (str, "markov"),
        "beta_min": (_float, 2.0),
        "beta_max": (_float, 3.0),
        "epsilon": (_float, 0.1),
        "bits": (_int, 128),
    },
    "experiment": {
        "target": (_float, DEFAULT_TARGET),
        "radius": (_floats, None),
        "samples": (_int, 10_000),
        "seed": (_int, 0),
        "cutoff": (_cutoff, None),
        "t_min": (_float, 0.05),
        "t_max": (_float, 6.0),
        "t_points": (_int, 60),
        "burn_in": (_int, 1000),
        "stationary_samples": (_int, 200_000),
        "start": (_start, None),
        "starts": (_int, 1),
        "steps": (_int, 100),
        "k_max": (_cutoff, None),
        "n_max": (_int, 10),
        "psi": (str, "cos"),
        "phi": (str, "indicator"),
        "p_list": (_floats, [1.0, 2.0, 4.0]),
        "a": (_float, 0.5),
        "b": (_float, 0.0),
        "rho": (_floats, [0.125, 0.0625, 0.03125, 0.015625]),
        "bound_n": (_ints, [1, 5, 10, 50]),
        "ks_tolerance": (_opt_float, None),
        "delta_tolerance": (_opt_float, None),
        "zero_sigmas": (_opt_float, None),
    },
    "output": {
        "dir": (str, "out"),
    },
}


@dataclass
class ExperimentConfig:
    family: str
    system_params: dict = field(default_factory=dict)
    target: float = DEFAULT_TARGET
    radius: list = None  # None: the subcommand's default grid
    samples: int = 10_000
    seed: int = 0
    cutoff: int = None
    t_min: float = 0.05
    t_max: float = 6.0
    t_points: int = 60
    burn_in: int = 1000
    stationary_samples: int = 200_000
    start: float = None
    starts: int = 1
    steps: int = 100
    k_max: int = None
    n_max: int = 10
    psi: str = "cos"
    phi: str = "indicator"
    p_list: list = field(default_factory=lambda: [1.0, 2.0, 4.0])
    a: float = 0.5
    b: float = 0.0
    rho: list = field(default_factory=lambda: [0.125, 0.0625, 0.03125, 0.015625])
    bound_n: list = field(default_factory=lambda: [1, 5, 10, 50])
    ks_tolerance: float = None
    delta_tolerance: float = None
    zero_sigmas: float = None
    out: str = "out"

    def system(self):
        return make_system(self.family, burn_in=self.burn_in, **self.system_params)

    def canonical(self):
        """Everything that determines results; output location excluded."""
        d = asdict(self)
        d.pop("out")
        return d

    def hash(self):
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _parse_value(section, key, raw):
    parser, _ = KEYS[section][key]
    try:
        return parser(raw)
    except ValueError:
        raise OutOfRange(key, f"cannot parse {raw!r}") from None


def parse_config(text, overrides=None):
    """Parse and validate a configuration text.

    ``overrides`` maps experiment/output keys to already-typed values (from
    command-line flags) and wins over the file.
    """
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text or "")
    except configparser.Error as exc:
        raise ConfigError("config", str(exc)) from None
    values = {}
    for section in cp.sections():
        if section not in KEYS:
            raise UnknownKey(section, "unknown section")
        for key, raw in cp.items(section):
            if key not in KEYS[section]:
                raise UnknownKey(key, f"unknown key in [{section}]")
            values[key] = _parse_value(section, key, raw)
    for key, v in (overrides or {}).items():
        if v is not None:
            values[key] = v
    if "family" not in values:
        raise MissingRequired("family", "[system] family is required")
    sys_keys = [k for k in KEYS["system"] if k != "family" and k in values]
    cfg = ExperimentConfig(family=values.pop("family"),
                           system_params={k: values.pop(k) for k in sys_keys})
    if "dir" in values:
        cfg.out = values.pop("dir")
    for key, v in values.items():
        setattr(cfg, key, v)
    validate(cfg)
    return cfg


def validate(cfg):
    sp = cfg.system_params
    if cfg.family not in FAMILIES:
        raise OutOfRange("family", f"must be one of {', '.join(FAMILIES)}")
    if sp.get("multiplier", 2) < 2:
        raise OutOfRange("multiplier", "multiplier must be an integer >= 2")
    if sp.get("driver", "markov") not in ("markov", "exact_skew"):
        raise OutOfRange("driver", "driver must be markov or exact_skew")
    lo, hi = sp.get("beta_min", 2.0), sp.get("beta_max", 3.0)
    if not lo > 1.0:
        raise OutOfRange("beta_min", "beta_min must be > 1")
    if not lo < hi:
        raise OutOfRange("beta_max", "beta interval is empty: need beta_min < beta_max")
    if not sp.get("epsilon", 0.1) > 0:
        raise OutOfRange("epsilon", "epsilon must be > 0")
    if sp.get("bits", 128) < 8:
        raise OutOfRange("bits", "bits must be >= 8")
    if cfg.radius is not None and not cfg.radius:
        raise OutOfRange("radius", "at least one radius is required")
    for r in cfg.radius or ():
        if not 0.0 < r < 0.5:
            raise OutOfRange("radius", "radius must be < 0.5 and > 0")
    if cfg.samples < 1:
        raise OutOfRange("samples", "samples must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise OutOfRange("seed", "seed must be an unsigned 64-bit integer")
    if cfg.cutoff is not None and cfg.cutoff < 1:
        raise OutOfRange("cutoff", "cutoff must be >= 1 or auto")
    if cfg.k_max is not None and cfg.k_max < 1:
        raise OutOfRange("k_max", "k_max must be >= 1 or auto")
    if not 0.0 < cfg.t_min < cfg.t_max or cfg.t_points < 1:
        raise OutOfRange("t_max", "need 0 < t_min < t_max and t_points >= 1")
    if cfg.burn_in < 0:
        raise OutOfRange("burn_in", "burn_in must be >= 0")
    if cfg.stationary_samples < 1:
        raise OutOfRange("stationary_samples", "stationary_samples must be >= 1")
    if cfg.starts < 1:
        raise OutOfRange("starts", "starts must be >= 1")
    if cfg.steps < 1:
        raise OutOfRange("steps", "steps must be >= 1")
    if cfg.n_max < 0:
        raise OutOfRange("n_max", "n_max must be >= 0")
    if cfg.a <= 0:
        raise OutOfRange("a", "a must be > 0")
    if cfg.b < 0:
        raise OutOfRange("b", "b must be >= 0")
    if any(not 0.0 < v < 0.5 for v in cfg.rho):
        raise OutOfRange("rho", "rho values must lie in (0, 0.5)")
    if cfg.start is not None and not 0.0 <= cfg.start < 1.0:
        raise OutOfRange("start", "start must lie in [0, 1)")
    if not 0.0 <= cfg.target < 1.0:
        raise OutOfRange("target", "target must lie in [0, 1)")
    from .lawcheck import OBSERVABLES

    for key in ("psi", "phi"):
        if getattr(cfg, key) not in OBSERVABLES:
            raise OutOfRange(key, f"must be one of {', '.join(OBSERVABLES)}")
    if OBSERVABLES[cfg.psi].lipschitz is None:
        raise OutOfRange("psi", "psi must be a Lipschitz observable")
    return cfg

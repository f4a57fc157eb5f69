"""
Run configuration: lab defaults, JSON run files, validation and hashing.

Precedence, lowest first: dataclass defaults, the YAML lab defaults
(PMLAB_DEFAULTS, else data/config.yml, else data/config.example.yml),
PMLAB_OUTPUT_DIR, the JSON run file given with --config, and finally
command-line flags.
"""

import hashlib
import json
import logging
import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from core.errors import ConfigError
from core.maps import Policy

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEFAULTS_FILES = (PROJECT_ROOT / "data" / "config.yml", PROJECT_ROOT / "data" / "config.example.yml")

COMMANDS = (
    "decay",
    "correlation",
    "an-fit",
    "cover",
    "kernel",
    "cone-check",
    "distortion",
    "ulam-dump",
    "averaging",
)

# Keys that only steer output and stay out of the config hash
_OUTPUT_ONLY = ("output_dir", "plot", "assert_band")

# YAML section/key -> RunConfig field
_DEFAULTS_MAP = {
    ("mesh", "n"): "mesh_n",
    ("mesh", "grading"): "grading",
    ("transfer", "conserve_mass"): "conserve_mass",
    ("transfer", "c_cov"): "c_cov",
    ("transfer", "kappa"): "kappa",
    ("fit", "band"): "band",
    ("fit", "use_log_correction"): "use_log_correction",
    ("fit", "band_mode"): "band_mode",
    ("cones", "samples"): "samples",
    ("kernel", "z_points"): "z_points",
    ("kernel", "x_points"): "x_points",
    ("output", "dir"): "output_dir",
}


def _dyadic(lo: int, hi: int) -> List[float]:
    return [2.0 ** -k for k in range(lo, hi + 1)]


@dataclass
class RunConfig:
    """Resolved configuration of one command invocation."""
    command: str = "decay"
    alpha: float = 0.5
    seed: int = 0
    runs: int = 1
    policy: str = "uniform"
    beta: Optional[float] = None
    beta_min: float = 0.0
    theta: float = 0.5
    decay_rate: float = 1.0
    n_max: int = 1000
    eps: float = 2.0 ** -6
    eps_list: List[float] = field(default_factory=lambda: _dyadic(4, 10))
    mesh_n: int = 2 ** 14
    grading: Optional[float] = None
    phi: str = "one"
    psi: Optional[str] = None
    observable: str = "sin:1"
    method: str = "orbit"
    kappa: float = 1.0
    c_cov: Optional[float] = None
    conserve_mass: bool = True
    use_log_correction: bool = True
    band: List[float] = field(default_factory=lambda: [-1.25, -0.85])
    band_mode: str = "upper"
    samples: int = 200
    z_points: int = 64
    x_points: int = 64
    arc_lo: float = 0.7
    arc_hi: float = 0.72
    output_dir: str = "results"
    plot: bool = False
    assert_band: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def policy_params(self) -> Dict[str, Any]:
        """Keyword parameters for MapSequence.generate / iter_betas."""
        policy = Policy.parse(self.policy)
        if policy is Policy.CONSTANT:
            return {"beta": self.alpha if self.beta is None else self.beta}
        if policy is Policy.UNIFORM:
            return {"beta_min": self.beta_min}
        if policy is Policy.POWER_DECAY:
            return {"theta": self.theta}
        if policy is Policy.STRETCHED_EXP:
            return {"theta": self.theta, "c": self.decay_rate}
        return {}

    @property
    def psi_spec(self) -> str:
        return self.psi or f"power:{self.alpha / 2.0!r}"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def config_hash(config: RunConfig) -> str:
    """First 16 hex digits of the SHA-256 of the canonical config JSON."""
    payload = {k: v for k, v in config.to_dict().items() if k not in _OUTPUT_ONLY}
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _normalize_key(key: str) -> str:
    key = key.replace("-", "_")
    return "assert_band" if key == "assert" else key


def load_defaults(path: Optional[Path] = None) -> Dict[str, Any]:
    """
    Read the YAML lab defaults and flatten them to RunConfig fields.

    Args:
        path: Explicit defaults file; otherwise PMLAB_DEFAULTS, data/config.yml
            or data/config.example.yml, whichever exists first
    """
    candidates = [Path(path)] if path else []
    env_path = os.environ.get("PMLAB_DEFAULTS")
    if env_path and not path:
        candidates.append(Path(env_path))
    candidates += list(DEFAULTS_FILES)

    for candidate in candidates:
        if candidate.is_file():
            with open(candidate, "r") as f:
                raw = yaml.safe_load(f) or {}
            logger.debug(f"Loaded lab defaults from {candidate}")
            break
    else:
        return {}

    flat = {}
    for (section, key), name in _DEFAULTS_MAP.items():
        value = (raw.get(section) or {}).get(key)
        if value is not None:
            flat[name] = value
    return flat


def load_run_file(path: Path) -> Dict[str, Any]:
    """
    Read a flat JSON run file.

    Raises:
        ConfigError: unreadable file, JSON syntax error (with line), unknown key
    """
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}", field="config") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{e.msg} (column {e.colno})", line=e.lineno) from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object", line=1)

    values = {}
    for key, value in data.items():
        name = _normalize_key(key)
        if name not in _FIELD_TYPES:
            raise ConfigError(f"unknown key '{key}'", field=key, line=_line_of(text, key))
        values[name] = value
    return values


def _line_of(text: str, key: str) -> Optional[int]:
    match = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1


def build_config(
    overrides: Dict[str, Any],
    run_file: Optional[Path] = None,
    defaults_file: Optional[Path] = None,
) -> RunConfig:
    """
    Merge defaults, run file and flag overrides, then validate.

    Raises:
        ConfigError: any invariant violated
    """
    merged: Dict[str, Any] = {}
    merged.update(load_defaults(defaults_file))
    env_output = os.environ.get("PMLAB_OUTPUT_DIR")
    if env_output:
        merged["output_dir"] = env_output
    if run_file is not None:
        merged.update(load_run_file(run_file))
    merged.update({_normalize_key(k): v for k, v in overrides.items() if v is not None})

    unknown = set(merged) - set(_FIELD_TYPES)
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError(f"unknown setting '{name}'", field=name)
    config = RunConfig(**{name: _coerce(name, value) for name, value in merged.items()})
    validate(config)
    return config


_SCALARS = {float: (int, float), int: (int,), str: (str,), bool: (bool,)}


def _coerce(name: str, value: Any) -> Any:
    """Check a raw setting against the RunConfig field type; ints widen to floats."""
    kind = _FIELD_TYPES[name]
    if kind in (Optional[float], Optional[str]):
        if value is None:
            return None
        kind = float if kind == Optional[float] else str
    if kind == List[float]:
        if not isinstance(value, (list, tuple)) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"expected a list of numbers, got {value!r}", field=name)
        return [float(v) for v in value]
    accepted = _SCALARS[kind]
    if (isinstance(value, bool) and kind is not bool) or not isinstance(value, accepted):
        raise ConfigError(f"expected {kind.__name__}, got {value!r}", field=name)
    return float(value) if kind is float else value


def _require(condition: bool, name: str, message: str) -> None:
    if not condition:
        raise ConfigError(message, field=name)


def validate(config: RunConfig) -> None:
    """Check every field against the invariants of the modules it feeds."""
    _require(config.command in COMMANDS, "command",
             f"unknown command '{config.command}' (expected one of: {', '.join(COMMANDS)})")
    _require(isinstance(config.alpha, (int, float)) and 0.0 < config.alpha < 1.0,
             "alpha", f"alpha must satisfy 0 < alpha < 1, got {config.alpha}")
    try:
        policy = Policy.parse(config.policy)
    except ValueError as e:
        raise ConfigError(str(e), field="policy") from None
    if config.beta is not None:
        _require(0.0 <= config.beta <= config.alpha, "beta",
                 f"beta must satisfy 0 <= beta <= alpha, got {config.beta}")
    _require(0.0 <= config.beta_min < config.alpha, "beta_min",
             f"beta_min must satisfy 0 <= beta_min < alpha, got {config.beta_min}")
    _require(policy is not Policy.EXPLICIT, "policy",
             "the explicit policy is available from the library, not the command line")
    _require(config.theta > 0.0, "theta", f"theta must be positive, got {config.theta}")
    _require(config.decay_rate > 0.0, "decay_rate", f"decay_rate must be positive, got {config.decay_rate}")
    _require(isinstance(config.seed, int) and 0 <= config.seed < 2 ** 64, "seed",
             f"seed must be a 64-bit nonnegative integer, got {config.seed}")
    _require(isinstance(config.runs, int) and config.runs >= 1, "runs",
             f"runs must be a positive integer, got {config.runs}")
    _require(isinstance(config.n_max, int) and config.n_max >= 1, "n_max",
             f"n_max must be a positive integer, got {config.n_max}")
    _require(isinstance(config.mesh_n, int) and config.mesh_n >= 2, "mesh_n",
             f"mesh_n must be an integer >= 2, got {config.mesh_n}")
    if config.grading is not None:
        _require(config.grading >= 1.0 / (1.0 - config.alpha), "grading",
                 f"grading must be at least 1/(1 - alpha) = {1.0 / (1.0 - config.alpha):.6g}")
    _require(0.0 < config.eps < 0.25, "eps", f"eps must lie in (0, 1/4), got {config.eps}")
    _require(len(config.eps_list) >= 2 and all(0.0 < e < 0.125 for e in config.eps_list),
             "eps_list", "eps_list needs at least two values in (0, 1/8)")
    _require(config.kappa > 0.0, "kappa", f"kappa must be positive, got {config.kappa}")
    if config.c_cov is not None:
        _require(config.c_cov > 0.0, "c_cov", f"c_cov must be positive, got {config.c_cov}")
    _require(len(config.band) == 2 and config.band[0] < config.band[1], "band",
             f"band must be [lo, hi] with lo < hi, got {config.band}")
    _require(config.band_mode in ("upper", "two-sided"), "band_mode",
             f"band_mode must be 'upper' or 'two-sided', got {config.band_mode}")
    _require(config.samples >= 1, "samples", f"samples must be positive, got {config.samples}")
    _require(config.z_points >= 1 and config.x_points >= 1, "z_points",
             "kernel grids need at least one point")
    _require(0.0 <= config.arc_lo <= config.arc_hi <= 1.0, "arc_lo",
             f"arc must satisfy 0 <= lo <= hi <= 1, got [{config.arc_lo}, {config.arc_hi})")
    _require(config.method in ("transfer", "orbit"), "method",
             f"method must be 'transfer' or 'orbit', got {config.method}")

    output = Path(config.output_dir)
    try:
        output.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory: {e}", field="output_dir") from None
    _require(os.access(output, os.W_OK), "output_dir", f"output directory {output} is not writable")

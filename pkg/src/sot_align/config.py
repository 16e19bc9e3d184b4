"""Flat ``key = value`` pipeline configuration."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import InputError
from .synth import SynthParams

PATH_KEYS = (
    "kg1_triples",
    "kg1_names",
    "kg2_triples",
    "kg2_names",
    "word_vectors",
    "gold_pairs",
    "gold_dangling1",
    "gold_dangling2",
    "train_pairs",
    "rankings",
)

MODES = ("unsupervised", "supervised")
FEATURES = ("word", "word+char")


@dataclass
class PipelineConfig:
    kg1_triples: str = ""
    kg1_names: str = ""
    kg2_triples: str = ""
    kg2_names: str = ""
    word_vectors: str = ""
    gold_pairs: str = ""
    gold_dangling1: str = ""
    gold_dangling2: str = ""
    train_pairs: str = ""
    rankings: str = ""

    eps: float = 0.99
    top_n: int = 3
    margin: float = 3.0
    w0: float = 0.3
    decay_fraction: float = 0.25
    learning_rate: float = 1e-3
    total_steps: int = 1000
    negatives_per_pair: int = 5
    resample_every: int = 1
    hidden_dim: int = 0
    out_dim: int = 0
    K: int = 100
    K_grid: int = 10
    grid_size: int = 10
    delta: float = 1e-9
    alpha: float = 0.0  # > 0 (with beta) skips the grid-search result
    beta: float = 0.0
    node_budget: int = 1_000_000
    seed: int = 0
    mode: str = "unsupervised"
    features: str = "word"
    char_weight: float = 1.0
    split_camel: bool = False

    synth: SynthParams = field(default_factory=lambda: SynthParams(matchable=20, dangling1=10, dangling2=10, exact_fraction=0.25))

    def __post_init__(self):
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.features not in FEATURES:
            raise InputError(f"features must be one of {FEATURES}, got {self.features!r}")
        if not 0 < self.eps < 1:
            raise InputError("eps must lie in (0, 1)")
        for key in ("top_n", "K", "K_grid", "grid_size", "node_budget", "negatives_per_pair"):
            if getattr(self, key) < 1:
                raise InputError(f"{key} must be >= 1")

    def path(self, key: str) -> Path | None:
        value = getattr(self, key)
        return Path(value) if value else None

    def require(self, key: str) -> Path:
        p = self.path(key)
        if p is None:
            raise InputError(f"config key {key!r} is not set")
        return p


def _scalar_fields():
    return {f.name: f for f in fields(PipelineConfig) if f.name != "synth"}


def _synth_fields():
    return {f"synth_{f.name}": f for f in fields(SynthParams)}


def _convert(key: str, raw: str, typ):
    typ = typ if isinstance(typ, type) else {"int": int, "float": float, "bool": bool, "str": str}[str(typ)]
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        return typ(raw)
    except ValueError:
        raise InputError(f"bad value for {key!r}: {raw!r}") from None


def parse_assignments(lines, source: str = "<config>") -> dict[str, str]:
    """``key = value`` per line; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def build_config(file_values: dict[str, str], overrides: dict[str, str], base_dir: Path | None = None) -> PipelineConfig:
    """Defaults, then file values (paths relative to ``base_dir``), then overrides."""
    scalar, synth = _scalar_fields(), _synth_fields()
    values: dict = {}
    synth_values: dict = {}
    for origin, items in (("file", file_values), ("cli", overrides)):
        for key, raw in items.items():
            if key in scalar:
                val = _convert(key, raw, scalar[key].type)
                if key in PATH_KEYS and val and origin == "file" and base_dir is not None and not Path(val).is_absolute():
                    val = str(base_dir / val)
                values[key] = val
            elif key in synth:
                synth_values[key[len("synth_"):]] = _convert(key, raw, synth[key].type)
            else:
                raise InputError(f"unknown config key {key!r}")
    cfg = PipelineConfig(**values)
    if synth_values:
        cfg.synth = dataclasses.replace(cfg.synth, **synth_values)
    return cfg


def load_config(path=None, overrides=()) -> PipelineConfig:
    file_values, base = {}, None
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc.strerror}") from None
        file_values = parse_assignments(text.splitlines(), str(path))
        base = path.parent
    over = {}
    for item in overrides:
        if "=" not in item:
            raise InputError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        over[k.strip()] = v.strip()
    return build_config(file_values, over, base)


def dump_config(cfg: PipelineConfig) -> str:
    lines = []
    for name in _scalar_fields():
        lines.append(f"{name} = {getattr(cfg, name)}")
    for f in fields(SynthParams):
        lines.append(f"synth_{f.name} = {getattr(cfg.synth, f.name)}")
    return "\n".join(lines) + "\n"

"""Pipeline configuration: flat ``section.key = value`` text files.

Top-level keys have no section prefix::

    seed = 7
    filter = cann
    tolerance = 5
    synth.appearance = extreme
    cann.input_gain = 0.1

Section seeds default to the global ``seed`` unless set explicitly.
Unknown keys and malformed values raise :class:`ConfigError`.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .cann import CannConfig
from .classifier import TrainConfig
from .dataset import SynthConfig
from .encoder import ConfigError, EncoderConfig
from .rnn import RnnTrainConfig
from .seqslam import SeqSlamConfig, Source


class Filter(str, enum.Enum):
    NONE = "none"
    SEQSLAM = "seqslam"
    RNN = "rnn"
    CANN = "cann"


@dataclass(frozen=True)
class SeqSlamSection:
    ds: int = 20
    vmin: float = 0.8
    vmax: float = 1.2
    vstep: float = 0.1
    enhance_window: int = 10
    threshold: float = 1.0
    source: Source = Source.SCORES

    def matcher(self) -> SeqSlamConfig:
        return SeqSlamConfig(self.ds, self.vmin, self.vmax, self.vstep, self.enhance_window, self.threshold)


@dataclass(frozen=True)
class RnnSection(RnnTrainConfig):
    # fresh mild augmentations of the reference traverse drawn every epoch
    augment_copies: int = 2
    augment_noise: float = 0.3

    def trainer(self) -> RnnTrainConfig:
        names = {f.name for f in fields(RnnTrainConfig)}
        return RnnTrainConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})


@dataclass(frozen=True)
class EvalSection:
    timing: bool = False    # put wall-clock columns into summary.csv
    cann_trace: bool = False
    svg: bool = True
    difference_matrix: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    filter: Filter = Filter.CANN
    tolerance: int = 5
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seqslam: SeqSlamSection = field(default_factory=SeqSlamSection)
    rnn: RnnSection = field(default_factory=RnnSection)
    cann: CannConfig = field(default_factory=CannConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    eval: EvalSection = field(default_factory=EvalSection)

    def __post_init__(self):
        object.__setattr__(self, "filter", Filter(self.filter))
        if self.tolerance < 0:
            raise ConfigError("tolerance must be >= 0")

    def dump(self) -> str:
        """Canonical text form: every key, sorted, one per line."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if dataclasses.is_dataclass(value):
                for sub in fields(value):
                    lines.append(f"{f.name}.{sub.name} = {_format(getattr(value, sub.name))}")
            else:
                lines.append(f"{f.name} = {_format(value)}")
        return "\n".join(sorted(lines)) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()[:16]


SECTIONS = ("encoder", "train", "seqslam", "rnn", "cann", "synth", "eval")
SEEDED = ("encoder", "train", "rnn", "synth")


def _format(value) -> str:
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    return repr(value) if isinstance(value, float) else str(value)


def _coerce(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, enum.Enum):
            return type(default)(raw.lower())
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw, 0)
        if isinstance(default, float):
            return float(raw)
        if default is None:
            return None if raw.lower() == "none" else int(raw, 0)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, seed: int | None = None) -> PipelineConfig:
    """Parse config text; ``seed`` (e.g. from --seed) overrides the file's global seed."""
    top: dict = {}
    sections: dict = {name: {} for name in SECTIONS}
    defaults = PipelineConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if "." in key:
            section, name = key.split(".", 1)
            if section not in SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section {section!r}")
            sub_defaults = getattr(defaults, section)
            if name not in {f.name for f in fields(sub_defaults)}:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            sections[section][name] = _coerce(raw, getattr(sub_defaults, name), key)
        else:
            if key not in ("seed", "filter", "tolerance"):
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            top[key] = _coerce(raw, getattr(defaults, key), key)
    if seed is not None:
        top["seed"] = seed
    global_seed = top.get("seed", defaults.seed)
    built = {}
    for name in SECTIONS:
        values = sections[name]
        if name in SEEDED:
            values.setdefault("seed", global_seed)
        try:
            built[name] = replace(getattr(defaults, name), **values)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"section {name}: {exc}") from None
    try:
        return PipelineConfig(**top, **built)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, seed: int | None = None) -> PipelineConfig:
    text = Path(path).read_text() if path else ""
    return parse_config(text, seed)

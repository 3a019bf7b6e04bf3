"""Pipeline configuration and the flat ``key = value`` config file format.

Recognized keys (``#`` starts a comment, blank lines are ignored)::

    admissions, notes          input CSV paths
    lexicon                    TSV path, ``builtin`` (default) or empty to skip CUIs
    annotations                JSON-lines CUI annotations; used instead of the lexicon
    stopwords                  stopword file (default: bundled list)
    output_dir                 where every command reads and writes
    category                   note category to keep (default ``Discharge summary``)
    window_days                readmission window (30)
    min_doc_count              df lower bound (5)
    max_doc_fraction           df upper bound as a corpus fraction (0.95)
    seed, threads              integers
    feature_sets               comma list, e.g. ``bow, cui`` (default: whatever exists)
    classifiers                comma list restricting the roster
    split_ratio, folds         held-out ratio (0.7) and CV folds (5)
    top_k, font_min, font_max  importance report settings
    grid.<classifier>.<param>  comma list; replaces that axis of the tuning grid
    synth.<field>              any SynthSpec field

Command-line flags override file values.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .errors import ContractError, ParseError
from .evaluation import ClassifierSpec, default_roster
from .synth import SynthSpec

BUILTIN = "builtin"


@dataclass
class PipelineConfig:
    admissions: Optional[str] = None
    notes: Optional[str] = None
    lexicon: Optional[str] = BUILTIN
    annotations: Optional[str] = None
    stopwords: Optional[str] = None
    output_dir: str = "out"
    category: str = "Discharge summary"
    window_days: int = 30
    min_doc_count: int = 5
    max_doc_fraction: float = 0.95
    seed: int = 0
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    feature_sets: Optional[list[str]] = None
    classifiers: Optional[list[str]] = None
    split_ratio: float = 0.7
    folds: int = 5
    top_k: int = 20
    font_min: float = 12.0
    font_max: float = 40.0
    grids: dict = field(default_factory=dict)
    synth: SynthSpec = field(default_factory=SynthSpec)

    def validate(self) -> None:
        if self.window_days <= 0:
            raise ContractError("window_days must be positive")
        if self.min_doc_count < 1:
            raise ContractError("min_doc_count must be >= 1")
        if not 0 < self.max_doc_fraction <= 1:
            raise ContractError("max_doc_fraction must be in (0, 1]")
        if self.threads < 1:
            raise ContractError("threads must be >= 1")
        if not 0 < self.split_ratio < 1:
            raise ContractError("split_ratio must be in (0, 1)")
        if self.folds < 2:
            raise ContractError("folds must be >= 2")
        if self.top_k < 1:
            raise ContractError("top_k must be >= 1")
        if not 0 < self.font_min <= self.font_max:
            raise ContractError("need 0 < font_min <= font_max")
        self.synth.validate()

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def roster(self, dimension: int) -> list[ClassifierSpec]:
        specs = [apply_grid_overrides(s, self.grids.get(s.name, {})) for s in default_roster(dimension)]
        known = {s.name for s in specs}
        unknown = set(self.grids) - known
        if self.classifiers is not None:
            unknown |= set(self.classifiers) - known
        if unknown:
            raise ContractError(f"unknown classifier(s): {sorted(unknown)}")
        if self.classifiers is not None:
            specs = [s for s in specs if s.name in self.classifiers]
        return specs


def apply_grid_overrides(spec: ClassifierSpec, overrides: dict) -> ClassifierSpec:
    """Replace grid axes by the given value lists.

    The result is the Cartesian product of all axes, in the order the axes
    first appear (existing axes, then new ones), so a one-axis override
    keeps the documented tie-breaking order.
    """
    if not overrides:
        return spec
    axes: dict[str, list] = {}
    for point in spec.grid:
        for key, value in point.items():
            axes.setdefault(key, [])
            if value not in axes[key]:
                axes[key].append(value)
    fixed = dict(spec.fixed)
    for key, values in overrides.items():
        if not values:
            raise ContractError(f"empty grid for {spec.name}.{key}")
        axes[key] = list(values)
        fixed.pop(key, None)
    names = list(axes)
    grid = [dict(zip(names, combo)) for combo in itertools.product(*(axes[n] for n in names))]
    return replace(spec, grid=grid, fixed=fixed)


def parse_value(text: str):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _split_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


_SCALARS = {f.name: f for f in fields(PipelineConfig)}
_LISTS = {"feature_sets", "classifiers"}
_SYNTH = {f.name: f for f in fields(SynthSpec)}


def _coerce(name: str, raw: str, kind, source, lineno):
    if kind in (int, "int"):
        try:
            return int(raw)
        except ValueError:
            raise ParseError(f"{name}: expected an integer, got {raw!r}", row=lineno, source=source) from None
    if kind in (float, "float"):
        try:
            return float(raw)
        except ValueError:
            raise ParseError(f"{name}: expected a number, got {raw!r}", row=lineno, source=source) from None
    return raw


def _field_kind(f):
    t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if t == "int":
        return int
    if t == "float":
        return float
    return str


def apply_setting(config: PipelineConfig, key: str, raw: str, *, source=None, lineno=None) -> None:
    """Set one ``key = value`` pair on ``config``."""
    raw = raw.strip()
    if key.startswith("grid."):
        parts = key.split(".")
        if len(parts) != 3 or not parts[1] or not parts[2]:
            raise ParseError(f"grid keys look like grid.<classifier>.<param>, got {key!r}", row=lineno, source=source)
        config.grids.setdefault(parts[1], {})[parts[2]] = [parse_value(v) for v in _split_list(raw)]
        return
    if key.startswith("synth."):
        name = key[len("synth.") :]
        if name not in _SYNTH:
            raise ParseError(f"unknown synth setting {name!r}", row=lineno, source=source)
        value = _coerce(key, raw, _field_kind(_SYNTH[name]), source, lineno)
        config.synth = replace(config.synth, **{name: value})
        return
    if key in _LISTS:
        setattr(config, key, _split_list(raw) or None)
        return
    if key not in _SCALARS or key in ("grids", "synth"):
        raise ParseError(f"unknown setting {key!r}", row=lineno, source=source)
    kind = {"window_days": int, "min_doc_count": int, "seed": int, "threads": int, "folds": int, "top_k": int,
            "max_doc_fraction": float, "split_ratio": float, "font_min": float, "font_max": float}.get(key, str)
    value = _coerce(key, raw, kind, source, lineno)
    if kind is str and value == "" and key in ("lexicon", "annotations", "stopwords", "admissions", "notes"):
        value = None
    setattr(config, key, value)


def load_config(path, config: Optional[PipelineConfig] = None) -> PipelineConfig:
    config = config or PipelineConfig()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc.strerror}", source=path) from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected key = value", row=lineno, source=path)
            key, value = line.split("=", 1)
            apply_setting(config, key.strip(), value, source=path, lineno=lineno)
    return config

"""Pipeline configuration and its JSON form.

Unknown keys are rejected at every level so typos do not silently fall back
to defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .zonefind import TAG_PROFILES, PriceFormat, TagModel


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    max_w: int = 1350
    max_h: int = 700
    niblack_k: float = -0.2
    window_h_factor: float = 1.2
    window_w_factor: float = 3.0
    polarity: str = "dark-text"
    se_side: int = 3
    tag: TagModel = field(default_factory=TagModel)
    threshold_deg: float = 1.5
    max_skew_deg: float = 15.0
    min_conf: float = 0.6
    ocr_margin: float = 0.15
    recognizer: str = "template"
    iou_threshold: float = 0.5
    debug: bool = False

    def __post_init__(self):
        if self.max_w < 1 or self.max_h < 1:
            raise ConfigError("size limit must be positive")
        if not -1 <= self.niblack_k <= 1:
            raise ConfigError("niblack_k must lie in [-1, 1]")
        if self.polarity not in ("dark-text", "light-text"):
            raise ConfigError("polarity must be dark-text or light-text")
        if self.se_side < 1 or self.se_side % 2 == 0:
            raise ConfigError("se_side must be odd and positive")
        if not 0 <= self.threshold_deg <= self.max_skew_deg <= 20:
            raise ConfigError("need 0 <= threshold_deg <= max_skew_deg <= 20")
        if not 0 <= self.min_conf <= 1:
            raise ConfigError("min_conf must lie in [0, 1]")
        if not 0 <= self.tag.tau_zone <= 1:
            raise ConfigError("tau_zone must lie in [0, 1]")
        if not 0 < self.iou_threshold <= 1:
            raise ConfigError("iou_threshold must lie in (0, 1]")
        if self.ocr_margin < 0:
            raise ConfigError("ocr_margin must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["tag"]["formats"] = [asdict(f) for f in self.tag.formats]
        for k in ("digit_h_frac", "digit_aspect", "price_zone_prior", "height_ratio"):
            d["tag"][k] = list(d["tag"][k])
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineConfig":
        data = dict(data)
        _check_keys(data, {f.name for f in fields(cls)} | {"profile"}, "config")
        profile = data.pop("profile", None)
        tag = TAG_PROFILES["generic"]
        if profile is not None:
            if profile not in TAG_PROFILES:
                raise ConfigError(f"unknown tag profile {profile!r}")
            tag = TAG_PROFILES[profile]
        if "tag" in data:
            tag = _tag_from_dict(data.pop("tag"), tag)
        try:
            return cls(tag=tag, **data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(data)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _check_keys(data: dict, allowed: set[str], where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _tag_from_dict(data: dict[str, Any], base: TagModel) -> TagModel:
    if not isinstance(data, dict):
        raise ConfigError("tag must be an object")
    _check_keys(data, {f.name for f in fields(TagModel)}, "tag")
    kw = dict(data)
    if "formats" in kw:
        fmts = []
        for f in kw["formats"]:
            _check_keys(f, {"int_min", "int_max", "frac_digits"}, "tag.formats")
            fmts.append(PriceFormat(**f))
        kw["formats"] = tuple(fmts)
    for k in ("digit_h_frac", "digit_aspect", "price_zone_prior", "height_ratio"):
        if k in kw:
            kw[k] = tuple(kw[k])
    current = {f.name: getattr(base, f.name) for f in fields(TagModel)}
    current.update(kw)
    try:
        return TagModel(**current)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"tag: {exc}") from None

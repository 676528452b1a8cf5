"""Base and cross-verification prompt rendering.

Templates live in ``ucascade/templates/<scale>.txt``. Each file holds a
``base:`` line (placeholder ``{text}``) and a ``repredict:`` line
(placeholder ``{data}``); blank lines and ``#`` comments are ignored.
The enhanced prompt is ``base + " " + repredict``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .core import SampleRecord
from .errors import EmptyText, InvalidInput, SchemaError, UnsupportedScale

PLACEHOLDER = re.compile(r"\{(text|data)\}")
_ANY_PLACEHOLDER = re.compile(r"\{[A-Za-z_]+\}")


@dataclass(frozen=True)
class PromptTemplate:
    base: str
    repredict: str

    def __post_init__(self):
        for part, allowed in ((self.base, {"{text}"}), (self.repredict, {"{data}"})):
            extra = set(_ANY_PLACEHOLDER.findall(part)) - allowed
            if extra:
                raise SchemaError(f"template has unknown placeholders {sorted(extra)}")


def parse_template(source: str) -> PromptTemplate:
    fields = {}
    for line in source.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep or key.strip() not in ("base", "repredict"):
            raise SchemaError(f"bad template line: {line!r}")
        fields[key.strip()] = value.strip()
    if set(fields) != {"base", "repredict"}:
        raise SchemaError("template needs both 'base' and 'repredict' lines")
    return PromptTemplate(**fields)


@lru_cache(maxsize=None)
def load_template(scale_name: str) -> PromptTemplate:
    res = resources.files("ucascade") / "templates" / f"{scale_name}.txt"
    if not res.is_file():
        raise UnsupportedScale(f"no prompt template for scale {scale_name!r}")
    return parse_template(res.read_text(encoding="utf-8"))


def _render(template: str, values: dict) -> str:
    # single pass so substituted text is never re-scanned for placeholders
    return PLACEHOLDER.sub(lambda m: values[m.group(1)], template)


def build_base_prompt(sample: SampleRecord, template: PromptTemplate | None = None) -> str:
    if not sample.text or not sample.text.strip():
        raise EmptyText(f"sample {sample.id} has no text")
    template = template or load_template(sample.scale.name)
    return _render(template.base, {"text": sample.text})


def _fmt(x: float) -> str:
    return f"{x + 0.0:.4f}"  # + 0.0 folds -0.0 into 0.0


def format_data_block(y_s: float, u_s: float, y_l: float, u_l: float) -> str:
    vals = (y_s, u_s, y_l, u_l)
    if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in vals):
        raise InvalidInput(f"prompt data must be finite numbers, got {vals!r}")
    return (
        f"small_prediction={_fmt(y_s)}, small_uncertainty={_fmt(u_s)}, "
        f"mllm_prediction={_fmt(y_l)}, mllm_uncertainty={_fmt(u_l)}"
    )


def build_enhanced_prompt(sample: SampleRecord, y_s: float, u_s: float, y_l: float, u_l: float,
                          template: PromptTemplate | None = None) -> str:
    data = format_data_block(y_s, u_s, y_l, u_l)
    template = template or load_template(sample.scale.name)
    base = build_base_prompt(sample, template)
    return base + " " + _render(template.repredict, {"data": data})

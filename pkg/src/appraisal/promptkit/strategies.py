"""The twelve prompting strategies: report and example building blocks.

Strategy names are stable identifiers used in configs, result files, the CLI,
and the HTTP API.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..selection import SelectionSpec


@dataclass(frozen=True)
class PromptStrategy:
    name: str
    use_report: bool
    selection: SelectionSpec | None

    @property
    def example_count(self) -> int:
        return self.selection.count if self.selection else 0


def _strategy(use_report: bool, mode: str | None, count: int) -> PromptStrategy:
    selection = SelectionSpec(mode=mode, count=count) if mode else None
    if selection is None:
        name = "report" if use_report else "zero-shot"
    else:
        name = f"{count} ex. {mode}"
        if use_report:
            name = f"report + {name}"
    return PromptStrategy(name=name, use_report=use_report, selection=selection)


STRATEGIES: tuple[PromptStrategy, ...] = (
    _strategy(False, None, 0),
    _strategy(False, "geo", 3),
    _strategy(False, "hedonic", 3),
    _strategy(False, "geo", 10),
    _strategy(False, "hedonic", 10),
    _strategy(False, "mixed", 10),
    _strategy(True, None, 0),
    _strategy(True, "geo", 3),
    _strategy(True, "hedonic", 3),
    _strategy(True, "geo", 10),
    _strategy(True, "hedonic", 10),
    _strategy(True, "mixed", 10),
)

_BY_NAME = {s.name: s for s in STRATEGIES}


def strategy_names() -> list[str]:
    return [s.name for s in STRATEGIES]


def get_strategy(name: str) -> PromptStrategy:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise KeyError(f"unknown strategy {name!r}; valid names: {strategy_names()}") from None

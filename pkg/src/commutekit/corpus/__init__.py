"""Bundled example programs (``*.vcy``) used by the tests and the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..lang import InputSpec, Program, input_spec, parse

# Programs whose fragments contain heavy busy-work or are otherwise unsuited
# to exhaustive exploration over their whole domain.
EXPLORATION_EXCLUDED = frozenset({"speedup"})


@dataclass(frozen=True)
class CorpusProgram:
    name: str
    source: str
    program: Program

    @property
    def spec(self) -> InputSpec:
        return input_spec(self.program.domain, self.program.init)


def names() -> list[str]:
    root = resources.files(__package__)
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".vcy"))


def source(name: str) -> str:
    return resources.files(__package__).joinpath(f"{name}.vcy").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load(name: str) -> CorpusProgram:
    src = source(name)
    return CorpusProgram(name, src, parse(src))


def path(name: str) -> str:
    return str(resources.files(__package__).joinpath(f"{name}.vcy"))

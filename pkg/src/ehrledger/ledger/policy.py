"""Endorsement policies. Only the ``any-one-of(orgs)`` form is supported."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

_EXPR = re.compile(r"^\s*any-one-of\s*\((.*)\)\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class EndorsementPolicy:
    orgs: frozenset[str]

    def __post_init__(self):
        if not self.orgs:
            raise ValueError("endorsement policy needs at least one organization")

    @classmethod
    def any_one_of(cls, orgs: Iterable[str]) -> "EndorsementPolicy":
        return cls(frozenset(orgs))

    @classmethod
    def parse(cls, expr) -> "EndorsementPolicy":
        """Accept ``"any-one-of(A,B)"`` or a list of organization names."""
        if isinstance(expr, (list, tuple, set, frozenset)):
            return cls.any_one_of(expr)
        m = _EXPR.match(str(expr))
        if not m:
            raise ValueError(f"unsupported policy expression {expr!r}")
        return cls.any_one_of(o.strip() for o in m.group(1).split(",") if o.strip())

    def is_satisfied(self, endorsing_orgs: Iterable[str]) -> bool:
        return any(o in self.orgs for o in endorsing_orgs)

    def __str__(self) -> str:
        return f"any-one-of({','.join(sorted(self.orgs))})"

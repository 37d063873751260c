"""Three-valued verification outcomes and their aggregation."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable

import numpy as np


class Verdict(enum.IntEnum):
    # numeric order is the aggregation precedence
    PROVEN = 0
    UNKNOWN = 1
    REFUTED = 2

    def __str__(self) -> str:
        return self.name.capitalize()


def _plain(v: Any) -> Any:
    """Convert numpy/Fraction values into JSON-friendly objects."""
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, Verdict):
        return str(v)
    if isinstance(v, float) and not np.isfinite(v):
        return repr(v)
    return v


@dataclass
class Certificate:
    verdict: Verdict
    claim: str
    witness: dict | None = None
    margins: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    children: list["Certificate"] = field(default_factory=list)

    @classmethod
    def refuted(cls, claim: str, witness: dict, **kw) -> "Certificate":
        return cls(Verdict.REFUTED, claim, witness=witness, **kw)

    @classmethod
    def unknown(cls, claim: str, reason: str, **kw) -> "Certificate":
        margins = kw.pop("margins", {})
        margins = {"reason": reason, **margins}
        return cls(Verdict.UNKNOWN, claim, margins=margins, **kw)

    @property
    def proven(self) -> bool:
        return self.verdict is Verdict.PROVEN

    @property
    def refuted_(self) -> bool:
        return self.verdict is Verdict.REFUTED

    def to_dict(self) -> dict:
        out = {"verdict": str(self.verdict), "claim": self.claim,
               "witness": _plain(self.witness), "margins": _plain(self.margins),
               "provenance": _plain(self.provenance)}
        if self.children:
            out["children"] = [c.to_dict() for c in self.children]
        return out

    def to_json(self, **kw) -> str:
        kw.setdefault("indent", 2)
        kw.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kw)

    def __str__(self) -> str:
        extra = f" witness={_plain(self.witness)}" if self.witness else ""
        return f"{self.verdict}: {self.claim}{extra}"


def merge(certs: Iterable[Certificate], claim: str = "aggregate",
          provenance: dict | None = None) -> Certificate:
    """Combine stage certificates; Refuted beats Unknown beats Proven."""
    certs = list(certs)
    if not certs:
        return Certificate(Verdict.PROVEN, claim, provenance=provenance or {})
    worst = max(certs, key=lambda c: c.verdict)
    witness = None
    if worst.verdict is not Verdict.PROVEN:
        witness = {"stage": worst.claim, "detail": worst.witness or worst.margins}
    return Certificate(worst.verdict, claim, witness=witness,
                       provenance=provenance or {}, children=certs)


def exit_code(cert: Certificate) -> int:
    return {Verdict.PROVEN: 0, Verdict.REFUTED: 2, Verdict.UNKNOWN: 3}[cert.verdict]

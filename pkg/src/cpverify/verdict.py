"""Verdict objects returned by every policy check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass
class Verdict:
    policy: str
    holds: bool
    witness: Optional[dict] = None
    diagnostics: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "policy": self.policy,
            "holds": self.holds,
            "witness": self.witness,
            "diagnostics": list(self.diagnostics),
        }


def device_path(nodes) -> list:
    """Collapse a layered node path into the sequence of devices it visits."""
    out = []
    for n in nodes:
        if n.kind in ("src", "dst"):
            continue
        if not out or out[-1] != n.device:
            out.append(n.device)
    return out


def hop_count(nodes) -> int:
    """Number of physical hops: consecutive nodes on different devices, endpoints excluded."""
    return max(len(device_path(nodes)) - 1, 0)

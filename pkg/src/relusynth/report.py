"""Construction certificates emitted alongside every synthesized network.

A report records what the builder claims (architecture, residuals, audits)
plus enough synthesis metadata to rebuild the network with different
widths.  Reports are re-verifiable: loading one and re-running the checks
against the network and its target function must reproduce max_residual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class ConstructionReport:
    architecture: str = ""
    max_residual: float = float("nan")
    activation_audits: list = field(default_factory=list)
    rank_audits: list = field(default_factory=list)
    affine_fit_residuals: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    seed: int | None = None
    wall_clock: float = 0.0
    tolerances: dict = field(default_factory=dict)
    plan: dict | None = None

    def to_json_dict(self):
        return {
            "architecture": self.architecture,
            "max_residual": self.max_residual,
            "activation_audits": self.activation_audits,
            "rank_audits": self.rank_audits,
            "affine_fit_residuals": self.affine_fit_residuals,
            "traces": self.traces,
            "seed": self.seed,
            "wall_clock": self.wall_clock,
            "tolerances": self.tolerances,
            "plan": self.plan,
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_json_dict(), indent=indent)

    @staticmethod
    def from_json_dict(d):
        return ConstructionReport(
            architecture=d.get("architecture", ""),
            max_residual=d.get("max_residual", float("nan")),
            activation_audits=d.get("activation_audits", []),
            rank_audits=d.get("rank_audits", []),
            affine_fit_residuals=d.get("affine_fit_residuals", []),
            traces=d.get("traces", []),
            seed=d.get("seed"),
            wall_clock=d.get("wall_clock", 0.0),
            tolerances=d.get("tolerances", {}),
            plan=d.get("plan"),
        )

    @staticmethod
    def from_json(text):
        return ConstructionReport.from_json_dict(json.loads(text))

"""Pydantic report models shared by the CLI and the corpus runner."""

from __future__ import annotations

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from .conslaw import ConservationLawRecord
from .expr import to_dsl

SCHEMA_VERSION = 1


class ItemReport(BaseModel):
    name: str
    kind: str
    verified: Optional[bool] = None
    characteristic: Optional[str] = None
    density_order: Optional[int] = None
    trivial: Optional[bool] = None
    notes: List[str] = Field(default_factory=list)
    data: Dict[str, Any] = Field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.verified is False

    @classmethod
    def from_record(cls, name: str, record: ConservationLawRecord, kind: str = "conservation law") -> "ItemReport":
        return cls(
            name=name,
            kind=kind,
            verified=bool(record.representative.verified),
            characteristic=to_dsl(record.characteristic),
            density_order=record.density_order,
            trivial=record.trivial,
            notes=list(record.notes),
            data={"density": to_dsl(record.representative.rho), "flux": to_dsl(record.representative.sigma)},
        )


class RunReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    command: str
    ok: bool = True
    items: List[ItemReport] = Field(default_factory=list)
    proof_log: Optional[str] = None

    def add(self, item: ItemReport) -> ItemReport:
        self.items.append(item)
        if item.failed:
            self.ok = False
        return item

    def to_json_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)

    def render(self) -> str:
        lines = [f"{self.command}: {'ok' if self.ok else 'FAILED'}"]
        for item in self.items:
            status = {True: "verified", False: "FAILED", None: "-"}[item.verified]
            lines.append(f"  [{status}] {item.kind} {item.name}")
            if item.characteristic is not None:
                lines.append(f"      characteristic: {item.characteristic}")
            if item.density_order is not None:
                order = "trivial" if item.trivial else str(item.density_order)
                lines.append(f"      density order: {order}")
            for key, value in item.data.items():
                lines.append(f"      {key}: {value}")
            for note in item.notes:
                lines.append(f"      note: {note}")
        if self.proof_log:
            lines.append(f"proof log: {self.proof_log}")
        return "\n".join(lines)

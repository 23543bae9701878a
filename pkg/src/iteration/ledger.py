"""
Ledger of the estimates measured during one iteration step.

Every row names the estimate, the target it is compared with, the measured
value, its status and where it was measured.  ``REPORT`` rows record a
quantity without judging it (the δ-inequalities are not expected to hold at
desk scale); ``PASS``/``FAIL`` rows are checks.
"""
import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import pandas as pd
import structlog

logger = structlog.get_logger(__name__)


class RowStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    REPORT = "report"


@dataclass
class LedgerRow:
    name: str
    target: str
    measured: float
    status: RowStatus
    provenance: str
    t: Optional[float] = None
    bound: Optional[float] = None
    extra: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["status"] = self.status.value
        return data


class Ledger:
    """Rows collected while stepping from level q to q + 1."""

    def __init__(self, q: int, meta: Optional[Dict] = None):
        self.q = q
        self.meta = dict(meta or {})
        self.rows: List[LedgerRow] = []

    def report(self, name: str, target: str, measured: float, provenance: str,
               t: Optional[float] = None, **extra) -> LedgerRow:
        row = LedgerRow(name, target, float(measured), RowStatus.REPORT, provenance, t,
                        extra=extra)
        self.rows.append(row)
        return row

    def check(self, name: str, target: str, measured: float, bound: float, provenance: str,
              t: Optional[float] = None, **extra) -> LedgerRow:
        """PASS when measured ≤ bound."""
        status = RowStatus.PASS if float(measured) <= bound else RowStatus.FAIL
        row = LedgerRow(name, target, float(measured), status, provenance, t, bound, extra)
        self.rows.append(row)
        if status is RowStatus.FAIL:
            logger.warning("Ledger check failed", row=name, measured=float(measured),
                           bound=bound, t=t)
        return row

    def extend(self, rows: Iterable[LedgerRow]):
        self.rows.extend(rows)

    def named(self, name: str) -> List[LedgerRow]:
        return [r for r in self.rows if r.name == name]

    def failures(self) -> List[LedgerRow]:
        return [r for r in self.rows if r.status is RowStatus.FAIL]

    @property
    def passed(self) -> bool:
        return not self.failures()

    def to_dict(self) -> Dict:
        return {"q": self.q, "meta": self.meta, "rows": [r.to_dict() for r in self.rows]}

    def to_frame(self) -> pd.DataFrame:
        columns = ["name", "target", "measured", "bound", "status", "t", "provenance"]
        records = [{key: r.to_dict()[key] for key in columns} for r in self.rows]
        return pd.DataFrame.from_records(records, columns=columns)

    def write_json(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float))
        return path

    @classmethod
    def read_json(cls, path) -> "Ledger":
        data = json.loads(Path(path).read_text())
        ledger = cls(data["q"], data.get("meta"))
        for raw in data["rows"]:
            raw["status"] = RowStatus(raw["status"])
            ledger.rows.append(LedgerRow(**raw))
        return ledger

"""
Deterministic diagnostics of a level: norms and spectra as CSV, the step
ledger as JSON and the Prometheus registry as a text file.
"""
import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import structlog

from ..torus.norms import energy_spectrum, l2_inner, norm
from ..utils.error_handling import pipeline_stage
from ..utils.metrics import export_metrics
from .ledger import Ledger
from .state import IterationState, LevelFields

logger = structlog.get_logger(__name__)

DEFAULT_NORMS = ("L2", "Linf", "H1", "H3")


def norm_record(fields: LevelFields, norms: Sequence[str] = DEFAULT_NORMS) -> Dict[str, float]:
    record = {"t": fields.t}
    for name, f in (("v", fields.v), ("b", fields.b)):
        for spec in norms:
            record[f"{name}_{spec}"] = norm(f, spec)
    record["R_L1"], record["M_L1"] = fields.stresses.l1_norms()
    residual = fields.residual()
    record["momentum_residual"] = residual["momentum"]
    record["induction_residual"] = residual["induction"]
    return record


def spectrum_frame(fields: LevelFields) -> pd.DataFrame:
    v, b = energy_spectrum(fields.v), energy_spectrum(fields.b)
    shells = max(len(v), len(b))
    return pd.DataFrame({
        "t": fields.t,
        "shell": np.arange(shells),
        "v": np.pad(v, (0, shells - len(v))),
        "b": np.pad(b, (0, shells - len(b))),
    })


def level_ledger(state: IterationState, times: Sequence[float]) -> Ledger:
    """Rows measurable on a level alone: stress size against the data energy."""
    ledger = Ledger(state.q, meta={"level": state.ladder.level(state.q)})
    data = l2_inner(state.v_in, state.v_in) + l2_inner(state.b_in, state.b_in)
    for t in sorted(float(t) for t in times):
        fields = state.fields_at(t)
        r_l1, m_l1 = fields.stresses.l1_norms()
        ledger.check("level.R_L1", "‖R̊_q‖_L¹ ≤ ‖(v_in, b_in)‖²_L²", r_l1, data, "level q", t)
        ledger.check("level.M_L1", "‖M̊_q‖_L¹ ≤ ‖(v_in, b_in)‖²_L²", m_l1, data, "level q", t)
    return ledger


@pipeline_stage("diagnose")
def diagnose(state: IterationState, times: Sequence[float], directory,
             ledger: Optional[Ledger] = None,
             norms: Sequence[str] = DEFAULT_NORMS) -> Dict[str, Path]:
    """Write ``norms.csv``, ``spectra.csv``, ``metrics.prom`` and, if given, ``ledger.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records: List[Dict[str, float]] = []
    spectra: List[pd.DataFrame] = []
    for t in sorted(float(t) for t in times):
        fields = state.fields_at(t)
        records.append(norm_record(fields, norms))
        spectra.append(spectrum_frame(fields))

    outputs = {"norms": directory / "norms.csv", "spectra": directory / "spectra.csv",
               "metrics": directory / "metrics.prom"}
    pd.DataFrame.from_records(records).to_csv(outputs["norms"], index=False, float_format="%.12e")
    pd.concat(spectra, ignore_index=True).to_csv(outputs["spectra"], index=False,
                                                 float_format="%.12e")
    outputs["metrics"].write_bytes(export_metrics())
    if ledger is not None:
        outputs["ledger"] = ledger.write_json(directory / "ledger.json")
        ledger.to_frame().to_csv(directory / "ledger.csv", index=False)
    summary = {"q": state.q, "times": sorted(float(t) for t in times),
               "files": {key: path.name for key, path in outputs.items()}}
    (directory / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    logger.info("Diagnostics written", directory=str(directory), q=state.q, samples=len(records))
    return outputs

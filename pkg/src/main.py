"""
Convex-Integration Workbench - Command Line Entry Point

    python -m src.main <subcommand> [--config FILE] [--set section.key=value] [--out DIR]

Subcommands: decompose, flows, glue, bootstrap, step, diagnose, mhd-run.
Exit codes: 0 success, 2 precondition failure, 3 resolution failure; the
failure is printed to stderr as a JSON object naming the stage.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from .geometry.directions import load_direction_sets
from .geometry.lemmas import decompose_skew, decompose_sym, skew_decomposition, sym_decomposition
from .iteration.diagnose import diagnose, level_ledger
from .iteration.parameters import Ladder
from .iteration.state import bootstrap, read_state, write_state
from .iteration.step import load_profile, one_step, prepare_step, replay
from .perturbation.bundle import family_norms, write_families
from .solver.gluing import GluedFlow, glue_samples, interior_j_times, write_checkpoints
from .solver.mhd import Integrator, MHDState, integrate
from .cutoffs.partition import build_partition
from .torus.field import SpectralField, random_solenoidal, shear_field
from .torus.grid import Grid
from .torus.tfld import read_field, write_field
from .utils.config import WorkbenchSettings, load_settings
from .utils.error_handling import ErrorCode, ExitCode, PreconditionError, WorkbenchError

logger = structlog.get_logger(__name__)


def configure_logging(level: str = "INFO"):
    """Structured JSON logs on stderr."""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), stream=sys.stderr,
                        format="%(message)s")
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer()
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


# -- shared helpers ---------------------------------------------------------------

def make_grid(settings: WorkbenchSettings) -> Grid:
    grid = settings.grid
    return Grid(grid.n, grid.dealias_fraction, grid.workers)


def initial_data(args, settings: WorkbenchSettings) -> Tuple[SpectralField, SpectralField]:
    """(v_in, b_in) from TFLD files or generated from ``--data``."""
    if args.v or args.b:
        if not (args.v and args.b):
            raise PreconditionError(ErrorCode.CONFIG_INVALID, "--v and --b go together")
        v_in, _ = read_field(args.v)
        b_in, _ = read_field(args.b, v_in.grid)
        return v_in, b_in
    grid = make_grid(settings)
    if args.data == "zero":
        return SpectralField.zeros(grid, 1), SpectralField.zeros(grid, 1)
    if args.data == "shear":
        return shear_field(grid, args.amplitude, 1), shear_field(grid, args.amplitude, 2)
    return (random_solenoidal(grid, args.amplitude, args.band, args.seed),
            random_solenoidal(grid, args.amplitude, args.band, args.seed + 1))


def load_level(args, settings: WorkbenchSettings):
    """Level from ``--state`` (replayed) or level 1 of the initial data."""
    if getattr(args, "state", None):
        v_in, b_in, ladder, meta = read_state(args.state)
        return replay(v_in, b_in, ladder, settings, int(meta["q"]))
    v_in, b_in = initial_data(args, settings)
    return bootstrap(v_in, b_in, Ladder.from_settings(settings))


def parse_times(text: Optional[str]) -> Optional[List[float]]:
    if not text:
        return None
    return [float(t) for t in text.split(",") if t.strip()]


def emit(payload: Dict, out: Optional[Path] = None, name: str = "result.json"):
    text = json.dumps(payload, indent=2, sort_keys=True, default=float)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    print(text)


# -- subcommands -----------------------------------------------------------------

def cmd_decompose(args, settings: WorkbenchSettings) -> Dict:
    matrix = np.asarray(json.loads(Path(args.matrix).read_text()
                                   if Path(args.matrix).exists() else args.matrix), dtype=float)
    catalog = load_direction_sets(args.catalog)
    if args.kind == "skew":
        decomposition = skew_decomposition(catalog.b)
        coefficients = decompose_skew(matrix, decomposition)
    else:
        decomposition = sym_decomposition(catalog.v)
        coefficients = decompose_sym(matrix, decomposition)
    recomposed = decomposition.recompose(coefficients)
    return {"kind": args.kind, "catalog": args.catalog, "coefficients": coefficients.tolist(),
            "radius": decomposition.epsilon,
            "recomposition_error": float(np.max(np.abs(recomposed - matrix)))}


def cmd_flows(args, settings: WorkbenchSettings) -> Dict:
    state = load_level(args, settings)
    context = prepare_step(state, settings)
    t = context.library.params.snap_time(args.t)
    _, bundle = context.builder.at(t)
    index = write_families(bundle, args.out / "families", "family")
    (args.out / "catalog.json").write_text(context.library.catalog.to_json())
    return {"t": t, "index": str(index), "norms": family_norms(bundle),
            "overlaps": context.library.overlaps(t), "supports": bundle.supports,
            "coefficients": bundle.coefficients.to_dict() if bundle.coefficients else None}


def cmd_glue(args, settings: WorkbenchSettings) -> Dict:
    state = load_level(args, settings)
    ladder = state.ladder
    partition = build_partition(ladder.horizon, ladder.tau)
    solver = settings.solver
    flow = GluedFlow(state.source, partition, ladder.ell(state.q),
                     Integrator(solver.dt, solver.cfl, solver.blowup), solver.local_timeout)
    times = parse_times(args.times) or interior_j_times(partition, per_interval=1)
    states = glue_samples(flow, times)
    manifest = write_checkpoints(states, args.out / "glued")
    defects = []
    for glued in states:
        residual = glued.defect()
        r_l1, m_l1 = glued.stresses.l1_norms()
        defects.append({"t": glued.t, "R_L1": r_l1, "M_L1": m_l1, **residual})
    pd.DataFrame.from_records(defects).to_csv(args.out / "glue_defects.csv", index=False,
                                              float_format="%.12e")
    return {"manifest": str(manifest), "samples": len(states), "defects": defects}


def cmd_bootstrap(args, settings: WorkbenchSettings) -> Dict:
    v_in, b_in = initial_data(args, settings)
    state = bootstrap(v_in, b_in, Ladder.from_settings(settings))
    path = write_state(state, args.out)
    return {"state": str(path), **state.to_dict()}


def cmd_step(args, settings: WorkbenchSettings) -> Dict:
    state = load_level(args, settings)
    energy = load_profile(args.energy) if args.energy else None
    helicity = load_profile(args.helicity) if args.helicity else None
    result = one_step(state, settings, energy, helicity)
    path = write_state(result.state, args.out / "state")
    ledger_path = result.ledger.write_json(args.out / "ledger.json")
    result.ledger.to_frame().to_csv(args.out / "ledger.csv", index=False)
    return {"state": str(path), "ledger": str(ledger_path), "q": result.state.q,
            "rows": len(result.ledger.rows),
            "failures": [row.name for row in result.ledger.failures()]}


def cmd_diagnose(args, settings: WorkbenchSettings) -> Dict:
    state = load_level(args, settings)
    times = parse_times(args.times) or np.linspace(0.0, state.ladder.horizon, 5).tolist()
    ledger = level_ledger(state, times)
    outputs = diagnose(state, times, args.out, ledger)
    return {"q": state.q, "files": {key: str(path) for key, path in outputs.items()},
            "failures": [row.name for row in ledger.failures()]}


def cmd_mhd_run(args, settings: WorkbenchSettings) -> Dict:
    v_in, b_in = initial_data(args, settings)
    solver = settings.solver
    samples = parse_times(args.times) or np.linspace(0.0, args.t_end, 9)[1:].tolist()
    trajectory = integrate(MHDState(v_in, b_in, 0.0), args.t_end, solver.dt, samples,
                           solver.cfl, solver.blowup)
    records = [{"t": s.t, "energy": s.energy(), "cross_helicity": s.cross_helicity(),
                "sup_speed": s.sup_speed()} for s in trajectory]
    args.out.mkdir(parents=True, exist_ok=True)
    pd.DataFrame.from_records(records).to_csv(args.out / "trajectory.csv", index=False,
                                              float_format="%.12e")
    final = trajectory[-1]
    write_field(args.out / "v_final.tfld", final.v, final.t, "v")
    write_field(args.out / "b_final.tfld", final.b, final.t, "b")
    return {"samples": len(records), "t_end": final.t, "energy": records[-1]["energy"]}


COMMANDS: Dict[str, Callable] = {
    "decompose": cmd_decompose,
    "flows": cmd_flows,
    "glue": cmd_glue,
    "bootstrap": cmd_bootstrap,
    "step": cmd_step,
    "diagnose": cmd_diagnose,
    "mhd-run": cmd_mhd_run,
}


def _add_data_flags(parser: argparse.ArgumentParser, with_state: bool = True):
    if with_state:
        parser.add_argument("--state", help="state directory written by bootstrap or step")
    parser.add_argument("--v", help="TFLD file of v_in")
    parser.add_argument("--b", help="TFLD file of b_in")
    parser.add_argument("--data", choices=["random", "zero", "shear"], default="random")
    parser.add_argument("--amplitude", type=float, default=0.01)
    parser.add_argument("--band", type=float, default=3.0)
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    common.add_argument("--out", type=Path, default=Path("out"))
    common.add_argument("--log-level", default=os.getenv("LOG_LEVEL", "INFO"))

    parser = argparse.ArgumentParser(prog="workbench",
                                     description="Spectral convex-integration workbench for MHD")
    sub = parser.add_subparsers(dest="command", required=True)

    decompose = sub.add_parser("decompose", parents=[common], help="positive matrix decomposition")
    decompose.add_argument("--kind", choices=["skew", "sym"], required=True)
    decompose.add_argument("--matrix", required=True, help="JSON 3x3 matrix or a file holding one")
    decompose.add_argument("--catalog", choices=["printed", "desk"], default="printed")

    flows = sub.add_parser("flows", parents=[common], help="emit the perturbation families")
    flows.add_argument("--preset", choices=["desk"], default="desk")
    flows.add_argument("--t", type=float, default=0.925)
    _add_data_flags(flows)

    glue = sub.add_parser("glue", parents=[common], help="glue local solutions of a level")
    glue.add_argument("--times", help="comma-separated sample times")
    _add_data_flags(glue)

    boot = sub.add_parser("bootstrap", parents=[common], help="write the level-1 state")
    _add_data_flags(boot, with_state=False)

    step = sub.add_parser("step", parents=[common], help="one iteration step with its ledger")
    step.add_argument("--energy", help="CSV profile e(t) with columns t, value")
    step.add_argument("--helicity", help="CSV profile h(t) with columns t, value")
    _add_data_flags(step)

    diag = sub.add_parser("diagnose", parents=[common], help="norms, spectra and ledger reports")
    diag.add_argument("--times", help="comma-separated sample times")
    _add_data_flags(diag)

    run = sub.add_parser("mhd-run", parents=[common], help="integrate the MHD system")
    run.add_argument("--t-end", type=float, default=1.0)
    run.add_argument("--times", help="comma-separated sample times")
    _add_data_flags(run, with_state=False)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        settings = load_settings(args.config, args.set)
        payload = COMMANDS[args.command](args, settings)
        emit(payload, args.out, f"{args.command}.json")
    except WorkbenchError as e:
        logger.error("Command failed", command=args.command, error=str(e))
        print(json.dumps(e.to_dict(), default=str), file=sys.stderr)
        return e.exit_code.value
    logger.info("Command finished", command=args.command)
    return ExitCode.SUCCESS.value


if __name__ == "__main__":
    sys.exit(main())

"""Quality-of-service sensitivity: re-solve a pool across a parameter grid.

Each cell rebuilds the instance with one knob changed -- the time-window
slack or the detour ratio -- so every window and ride limit is re-derived
from scratch, then solves it and records vehicle count and distance next
to the no-sharing baseline.  A cell that fails (an infeasible
re-derivation, a solver error) is marked and the sweep carries on.
"""

from __future__ import annotations

import csv
import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

from .ctspav import ColGenConfig, solve_ctspav
from .darp import DarpConfig, solve_darp
from .metrics import no_sharing_baseline
from .model import Instance

__all__ = ["SweepCell", "rederive", "sensitivity_sweep", "write_sweep_csv"]

_PARAM_FIELDS = {"delta": "delta_s", "detour": "detour_ratio"}
_PROCEDURES = {"ctspav": (solve_ctspav, ColGenConfig),
               "darp": (solve_darp, DarpConfig)}

CSV_COLUMNS = ["param", "value", "procedure", "objective", "status",
               "vehicle_count", "vmt_m", "no_sharing_vc", "no_sharing_vmt_m",
               "vc_pct_of_no_sharing", "vmt_pct_of_no_sharing", "error"]


@dataclass(frozen=True)
class SweepCell:
    param: str
    value: object
    procedure: str
    objective: str
    status: str
    vehicle_count: Optional[int]
    vmt_m: Optional[int]
    no_sharing_vc: Optional[int]
    no_sharing_vmt_m: Optional[int]
    vc_pct: Optional[float]
    vmt_pct: Optional[float]
    error: Optional[str]


def rederive(inst: Instance, param: str, value) -> Instance:
    """Fresh instance with one parameter replaced and all windows rebuilt."""
    field = _PARAM_FIELDS.get(param)
    if field is None:
        raise ValueError(f"unknown sweep parameter {param!r}; "
                         f"use one of {sorted(_PARAM_FIELDS)}")
    value = int(value) if param == "delta" else float(value)
    return dataclasses.replace(inst, **{field: value})


def _solve_cell(spec) -> SweepCell:
    (inst, param, value, procedure, objective,
     backend, time_limit_s, mip_time_limit_s) = spec
    solve, config_cls = _PROCEDURES[procedure]
    try:
        cell_inst = rederive(inst, param, value)
        res = solve(cell_inst, config_cls(
            objective=objective, backend=backend,
            time_limit_s=time_limit_s, mip_time_limit_s=mip_time_limit_s))
        ns_vc, ns_vmt = no_sharing_baseline(cell_inst)
        vc, vmt = res.vc, res.distance_m
        return SweepCell(
            param=param, value=value, procedure=procedure,
            objective=objective, status=res.status,
            vehicle_count=vc, vmt_m=vmt,
            no_sharing_vc=ns_vc, no_sharing_vmt_m=ns_vmt,
            vc_pct=None if vc is None else 100.0 * vc / ns_vc,
            vmt_pct=None if vmt is None else 100.0 * vmt / ns_vmt,
            error=None)
    except Exception as exc:               # cell failures must not abort
        return SweepCell(
            param=param, value=value, procedure=procedure,
            objective=objective, status="error",
            vehicle_count=None, vmt_m=None,
            no_sharing_vc=None, no_sharing_vmt_m=None,
            vc_pct=None, vmt_pct=None,
            error=f"{type(exc).__name__}: {exc}")


def sensitivity_sweep(inst: Instance, param: str, values: Sequence,
                      procedure: str = "ctspav", objective: str = "lex",
                      backend: Optional[str] = None,
                      time_limit_s: Optional[float] = None,
                      mip_time_limit_s: Optional[float] = None,
                      workers: int = 1) -> List[SweepCell]:
    """Solve the pool once per grid value; cells come back in grid order."""
    if param not in _PARAM_FIELDS:
        raise ValueError(f"unknown sweep parameter {param!r}")
    if procedure not in _PROCEDURES:
        raise ValueError(f"unknown procedure {procedure!r}; "
                         f"use one of {sorted(_PROCEDURES)}")
    if objective not in ("lex", "distance"):
        raise ValueError(f"objective must be 'lex' or 'distance', "
                         f"got {objective!r}")
    specs = [(inst, param, v, procedure, objective,
              backend, time_limit_s, mip_time_limit_s) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_cell, specs))
    return [_solve_cell(s) for s in specs]


def write_sweep_csv(cells: Sequence[SweepCell],
                    path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for c in cells:
            row = [c.param, c.value, c.procedure, c.objective, c.status,
                   c.vehicle_count, c.vmt_m, c.no_sharing_vc,
                   c.no_sharing_vmt_m, c.vc_pct, c.vmt_pct, c.error]
            writer.writerow(["" if v is None else v for v in row])

"""Execute the replication matrix of an experiment plan."""
from __future__ import annotations

import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

from ..schemes import run_admlsa, run_adnsa, run_mlsa, run_nsa, run_sa
from ..streams import child_seed
from .config import CellSpec, ExperimentPlan

__all__ = ["ResultRow", "CellFailure", "Execution", "execute", "run_cell"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    epsilon: float
    run: int
    estimate: float
    abs_error: float
    inner_evals: int
    wall_time_s: float


@dataclass(frozen=True)
class CellFailure:
    scheme: str
    epsilon: float
    run: int
    error: str


@dataclass
class Execution:
    rows: List[ResultRow] = field(default_factory=list)
    failures: List[CellFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _dispatch(cell: CellSpec, model, seed):
    cfg = cell.config
    if cell.kind == "sa":
        return run_sa(cfg, model, cell.n_iters, seed)
    if cell.kind == "nsa":
        return run_nsa(cfg, model, cell.level, cell.n_iters, seed)
    if cell.kind == "adnsa":
        return run_adnsa(cfg, model, cell.level, cell.n_iters, seed)
    if cell.kind == "mlsa":
        return run_mlsa(cfg, model, cell.plan, seed)
    return run_admlsa(cfg, model, cell.plan, seed)


def run_cell(plan: ExperimentPlan, s: int, e: int, rep: int):
    """One replication; the seed depends only on (master seed, scheme, accuracy, replication)."""
    spec = plan.schemes[s]
    cell = spec.cells[e]
    seed = child_seed(plan.seed, spec.name, e, rep)
    try:
        run = _dispatch(cell, plan.model, seed)
    except Exception as exc:  # recorded per cell, never fatal for the batch
        log.debug("cell %s/%s/%s failed:\n%s", spec.name, e, rep, traceback.format_exc())
        return CellFailure(spec.name, cell.epsilon, rep, f"{type(exc).__name__}: {exc}")
    err = abs(run.estimate - plan.reference) if plan.reference is not None else math.nan
    return ResultRow(spec.name, cell.epsilon, rep, float(run.estimate), float(err),
                     int(run.inner_evals), float(run.wall_time))


_PLAN: Optional[ExperimentPlan] = None


def _install(plan):
    global _PLAN
    _PLAN = plan


def _worker(task):
    return run_cell(_PLAN, *task)


def execute(plan: ExperimentPlan, parallelism: int = 1, progress=None) -> Execution:
    """Run every (scheme, accuracy, replication) cell.

    Output order is canonical regardless of ``parallelism``; every field but
    ``wall_time_s`` is a function of the plan and its master seed only.
    """
    if int(parallelism) < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism!r}")
    tasks = plan.cells()
    if parallelism == 1:
        results = []
        for i, t in enumerate(tasks):
            results.append(run_cell(plan, *t))
            if progress:
                progress(i + 1, len(tasks))
    else:
        chunk = max(1, len(tasks) // (8 * parallelism))
        with ProcessPoolExecutor(max_workers=parallelism, initializer=_install,
                                 initargs=(plan,)) as pool:
            results = []
            for i, res in enumerate(pool.map(_worker, tasks, chunksize=chunk)):
                results.append(res)
                if progress:
                    progress(i + 1, len(tasks))
    out = Execution()
    for res in results:
        (out.failures if isinstance(res, CellFailure) else out.rows).append(res)
    return out

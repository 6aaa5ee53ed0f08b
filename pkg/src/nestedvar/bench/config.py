"""Experiment plans: YAML loading, validation and per-cell resolution."""
from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml

from .._validation import parse_number
from ..models import NestedLossModel, model_from_config
from ..numerics import BiasLadder, StepSchedule
from ..planning import (LevelPlan, plan_iterations_admlsa, plan_iterations_mlsa,
                        plan_iterations_single, plan_levels_adaptive, plan_levels_mlsa)
from ..refinement import Framework, RefinementConfig, ceil_tol, heuristic_parameters
from ..schemes import SCHEMES, SchemeConfig

__all__ = ["PlanError", "SchemeSpec", "CellSpec", "ExperimentPlan", "load_plan", "plan_from_dict",
           "bundled_config", "BUNDLED"]

DEFAULT_REPLICATIONS = 200
BUNDLED = ("option_study", "option_desk", "swap_study", "swap_desk")
SEED_ENV = "MLSA_SEED"


class PlanError(ValueError):
    """A config file that does not describe a valid experiment."""


@dataclass(frozen=True)
class CellSpec:
    """Resolved parametrization of one (scheme, accuracy) cell."""

    epsilon: float
    config: SchemeConfig
    kind: str
    level: Optional[int] = None
    n_iters: Optional[int] = None
    plan: Optional[LevelPlan] = None


@dataclass(frozen=True)
class SchemeSpec:
    name: str
    kind: str
    cells: Tuple[CellSpec, ...]


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    model: NestedLossModel
    alpha: float
    accuracies: Tuple[float, ...]
    schemes: Tuple[SchemeSpec, ...]
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0
    output_dir: str = "results"
    reference: Optional[float] = None
    raw: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def cells(self):
        """All ``(scheme index, epsilon index, replication)`` triples in canonical order."""
        return [(s, e, r) for s in range(len(self.schemes))
                for e in range(len(self.accuracies)) for r in range(self.replications)]


def _fail(where, msg):
    raise PlanError(f"{where}: {msg}")


def _num(value, where):
    try:
        return parse_number(value)
    except (TypeError, ValueError) as exc:
        _fail(where, str(exc))


def _step(spec, where) -> StepSchedule:
    if not isinstance(spec, dict) or "a" not in spec:
        _fail(where, "step needs at least 'a' (and optional 'b', 'beta')")
    try:
        return StepSchedule(a=_num(spec["a"], where), b=_num(spec.get("b", 0), where),
                            beta=_num(spec.get("beta", 1), where))
    except ValueError as exc:
        _fail(where, str(exc))


def _framework(spec, where) -> Framework:
    spec = spec or {}
    kind = str(spec.get("framework", "lp")).lower()
    try:
        if kind == "lp":
            return Framework.lp(_num(spec.get("p_star", 11), where),
                                delta=_num(spec.get("delta", 0.95), where),
                                gamma1=_num(spec.get("gamma1", 1), where))
        return Framework(kind)
    except ValueError as exc:
        _fail(where, str(exc))


def _refinement(spec, fw, where) -> RefinementConfig:
    try:
        theta, r = heuristic_parameters(fw.p_star, fw)
    except ValueError as exc:
        _fail(where, str(exc))
    theta = _num(spec.get("theta", theta), where)
    r = _num(spec.get("r", 1.0 + 1.0 / theta if "theta" in spec else r), where)
    mode = str(spec.get("mode", "constant")).lower()
    try:
        return RefinementConfig(framework=fw, theta=theta, r=r, mode=mode,
                                c_a=_num(spec.get("c_a", 1.0), where),
                                c_p=_num(spec.get("c_p", 3.0), where))
    except ValueError as exc:
        _fail(where, str(exc))


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _init(value, model, alpha, where):
    if value is None:
        return 0.0
    if isinstance(value, str) and value.lower() == "analytical":
        var = model.analytical_var(alpha)
        if var is None:
            _fail(where, "init 'analytical' needs a model with a closed-form VaR")
        return var
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            _fail(where, "init interval must be [low, high]")
        return (_num(value[0], where), _num(value[1], where))
    return _num(value, where)


def _resolve_cell(kind, row, eps, model, alpha, where) -> CellSpec:
    fw = _framework(row.get("refinement"), where)
    step = _step(row.get("step"), where)
    scale_c = _num(row.get("scale_c", 1.0), where)
    init = _init(row.get("init", 0.0), model, alpha, where)
    beta = step.beta
    if kind in ("sa", "nsa"):
        n = plan_iterations_single(kind, eps, fw, beta=beta, scale_c=scale_c)
        if kind == "sa":
            ladder = BiasLadder(K=1)
        else:
            h = row.get("h")
            ladder = BiasLadder.from_h0(_num(h, where)) if h is not None \
                else BiasLadder(K=ceil_tol(1.0 / eps))
        cfg = SchemeConfig(alpha=alpha, step=step, ladder=ladder, init=init, scale_c=scale_c)
        return CellSpec(eps, cfg, kind, level=0, n_iters=n)
    if "h0" not in row:
        _fail(where, f"{kind} rows need h0")
    try:
        ladder = BiasLadder.from_h0(_num(row["h0"], where), M=int(row.get("M", 2)))
    except ValueError as exc:
        _fail(where, str(exc))
    ref = None
    if kind in ("adnsa", "admlsa"):
        ref = _refinement(row.get("refinement") or {}, fw, where)
    cfg = SchemeConfig(alpha=alpha, step=step, ladder=ladder, refinement=ref, init=init,
                       scale_c=scale_c)
    try:
        if kind == "adnsa":
            level = row.get("level")
            level = plan_levels_adaptive(ladder, eps, ref.theta) if level is None else int(level)
            n = plan_iterations_single("adnsa", eps, fw, beta=beta, scale_c=scale_c)
            return CellSpec(eps, cfg, kind, level=level, n_iters=n)
        levels = row.get("levels")
        if kind == "mlsa":
            L = plan_levels_mlsa(ladder, eps) if levels is None else int(levels)
            plan = plan_iterations_mlsa(ladder, eps, L, fw, beta=beta, scale_c=scale_c)
        else:
            L = plan_levels_adaptive(ladder, eps, ref.theta) if levels is None else int(levels)
            plan = plan_iterations_admlsa(ladder, eps, L, fw, ref.theta, beta=beta,
                                          scale_c=scale_c)
    except ValueError as exc:
        _fail(where, str(exc))
    return CellSpec(eps, cfg, kind, plan=plan)


def plan_from_dict(doc: Dict[str, Any], source="<config>") -> ExperimentPlan:
    if not isinstance(doc, dict):
        _fail(source, "top level must be a mapping")
    mspec = doc.get("model")
    if not isinstance(mspec, dict) or "kind" not in mspec:
        _fail(f"{source}: model", "needs a 'kind' (option or swap)")
    params = {k: v for k, v in mspec.items() if k != "kind"}
    try:
        model = model_from_config(str(mspec["kind"]), params)
    except (TypeError, ValueError) as exc:
        _fail(f"{source}: model", str(exc))
    alpha = _num(doc.get("alpha"), f"{source}: alpha")
    if not 0 < alpha < 1:
        _fail(f"{source}: alpha", f"must lie in (0, 1), got {alpha}")

    acc = doc.get("accuracies")
    if not isinstance(acc, list) or not acc:
        _fail(f"{source}: accuracies", "needs a non-empty list")
    accuracies = tuple(_num(a, f"{source}: accuracies") for a in acc)
    if any(not 0 < a < 1 for a in accuracies):
        _fail(f"{source}: accuracies", "every accuracy must lie in (0, 1)")
    if any(b >= a for a, b in zip(accuracies, accuracies[1:])):
        _fail(f"{source}: accuracies", "grid must be strictly decreasing")

    reps = doc.get("replications", DEFAULT_REPLICATIONS)
    if not isinstance(reps, int) or reps < 1:
        _fail(f"{source}: replications", f"must be a positive integer, got {reps!r}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        _fail(f"{source}: seed", f"must be a non-negative integer, got {seed!r}")

    defaults = {k: doc[k] for k in ("step", "refinement", "init", "scale_c") if k in doc}
    entries = doc.get("schemes")
    if not isinstance(entries, list) or not entries:
        _fail(f"{source}: schemes", "scheme list must be non-empty")
    specs, names = [], set()
    for i, entry in enumerate(entries):
        where = f"{source}: schemes[{i}]"
        if not isinstance(entry, dict) or "scheme" not in entry:
            _fail(where, "each scheme needs a 'scheme' key")
        kind = str(entry["scheme"]).lower()
        if kind not in SCHEMES:
            _fail(where, f"unknown scheme {kind!r}; expected one of {SCHEMES}")
        name = str(entry.get("name", kind))
        if name in names:
            _fail(where, f"duplicate scheme name {name!r}")
        names.add(name)
        base = _merge(defaults, {k: v for k, v in entry.items()
                                 if k not in ("scheme", "name", "rows")})
        rows = entry.get("rows")
        if rows is None:
            rows = [{}] * len(accuracies)
        if not isinstance(rows, list) or len(rows) != len(accuracies):
            _fail(where, f"rows must list one entry per accuracy ({len(accuracies)})")
        cells = tuple(
            _resolve_cell(kind, _merge(base, row), eps, model, alpha, f"{where}.rows[{j}]")
            for j, (row, eps) in enumerate(zip(rows, accuracies)))
        specs.append(SchemeSpec(name, kind, cells))

    return ExperimentPlan(
        name=str(doc.get("name", Path(str(source)).stem)),
        model=model, alpha=alpha, accuracies=accuracies, schemes=tuple(specs),
        replications=reps, seed=seed, output_dir=str(doc.get("output_dir", "results")),
        reference=model.analytical_var(alpha), raw=doc)


def _read(path) -> Tuple[Dict[str, Any], str]:
    path = Path(path)
    if not path.exists():
        name = str(path)
        if name in BUNDLED:
            return _read_bundled(name)
        raise PlanError(f"{path}: no such config file")
    try:
        return yaml.safe_load(path.read_text()), str(path)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise PlanError(f"{path}: parse error{loc}: {getattr(exc, 'problem', exc)}") from None


def _read_bundled(name):
    text = resources.files(__package__).joinpath("configs", f"{name}.yaml").read_text()
    return yaml.safe_load(text), name


def bundled_config(name: str) -> Path:
    return Path(str(resources.files(__package__).joinpath("configs", f"{name}.yaml")))


def load_plan(path: Union[str, os.PathLike], *, seed: Optional[int] = None,
              replications: Optional[int] = None) -> ExperimentPlan:
    """Parse and validate a plan; ``path`` may also name a bundled config.

    Precedence for the master seed: ``seed`` argument, then the
    ``MLSA_SEED`` environment variable, then the file.
    """
    doc, source = _read(path)
    doc = dict(doc or {})
    env = os.environ.get(SEED_ENV)
    if seed is not None:
        doc["seed"] = int(seed)
    elif env:
        try:
            doc["seed"] = int(env)
        except ValueError:
            raise PlanError(f"{SEED_ENV}={env!r} is not an integer") from None
    if replications is not None:
        doc["replications"] = int(replications)
    return plan_from_dict(doc, source)


def scheme_rows_for(plan: ExperimentPlan, name: str) -> List[CellSpec]:
    for s in plan.schemes:
        if s.name == name:
            return list(s.cells)
    raise KeyError(name)

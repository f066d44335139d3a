"""Counterfactual scenarios, share sweeps, and budgeted targeting.

A ``Scenario`` is a declarative list of covariate edits (add, multiply, set,
or subtract floored at zero) applied to the rows matched by a predicate over
alternative ids, observation ids, and covariate conditions. Edit amounts are
tiny product expressions that may reference a sweep parameter and other
covariate columns, e.g. ``"toll * crossings"``. Scenarios never mutate the
input dataset; every application returns an edited copy.

``enumerate_shares`` aggregates predicted probabilities into expected
per-alternative counts E[N_j] = sum_i w_i P_ij, and ``sweep`` repeats that
over a grid of the scenario's sweep parameter.

``select_targets`` ranks individuals for an incentive (a fare subsidy whose
cost is borne per selected individual) by predicted probability gain per
dollar under a selection model, takes the affordable prefix of the ranking,
and evaluates the realized efficiency of that selection under a separate
truth model: total cost divided by the truth model's total probability gain.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .data import ChoiceDataset
from .errors import EmptySelection, MissingColumn, SpecError
from .estimation import EstimationResult
from .likelihood import ModelSpec, NaturalParams, probabilities

__all__ = [
    "EditCondition",
    "ScenarioEdit",
    "Scenario",
    "apply_scenario",
    "enumerate_shares",
    "sweep",
    "TargetingProblem",
    "SelectionReport",
    "select_targets",
]

_OPS = ("add", "multiply", "set", "subtract_floor0")
_CMPS = {
    "gt": np.greater,
    "ge": np.greater_equal,
    "lt": np.less,
    "le": np.less_equal,
    "eq": np.equal,
    "ne": np.not_equal,
}
_TOKEN = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class EditCondition:
    """Numeric row filter: column <cmp> value."""

    column: str
    cmp: str
    value: float

    def mask(self, data: ChoiceDataset) -> np.ndarray:
        if self.cmp not in _CMPS:
            raise SpecError(f"unknown comparison {self.cmp!r}; use {sorted(_CMPS)}")
        return _CMPS[self.cmp](data.column(self.column), self.value)


@dataclass(frozen=True)
class Amount:
    """Product of a numeric literal and named factors.

    Named factors resolve against the sweep parameter values first, then
    against covariate columns, so ``"toll * crossings"`` multiplies the swept
    toll by each row's crossing count.
    """

    literal: float = 1.0
    names: tuple[str, ...] = ()

    @classmethod
    def parse(cls, raw) -> "Amount":
        if isinstance(raw, (int, float)):
            return cls(literal=float(raw))
        literal, names = 1.0, []
        for tok in str(raw).split("*"):
            tok = tok.strip()
            if not tok:
                raise SpecError(f"empty factor in amount expression {raw!r}")
            try:
                literal *= float(tok)
                continue
            except ValueError:
                pass
            if not _TOKEN.match(tok):
                raise SpecError(f"bad factor {tok!r} in amount expression {raw!r}")
            names.append(tok)
        return cls(literal=literal, names=tuple(names))

    def evaluate(self, data: ChoiceDataset, values: dict[str, float]) -> np.ndarray:
        out = np.full(data.n_rows, self.literal)
        for name in self.names:
            if name in values:
                out = out * values[name]
            else:
                out = out * data.column(name)
        return out


@dataclass(frozen=True)
class ScenarioEdit:
    column: str
    op: str
    amount: Amount
    alt_ids: tuple[int, ...] | None = None
    obs_ids: tuple[int, ...] | None = None
    conditions: tuple[EditCondition, ...] = ()

    def __post_init__(self):
        if self.op not in _OPS:
            raise SpecError(f"unknown edit op {self.op!r}; use {_OPS}")

    def row_mask(self, data: ChoiceDataset) -> np.ndarray:
        mask = np.ones(data.n_rows, dtype=bool)
        if self.alt_ids is not None:
            mask &= np.isin(data.alt_ids, np.asarray(self.alt_ids))
        if self.obs_ids is not None:
            mask &= np.isin(data.obs_ids, np.asarray(self.obs_ids))
        for cond in self.conditions:
            mask &= cond.mask(data)
        return mask


@dataclass(frozen=True)
class Scenario:
    """Named edit list with an optional sweep parameter."""

    name: str
    edits: tuple[ScenarioEdit, ...]
    sweep_parameter: str | None = None
    sweep_grid: tuple[float, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        edits = []
        for e in d["edits"]:
            where = e.get("where", {})
            edits.append(
                ScenarioEdit(
                    column=e["column"],
                    op=e["op"],
                    amount=Amount.parse(e["amount"]),
                    alt_ids=tuple(where["alt_ids"]) if "alt_ids" in where else None,
                    obs_ids=tuple(where["obs_ids"]) if "obs_ids" in where else None,
                    conditions=tuple(
                        EditCondition(c["column"], c["cmp"], float(c["value"]))
                        for c in where.get("conditions", ())
                    ),
                )
            )
        sweep_cfg = d.get("sweep") or {}
        return cls(
            name=d.get("name", "scenario"),
            edits=tuple(edits),
            sweep_parameter=sweep_cfg.get("parameter"),
            sweep_grid=tuple(float(x) for x in sweep_cfg.get("grid", ())),
        )

    @classmethod
    def from_json(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def apply_scenario(
    data: ChoiceDataset,
    scenario: Scenario,
    values: dict[str, float] | None = None,
) -> ChoiceDataset:
    """Return an edited copy of the dataset; the input is untouched."""
    values = dict(values or {})
    if scenario.sweep_parameter and scenario.sweep_parameter not in values:
        raise SpecError(
            f"scenario sweeps {scenario.sweep_parameter!r}; pass its value"
        )
    cov = np.array(data.covariates)
    for edit in scenario.edits:
        try:
            j = data.columns.index(edit.column)
        except ValueError:
            raise MissingColumn(f"edit targets unknown column {edit.column!r}") from None
        mask = edit.row_mask(data)
        amount = edit.amount.evaluate(data, values)[mask]
        if edit.op == "add":
            cov[mask, j] += amount
        elif edit.op == "multiply":
            cov[mask, j] *= amount
        elif edit.op == "set":
            cov[mask, j] = amount
        else:  # subtract_floor0
            cov[mask, j] = np.maximum(cov[mask, j] - amount, 0.0)
    return data.with_covariates(cov)


def enumerate_shares(
    data: ChoiceDataset,
    spec: ModelSpec,
    params: NaturalParams,
    scenario: Scenario | None = None,
    values: dict[str, float] | None = None,
) -> dict[int, tuple[float, float]]:
    """Expected count and share per alternative under an optional scenario.

    E[N_j] = sum over rows of alternative j of w_i P_ij; the counts sum to
    the total observation weight, the shares to one.
    """
    edited = apply_scenario(data, scenario, values) if scenario else data
    P = probabilities(edited, spec, params)
    w_rows = edited.weights
    total = float(np.sum(edited.obs_weights()))
    out = {}
    for a in edited.alternatives:
        mask = edited.alt_ids == a
        count = float(np.sum(w_rows[mask] * P[mask]))
        out[int(a)] = (count, count / total)
    return out


def sweep(
    data: ChoiceDataset,
    spec: ModelSpec,
    params: NaturalParams,
    scenario: Scenario,
) -> list[dict]:
    """Expected counts/shares at every grid point of the sweep parameter."""
    if not scenario.sweep_parameter:
        raise SpecError("scenario has no sweep parameter")
    rows = []
    for value in scenario.sweep_grid:
        shares = enumerate_shares(
            data, spec, params, scenario, {scenario.sweep_parameter: value}
        )
        rows.append({"value": float(value), "by_alt": shares})
    return rows


# -- targeting ---------------------------------------------------------------


@dataclass(frozen=True)
class TargetingProblem:
    """Free-pass targeting: who gets the incentive under a budget.

    The incentive zeroes the target alternative's cost column for the
    selected individual and reduces the related alternatives' costs by the
    individual's target-alternative fare, floored at zero (those alternatives
    partially embed the subsidized fare). The per-individual program cost is
    ``cost_multiplier`` times the fare, e.g. workdays per month when fares
    are per-trip and the pass is monthly.
    """

    data: ChoiceDataset
    selection_model: EstimationResult
    truth_model: EstimationResult
    target_alt: int
    cost_column: str
    related_alts: tuple[int, ...] = ()
    cost_multiplier: float = 22.0


@dataclass
class SelectionReport:
    budget: float
    selected_obs: np.ndarray
    ranked_obs: np.ndarray
    gain_selection: np.ndarray  # per ranked individual, selection model
    gain_truth: np.ndarray  # per ranked individual, truth model
    costs: np.ndarray  # per ranked individual
    total_cost: float
    total_gain_truth: float
    skipped: int = 0

    @property
    def efficiency(self) -> float:
        """Dollars per unit of truth-model probability gain; lower is better."""
        if self.total_gain_truth <= 0:
            return float("inf")
        return self.total_cost / self.total_gain_truth


def _pass_edited(problem: TargetingProblem) -> ChoiceDataset:
    data = problem.data
    j = data.columns.index(problem.cost_column) if problem.cost_column in data.columns else None
    if j is None:
        raise MissingColumn(f"no cost column {problem.cost_column!r}")
    cov = np.array(data.covariates)
    col = cov[:, j]
    target_rows = data.alt_ids == problem.target_alt
    # fare of the target alternative, broadcast to the observation's rows
    fare_by_obs = np.zeros(data.n_obs)
    obs_pos = np.repeat(np.arange(data.n_obs), np.diff(data.obs_ptr))
    fare_by_obs[obs_pos[target_rows]] = col[target_rows]
    fare_rows = fare_by_obs[obs_pos]
    for a in problem.related_alts:
        rows = data.alt_ids == a
        cov[rows, j] = np.maximum(col[rows] - fare_rows[rows], 0.0)
    cov[target_rows, j] = 0.0
    return data.with_covariates(cov)


def _target_probability(data, result: EstimationResult, target_alt) -> np.ndarray:
    P = probabilities(data, result.spec, result.params)
    rows = data.alt_ids == target_alt
    obs_pos = np.repeat(np.arange(data.n_obs), np.diff(data.obs_ptr))
    out = np.zeros(data.n_obs)
    out[obs_pos[rows]] = P[rows]
    return out


def select_targets(
    problem: TargetingProblem,
    budget: float,
    skip_unaffordable: bool = False,
) -> SelectionReport:
    """Greedy prefix selection by predicted gain per dollar.

    Individuals are ranked by (selection-model probability gain) / (pass
    cost), descending, ties broken by ascending observation id. Selection
    walks the ranking and stops at the first individual whose cost would
    exceed the remaining budget; with ``skip_unaffordable`` it instead skips
    them and keeps walking. Raises ``EmptySelection`` when not even the first
    ranked individual is affordable.
    """
    data = problem.data
    edited = _pass_edited(problem)
    p0 = _target_probability(data, problem.selection_model, problem.target_alt)
    p1 = _target_probability(edited, problem.selection_model, problem.target_alt)
    gain = p1 - p0
    t0 = _target_probability(data, problem.truth_model, problem.target_alt)
    t1 = _target_probability(edited, problem.truth_model, problem.target_alt)
    gain_truth = t1 - t0

    obs = data.unique_obs()
    col = data.column(problem.cost_column)
    target_rows = data.alt_ids == problem.target_alt
    obs_pos = np.repeat(np.arange(data.n_obs), np.diff(data.obs_ptr))
    fare = np.zeros(data.n_obs)
    fare[obs_pos[target_rows]] = col[target_rows]
    has_target = np.zeros(data.n_obs, dtype=bool)
    has_target[obs_pos[target_rows]] = True
    cost = problem.cost_multiplier * fare

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(
            cost > 0, gain / np.where(cost > 0, cost, 1.0),
            np.where(gain > 0, np.inf, 0.0),
        )
    ratio = np.where(has_target, ratio, -np.inf)
    order = np.lexsort((obs, -ratio))
    order = order[has_target[order]]

    selected, skipped, spent = [], 0, 0.0
    for i in order:
        c = float(cost[i])
        if spent + c <= budget:
            selected.append(i)
            spent += c
        elif skip_unaffordable:
            skipped += 1
        else:
            break
    if not selected:
        raise EmptySelection(
            f"budget {budget} cannot afford even the top-ranked individual"
        )
    sel = np.array(selected, dtype=np.int64)
    return SelectionReport(
        budget=float(budget),
        selected_obs=obs[sel],
        ranked_obs=obs[order],
        gain_selection=gain[order],
        gain_truth=gain_truth[order],
        costs=cost[order],
        total_cost=float(spent),
        total_gain_truth=float(np.sum(gain_truth[sel])),
        skipped=skipped,
    )

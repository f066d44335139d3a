"""Long-format choice data: loading, validation, shares, and simulation.

A dataset is a table with one row per (observation, alternative) pair.  Each
observation is one choice situation; its rows enumerate the available
alternatives, exactly one of which is marked chosen.  Covariates are numeric
columns that may vary by row.  An optional per-observation weight scales that
observation's contribution to weighted likelihoods and share calculations.

``ChoiceDataset`` stores the table as immutable numpy arrays in canonical row
order (sorted by observation id, then alternative id) and validates the
structural invariants on construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DuplicateAltForObs,
    MissingColumn,
    MultipleChoicesForObs,
    NoChoiceForObs,
    NonNumericCell,
)

__all__ = [
    "ChoiceDataset",
    "SchemaMapping",
    "CovariateSpec",
    "SimulationConfig",
    "load_csv",
    "write_csv",
    "observed_shares",
    "simulate",
]


@dataclass(frozen=True)
class SchemaMapping:
    """Names of the structural columns in a CSV file.

    ``covariates=None`` means every remaining column is a covariate.
    """

    obs_id: str = "obs_id"
    alt_id: str = "alt_id"
    chosen: str = "chosen"
    weight: str | None = None
    covariates: tuple[str, ...] | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "SchemaMapping":
        cov = d.get("covariates")
        return cls(
            obs_id=d.get("obs_id", "obs_id"),
            alt_id=d.get("alt_id", "alt_id"),
            chosen=d.get("chosen", "chosen"),
            weight=d.get("weight"),
            covariates=tuple(cov) if cov is not None else None,
        )


@dataclass(frozen=True)
class ChoiceDataset:
    """Validated long-format choice data.

    Attributes
    ----------
    obs_ids, alt_ids : int arrays, one entry per row, canonically sorted.
    chosen : bool array marking each observation's chosen row.
    weights : float array, constant within an observation, default 1.0.
    covariates : (n_rows, n_columns) float matrix.
    columns : covariate column names, aligned with ``covariates``.
    """

    obs_ids: np.ndarray
    alt_ids: np.ndarray
    chosen: np.ndarray
    weights: np.ndarray
    covariates: np.ndarray
    columns: tuple[str, ...]
    alternatives: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        obs = np.asarray(self.obs_ids, dtype=np.int64)
        alt = np.asarray(self.alt_ids, dtype=np.int64)
        cho = np.asarray(self.chosen, dtype=bool)
        w = np.asarray(self.weights, dtype=float)
        cov = np.atleast_2d(np.asarray(self.covariates, dtype=float))
        if cov.shape[0] != obs.shape[0]:
            cov = cov.reshape(obs.shape[0], -1)
        if not (obs.shape == alt.shape == cho.shape == w.shape):
            raise ValueError("structural arrays must have equal length")
        if cov.shape != (obs.shape[0], len(self.columns)):
            raise ValueError("covariate matrix shape does not match columns")
        if obs.shape[0] == 0:
            raise ValueError("dataset has no rows")
        if not np.all(np.isfinite(cov)):
            raise NonNumericCell("covariates contain NaN or infinite entries")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise NonNumericCell("weights must be finite and non-negative")

        order = np.lexsort((alt, obs))
        obs, alt, cho, w, cov = obs[order], alt[order], cho[order], w[order], cov[order]

        # one row per (obs, alt)
        pair_change = np.empty(obs.shape[0], dtype=bool)
        pair_change[0] = True
        pair_change[1:] = (obs[1:] != obs[:-1]) | (alt[1:] != alt[:-1])
        if not pair_change.all():
            i = int(np.flatnonzero(~pair_change)[0])
            raise DuplicateAltForObs(
                f"alternative {alt[i]} appears twice for observation {obs[i]}"
            )

        starts = np.flatnonzero(np.concatenate(([True], obs[1:] != obs[:-1])))
        ptr = np.concatenate((starts, [obs.shape[0]]))
        n_chosen = np.add.reduceat(cho.astype(np.int64), starts)
        if np.any(n_chosen == 0):
            bad = obs[starts[np.flatnonzero(n_chosen == 0)[0]]]
            raise NoChoiceForObs(f"observation {bad} has no chosen alternative")
        if np.any(n_chosen > 1):
            bad = obs[starts[np.flatnonzero(n_chosen > 1)[0]]]
            raise MultipleChoicesForObs(
                f"observation {bad} has more than one chosen alternative"
            )
        # weights constant within observation: take the first row's value
        w = w[starts][np.repeat(np.arange(starts.shape[0]), np.diff(ptr))]

        for name, arr in (
            ("obs_ids", obs),
            ("alt_ids", alt),
            ("chosen", cho),
            ("weights", w),
            ("covariates", cov),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(
            self, "alternatives", tuple(int(a) for a in np.unique(alt))
        )
        object.__setattr__(self, "_obs_ptr", ptr)

    # -- derived views -----------------------------------------------------

    @property
    def n_rows(self) -> int:
        return int(self.obs_ids.shape[0])

    @property
    def n_obs(self) -> int:
        return int(len(self._obs_ptr) - 1)

    @property
    def obs_ptr(self) -> np.ndarray:
        """Row boundaries of each observation in canonical order."""
        return self._obs_ptr

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.columns.index(name)
        except ValueError:
            raise MissingColumn(f"no covariate column named {name!r}") from None
        return self.covariates[:, j]

    def unique_obs(self) -> np.ndarray:
        return self.obs_ids[self._obs_ptr[:-1]]

    def chosen_alt_by_obs(self) -> np.ndarray:
        return self.alt_ids[np.flatnonzero(self.chosen)]

    def obs_weights(self) -> np.ndarray:
        return self.weights[self._obs_ptr[:-1]]

    def with_covariates(self, covariates: np.ndarray) -> "ChoiceDataset":
        """Copy of this dataset with a replaced covariate matrix."""
        return replace(self, covariates=np.array(covariates, dtype=float))

    def subset(self, keep_obs: np.ndarray) -> "ChoiceDataset":
        """Rows belonging to the given observation ids (set semantics)."""
        mask = np.isin(self.obs_ids, np.asarray(keep_obs))
        return ChoiceDataset(
            obs_ids=self.obs_ids[mask],
            alt_ids=self.alt_ids[mask],
            chosen=self.chosen[mask],
            weights=self.weights[mask],
            covariates=self.covariates[mask],
            columns=self.columns,
        )

    def resample(self, obs_order: np.ndarray) -> "ChoiceDataset":
        """Multiset of observations (with repeats), renumbered 0..n-1.

        Used by bootstrap resampling: each occurrence of an observation id in
        ``obs_order`` becomes a fresh observation in the result.
        """
        uniq = self.unique_obs()
        pos_of = {int(o): i for i, o in enumerate(uniq)}
        ptr = self._obs_ptr
        rows = []
        new_obs = []
        for new_id, o in enumerate(np.asarray(obs_order)):
            i = pos_of[int(o)]
            sl = np.arange(ptr[i], ptr[i + 1])
            rows.append(sl)
            new_obs.append(np.full(sl.shape[0], new_id, dtype=np.int64))
        rows = np.concatenate(rows)
        return ChoiceDataset(
            obs_ids=np.concatenate(new_obs),
            alt_ids=self.alt_ids[rows],
            chosen=self.chosen[rows],
            weights=self.weights[rows],
            covariates=self.covariates[rows],
            columns=self.columns,
        )


def load_csv(path, schema: SchemaMapping | None = None) -> ChoiceDataset:
    """Read a long-format CSV into a validated ``ChoiceDataset``.

    Raises ``MissingColumn`` when a mapped column is absent, ``NonNumericCell``
    when a cell cannot be parsed as a number, and the structural errors from
    ``ChoiceDataset`` when the table is not valid long format.
    """
    schema = schema or SchemaMapping()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn("empty CSV file") from None
        rows = list(reader)

    index = {name: i for i, name in enumerate(header)}
    for col in (schema.obs_id, schema.alt_id, schema.chosen):
        if col not in index:
            raise MissingColumn(f"required column {col!r} not in header {header}")
    if schema.weight is not None and schema.weight not in index:
        raise MissingColumn(f"weight column {schema.weight!r} not in header")

    if schema.covariates is not None:
        cov_names = list(schema.covariates)
        for col in cov_names:
            if col not in index:
                raise MissingColumn(f"covariate column {col!r} not in header")
    else:
        structural = {schema.obs_id, schema.alt_id, schema.chosen}
        if schema.weight:
            structural.add(schema.weight)
        cov_names = [c for c in header if c not in structural]

    def parse(col, kind, cast):
        j = index[col]
        out = []
        for r, row in enumerate(rows):
            cell = row[j]
            try:
                out.append(cast(cell))
            except (ValueError, IndexError):
                raise NonNumericCell(
                    f"row {r + 2}, column {col!r}: cannot parse {cell!r} as {kind}"
                ) from None
        return out

    obs = parse(schema.obs_id, "integer", lambda s: int(float(s)))
    alt = parse(schema.alt_id, "integer", lambda s: int(float(s)))
    cho = parse(schema.chosen, "0/1 flag", lambda s: _parse_chosen(s))
    if schema.weight is not None:
        w = parse(schema.weight, "number", float)
    else:
        w = [1.0] * len(rows)
    cov = np.empty((len(rows), len(cov_names)))
    for k, col in enumerate(cov_names):
        cov[:, k] = parse(col, "number", float)

    return ChoiceDataset(
        obs_ids=np.array(obs),
        alt_ids=np.array(alt),
        chosen=np.array(cho, dtype=bool),
        weights=np.array(w),
        covariates=cov,
        columns=tuple(cov_names),
    )


def _parse_chosen(s):
    v = float(s)
    if v not in (0.0, 1.0):
        raise ValueError(s)
    return bool(v)


def write_csv(data: ChoiceDataset, path, weight_column: str = "weight") -> None:
    """Write a dataset back to CSV with round-trip float precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["obs_id", "alt_id", "chosen", weight_column, *data.columns])
        for i in range(data.n_rows):
            writer.writerow(
                [
                    int(data.obs_ids[i]),
                    int(data.alt_ids[i]),
                    int(data.chosen[i]),
                    repr(float(data.weights[i])),
                    *[repr(float(x)) for x in data.covariates[i]],
                ]
            )


def observed_shares(data: ChoiceDataset) -> dict[int, float]:
    """Weighted share of observations choosing each alternative.

    Every alternative present in the data appears in the result, with share
    0.0 for alternatives never chosen. Shares sum to one.
    """
    w = data.obs_weights()
    chosen_alt = data.chosen_alt_by_obs()
    total = float(np.sum(w))
    shares = {int(a): 0.0 for a in data.alternatives}
    for a in data.alternatives:
        shares[int(a)] = float(np.sum(w[chosen_alt == a]) / total)
    return shares


# -- simulation ------------------------------------------------------------------


@dataclass(frozen=True)
class CovariateSpec:
    """Uniform sampling bounds for one covariate column."""

    name: str
    low: float
    high: float


@dataclass(frozen=True)
class SimulationConfig:
    """Everything needed to draw a synthetic dataset.

    ``spec`` and ``true_params`` follow the model types used for estimation;
    every simulated observation sees the full set of ``alternatives``.
    """

    spec: "ModelSpec"  # noqa: F821 - forward ref, resolved at call time
    true_params: "NaturalParams"  # noqa: F821
    alternatives: tuple[int, ...]
    n_obs: int
    covariates: tuple[CovariateSpec, ...]
    seed: int = 0


def simulate(config: SimulationConfig) -> ChoiceDataset:
    """Draw covariates and choices from the model's probability law.

    Each observation gets its own random stream spawned from the master seed,
    so results do not depend on evaluation order or worker count. Within an
    observation the stream is consumed in a fixed order: covariates first
    (row-major over alternatives and columns), then one uniform for the
    choice draw.
    """
    from .likelihood import probabilities_from_design, build_design_matrix
    from .errors import InvalidParams

    if config.n_obs < 1:
        raise ValueError("n_obs must be at least 1")
    alts = tuple(int(a) for a in config.alternatives)
    if len(alts) < 2:
        raise InvalidParams("need at least two alternatives")
    n, J, C = config.n_obs, len(alts), len(config.covariates)

    lows = np.array([c.low for c in config.covariates])
    highs = np.array([c.high for c in config.covariates])
    if np.any(highs < lows):
        raise ValueError("covariate bounds must satisfy low <= high")

    streams = np.random.SeedSequence(config.seed).spawn(n)
    cov = np.empty((n * J, C))
    u_choice = np.empty(n)
    for i, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        cov[i * J : (i + 1) * J] = lows + (highs - lows) * rng.random((J, C))
        u_choice[i] = rng.random()

    obs_ids = np.repeat(np.arange(n, dtype=np.int64), J)
    alt_ids = np.tile(np.array(alts, dtype=np.int64), n)
    columns = tuple(c.name for c in config.covariates)

    X, alt_index = build_design_matrix(
        config.spec, cov, columns, alt_ids, alts
    )
    P = probabilities_from_design(
        config.spec, config.true_params, X, alt_index, alts,
        obs_ptr=np.arange(0, n * J + 1, J),
    )
    cum = np.cumsum(P.reshape(n, J), axis=1)
    pick = np.sum(cum < u_choice[:, None], axis=1)
    pick = np.minimum(pick, J - 1)
    chosen = np.zeros(n * J, dtype=bool)
    chosen[np.arange(n) * J + pick] = True

    return ChoiceDataset(
        obs_ids=obs_ids,
        alt_ids=alt_ids,
        chosen=chosen,
        weights=np.ones(n * J),
        covariates=cov,
        columns=columns,
    )

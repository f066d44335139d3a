"""Model specification, parameter packing, probabilities, and gradients.

The model for observation i choosing among its available alternatives C_i is

    P_ij = exp(tau_j + S(V_ij, gamma_j)) / sum_{l in C_i} exp(tau_l + S(V_il, gamma_l))

with systematic index V_ij = x_ij . beta, a per-alternative intercept tau_j
(one alternative's tau fixed at zero for identification), and a transformation
family S from :mod:`flexlogit.transforms`, possibly carrying per-alternative
shape parameters gamma_j.

Parameters travel in two representations. ``NaturalParams`` holds the
human-readable values (beta, intercepts keyed by alternative id, shapes on
their natural scale). ``Packing`` flattens them into one unconstrained vector
for the optimizer: the beta block in specification order, then free
intercepts by ascending alternative id, then free unconstrained shapes by
ascending alternative id. ``gradient`` returns derivatives in that packed
order, with the chain rule through each family's reparameterization applied.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import ChoiceDataset
from .errors import (
    InvalidParams,
    MissingColumn,
    NonFiniteIndex,
    SpecDataMismatch,
)
from .transforms import get_family

__all__ = [
    "Coefficient",
    "ModelSpec",
    "NaturalParams",
    "Packing",
    "Design",
    "build_design",
    "probabilities",
    "log_likelihood",
    "ll_by_alternative",
    "gradient",
]

PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class Coefficient:
    """One entry of beta: applies ``column`` to the listed alternatives.

    ``alts=None`` applies the coefficient to every alternative (a generic
    coefficient); otherwise the covariate enters only the listed
    alternatives' indices, which is how alternative-specific effects are
    written in long format.
    """

    name: str
    column: str
    alts: tuple[int, ...] | None = None


@dataclass(frozen=True)
class ModelSpec:
    """A transform family plus the design of the systematic index."""

    transform: str
    ref_alt: int
    coefficients: tuple[Coefficient, ...]
    shape_ref_alt: int | None = None

    def __post_init__(self):
        get_family(self.transform)  # unknown name fails fast
        object.__setattr__(self, "coefficients", tuple(self.coefficients))
        names = [c.name for c in self.coefficients]
        if len(set(names)) != len(names):
            raise SpecDataMismatch("coefficient names must be unique")
        if self.shape_ref_alt is not None and self.transform != "asym_logit":
            raise SpecDataMismatch(
                "shape_ref_alt applies only to the asym_logit transform"
            )

    @property
    def family(self):
        return get_family(self.transform)

    def effective_shape_ref(self) -> int | None:
        if self.transform != "asym_logit":
            return None
        return self.ref_alt if self.shape_ref_alt is None else self.shape_ref_alt

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        coefs = tuple(
            Coefficient(
                name=c["name"],
                column=c["column"],
                alts=None
                if c.get("alts") in (None, "all")
                else tuple(int(a) for a in c["alts"]),
            )
            for c in d["coefficients"]
        )
        return cls(
            transform=d["transform"],
            ref_alt=int(d["ref_alt"]),
            coefficients=coefs,
            shape_ref_alt=None
            if d.get("shape_ref_alt") is None
            else int(d["shape_ref_alt"]),
        )

    @classmethod
    def from_json(cls, path) -> "ModelSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "transform": self.transform,
            "ref_alt": self.ref_alt,
            "shape_ref_alt": self.shape_ref_alt,
            "coefficients": [
                {
                    "name": c.name,
                    "column": c.column,
                    "alts": "all" if c.alts is None else list(c.alts),
                }
                for c in self.coefficients
            ],
        }


@dataclass
class NaturalParams:
    """Parameters on their natural scale.

    ``tau`` maps alternative id to intercept; missing ids default to zero and
    the reference alternative must be zero. ``gamma`` maps alternative id to
    that alternative's shape value (a 2-tuple for two-shape families);
    families without shapes take ``gamma=None``.
    """

    beta: np.ndarray
    tau: dict[int, float] = field(default_factory=dict)
    gamma: dict[int, float | tuple[float, float]] | None = None
    # Unconstrained shape block cached by Packing.unpack so that
    # pack(unpack(v)) round-trips bit-exactly through exp/log pairs.
    packed_shapes: np.ndarray | None = None

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).ravel()

    def tau_vector(self, alternatives) -> np.ndarray:
        return np.array([float(self.tau.get(int(a), 0.0)) for a in alternatives])

    def gamma_matrix(self, alternatives, n_shapes: int) -> np.ndarray | None:
        """(n_alts, n_shapes) matrix of natural shape values."""
        if n_shapes == 0:
            return None
        if self.gamma is None:
            raise InvalidParams("this transform family requires shape parameters")
        out = np.empty((len(alternatives), n_shapes))
        for i, a in enumerate(alternatives):
            try:
                g = self.gamma[int(a)]
            except KeyError:
                raise InvalidParams(f"missing shape value for alternative {a}") from None
            out[i] = np.asarray(g, dtype=float).ravel()
        return out


def validate_params(spec: ModelSpec, params: NaturalParams, alternatives) -> None:
    """Raise ``InvalidParams`` unless params fit the spec and family."""
    if params.beta.shape[0] != len(spec.coefficients):
        raise InvalidParams(
            f"beta has {params.beta.shape[0]} entries; spec declares "
            f"{len(spec.coefficients)} coefficients"
        )
    if not np.all(np.isfinite(params.beta)):
        raise InvalidParams("beta contains non-finite entries")
    tau = params.tau_vector(alternatives)
    if not np.all(np.isfinite(tau)):
        raise InvalidParams("tau contains non-finite entries")
    ref_tau = float(params.tau.get(spec.ref_alt, 0.0))
    if ref_tau != 0.0:
        raise InvalidParams(
            f"tau for reference alternative {spec.ref_alt} must be 0, got {ref_tau}"
        )
    fam = spec.family
    if fam.n_shapes_per_alt:
        g = params.gamma_matrix(alternatives, fam.n_shapes_per_alt)
        if not np.all(np.isfinite(g)):
            raise InvalidParams("gamma contains non-finite entries")
        if fam.name == "asym_logit":
            problem = fam.check_shapes(g[:, 0])
        else:
            problem = fam.check_shapes(g)
        if problem:
            raise InvalidParams(f"{fam.name}: shape constraint violated: {problem}")


class Packing:
    """Bijection between ``NaturalParams`` and one unconstrained vector.

    Layout: beta (specification order), then tau for every non-reference
    alternative ascending, then the unconstrained shape block ascending by
    alternative id (two adjacent slots per alternative for two-shape
    families; the asym_logit shape of its reference alternative is fixed at
    zero and omitted).
    """

    def __init__(self, spec: ModelSpec, alternatives):
        self.spec = spec
        self.alternatives = tuple(int(a) for a in alternatives)
        self.family = spec.family
        if spec.ref_alt not in self.alternatives:
            raise SpecDataMismatch(
                f"ref_alt {spec.ref_alt} is not among alternatives {self.alternatives}"
            )
        self.free_taus = [a for a in self.alternatives if a != spec.ref_alt]
        ns = self.family.n_shapes_per_alt
        shape_ref = spec.effective_shape_ref()
        if shape_ref is not None and shape_ref not in self.alternatives:
            raise SpecDataMismatch(
                f"shape_ref_alt {shape_ref} is not among alternatives"
            )
        self.shape_alts = (
            [a for a in self.alternatives if ns and a != shape_ref] if ns else []
        )
        self.n_beta = len(spec.coefficients)
        self.n_tau = len(self.free_taus)
        self.n_shape = len(self.shape_alts) * ns
        self.dim = self.n_beta + self.n_tau + self.n_shape

    def names(self) -> list[str]:
        out = [f"beta:{c.name}" for c in self.spec.coefficients]
        out += [f"tau:{a}" for a in self.free_taus]
        ns = self.family.n_shapes_per_alt
        for a in self.shape_alts:
            if ns == 1:
                out.append(f"shape:{a}")
            else:
                out += [f"shape:{a}:{k + 1}" for k in range(ns)]
        return out

    # -- shape block helpers ------------------------------------------------

    def _full_unconstrained(self, shape_block: np.ndarray) -> np.ndarray:
        """(n_alts, n_shapes) unconstrained matrix with fixed entries at 0."""
        ns = self.family.n_shapes_per_alt
        full = np.zeros((len(self.alternatives), ns))
        by_alt = shape_block.reshape(len(self.shape_alts), ns)
        rows = [self.alternatives.index(a) for a in self.shape_alts]
        full[rows] = by_alt
        return full

    def _free_entries(self, full: np.ndarray) -> np.ndarray:
        rows = [self.alternatives.index(a) for a in self.shape_alts]
        return full[rows].ravel()

    def natural_shape_matrix(self, shape_block: np.ndarray) -> np.ndarray:
        full = self._full_unconstrained(shape_block)
        if self.family.name == "asym_logit":
            return self.family.to_natural(full[:, 0])[:, None]
        return self.family.to_natural(full)

    # -- pack / unpack --------------------------------------------------------

    def unpack(self, vec: np.ndarray) -> NaturalParams:
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.shape[0] != self.dim:
            raise InvalidParams(f"expected packed vector of length {self.dim}")
        beta = vec[: self.n_beta].copy()
        tau = {a: float(v) for a, v in zip(self.free_taus, vec[self.n_beta : self.n_beta + self.n_tau])}
        tau[self.spec.ref_alt] = 0.0
        gamma = None
        shape_block = vec[self.n_beta + self.n_tau :].copy()
        if self.family.n_shapes_per_alt:
            nat = self.natural_shape_matrix(shape_block)
            ns = self.family.n_shapes_per_alt
            gamma = {
                a: (float(nat[i, 0]) if ns == 1 else tuple(float(x) for x in nat[i]))
                for i, a in enumerate(self.alternatives)
            }
        return NaturalParams(beta=beta, tau=tau, gamma=gamma, packed_shapes=shape_block)

    def pack(self, params: NaturalParams) -> np.ndarray:
        vec = np.empty(self.dim)
        vec[: self.n_beta] = params.beta
        vec[self.n_beta : self.n_beta + self.n_tau] = [
            float(params.tau.get(a, 0.0)) for a in self.free_taus
        ]
        if self.family.n_shapes_per_alt:
            if params.packed_shapes is not None:
                vec[self.n_beta + self.n_tau :] = params.packed_shapes
            else:
                nat = params.gamma_matrix(
                    self.alternatives, self.family.n_shapes_per_alt
                )
                if self.family.name == "asym_logit":
                    full = self.family.from_natural(nat[:, 0])
                    ref = self.alternatives.index(self.spec.effective_shape_ref())
                    full = (full - full[ref])[:, None]
                else:
                    full = self.family.from_natural(nat)
                vec[self.n_beta + self.n_tau :] = self._free_entries(full)
        return vec

    def shape_gradient(self, t_natural: np.ndarray, nat: np.ndarray) -> np.ndarray:
        """Chain dLL/dgamma (per alt, natural) into the free unconstrained block.

        ``t_natural`` and ``nat`` are (n_alts, n_shapes).
        """
        fam = self.family
        if fam.name == "asym_logit":
            g = nat[:, 0]
            t = t_natural[:, 0]
            full = (g * (t - float(t @ g)))[:, None]
        elif fam.name == "qgev":
            full = t_natural * (nat - 1.0)
        else:
            # exp-reparameterized families: d gamma / d u = gamma
            full = t_natural * nat
        return self._free_entries(full)


@dataclass
class Design:
    """Dataset compiled against a spec for fast repeated evaluation."""

    X: np.ndarray
    alt_index: np.ndarray
    obs_ptr: np.ndarray
    row_obs: np.ndarray
    chosen: np.ndarray
    chosen_rows: np.ndarray
    weights_obs: np.ndarray
    alternatives: tuple[int, ...]
    packing: Packing


def build_design_matrix(spec: ModelSpec, covariates, columns, alt_ids, alternatives):
    """Assemble the (n_rows, n_coefficients) index design matrix.

    Entry (r, k) is the coefficient's covariate value when row r's alternative
    is in the coefficient's scope, else zero.
    """
    covariates = np.asarray(covariates, dtype=float)
    columns = list(columns)
    alt_ids = np.asarray(alt_ids)
    n = covariates.shape[0]
    X = np.zeros((n, len(spec.coefficients)))
    alt_pos = {int(a): i for i, a in enumerate(alternatives)}
    try:
        alt_index = np.array([alt_pos[int(a)] for a in alt_ids], dtype=np.int64)
    except KeyError as e:
        raise SpecDataMismatch(f"alternative {e} not in the alternative set") from None
    for k, coef in enumerate(spec.coefficients):
        try:
            j = columns.index(coef.column)
        except ValueError:
            raise MissingColumn(
                f"coefficient {coef.name!r} needs column {coef.column!r}"
            ) from None
        col = covariates[:, j]
        if coef.alts is None:
            X[:, k] = col
        else:
            mask = np.isin(alt_ids, np.asarray(coef.alts))
            X[mask, k] = col[mask]
    return X, alt_index


def build_design(data: ChoiceDataset, spec: ModelSpec) -> Design:
    """Validate the spec against the data and compile evaluation arrays."""
    alternatives = data.alternatives
    if spec.ref_alt not in alternatives:
        raise SpecDataMismatch(
            f"ref_alt {spec.ref_alt} never appears in the data"
        )
    for coef in spec.coefficients:
        if coef.alts is not None:
            missing = set(coef.alts) - set(alternatives)
            if missing:
                raise SpecDataMismatch(
                    f"coefficient {coef.name!r} references unknown alternatives {sorted(missing)}"
                )
    X, alt_index = build_design_matrix(
        spec, data.covariates, data.columns, data.alt_ids, alternatives
    )
    # A constant column applied to every alternative duplicates the intercepts.
    for k, coef in enumerate(spec.coefficients):
        if coef.alts is None and np.ptp(data.column(coef.column)) == 0.0:
            raise SpecDataMismatch(
                f"coefficient {coef.name!r} applies a constant column to all "
                "alternatives; it is collinear with the intercepts"
            )
    ptr = data.obs_ptr
    row_obs = np.repeat(np.arange(data.n_obs), np.diff(ptr))
    return Design(
        X=X,
        alt_index=alt_index,
        obs_ptr=ptr,
        row_obs=row_obs,
        chosen=np.asarray(data.chosen),
        chosen_rows=np.flatnonzero(data.chosen),
        weights_obs=data.obs_weights(),
        alternatives=alternatives,
        packing=Packing(spec, alternatives),
    )


def _s_rows(spec: ModelSpec, params: NaturalParams, X, alt_index, alternatives):
    """Total exponent tau + S per row, plus pieces reused by the gradient."""
    with np.errstate(over="ignore", invalid="ignore"):  # checked just below
        V = X @ params.beta
    if not np.all(np.isfinite(V)):
        raise NonFiniteIndex("systematic index V is NaN or infinite")
    fam = spec.family
    J = len(alternatives)
    if fam.n_shapes_per_alt:
        nat = params.gamma_matrix(alternatives, fam.n_shapes_per_alt)
        g_rows = nat[alt_index, 0] if fam.n_shapes_per_alt == 1 else nat[alt_index]
    else:
        nat, g_rows = None, None
    S = fam.value(V, g_rows, J)
    tau = params.tau_vector(alternatives)
    return S + tau[alt_index], V, g_rows, nat


def _softmax_rows(expo: np.ndarray, obs_ptr: np.ndarray, row_obs: np.ndarray):
    starts = obs_ptr[:-1]
    m = np.maximum.reduceat(expo, starts)
    e = np.exp(expo - m[row_obs])
    denom = np.add.reduceat(e, starts)
    return e / denom[row_obs]


def probabilities_from_design(spec, params, X, alt_index, alternatives, obs_ptr):
    expo, _, _, _ = _s_rows(spec, params, X, alt_index, alternatives)
    row_obs = np.repeat(np.arange(len(obs_ptr) - 1), np.diff(obs_ptr))
    return _softmax_rows(expo, np.asarray(obs_ptr), row_obs)


def probabilities(data: ChoiceDataset, spec: ModelSpec, params: NaturalParams) -> np.ndarray:
    """Per-row choice probabilities; rows of an observation sum to one."""
    validate_params(spec, params, data.alternatives)
    d = build_design(data, spec)
    expo, _, _, _ = _s_rows(spec, params, d.X, d.alt_index, d.alternatives)
    return _softmax_rows(expo, d.obs_ptr, d.row_obs)


def _chosen_logprobs(design: Design, spec, params):
    expo, V, g_rows, nat = _s_rows(
        spec, params, design.X, design.alt_index, design.alternatives
    )
    P = _softmax_rows(expo, design.obs_ptr, design.row_obs)
    pc = P[design.chosen_rows]
    floored = int(np.sum(pc < PROB_FLOOR))
    logp = np.log(np.maximum(pc, PROB_FLOOR))
    return logp, P, V, g_rows, nat, floored


def log_likelihood(
    data: ChoiceDataset,
    spec: ModelSpec,
    params: NaturalParams,
    use_weights: bool = False,
) -> float:
    """Sum of log chosen-probabilities, optionally weighted.

    Chosen probabilities are floored at 1e-300 before the log so the result
    is never -inf; the flooring count is surfaced through estimation
    diagnostics.
    """
    validate_params(spec, params, data.alternatives)
    d = build_design(data, spec)
    ll, _ = ll_with_design(d, spec, params, use_weights)
    return ll


def ll_with_design(design: Design, spec, params, use_weights=False):
    logp, _, _, _, _, floored = _chosen_logprobs(design, spec, params)
    w = design.weights_obs if use_weights else 1.0
    return float(np.sum(w * logp)), floored


def ll_by_alternative(
    data: ChoiceDataset,
    spec: ModelSpec,
    params: NaturalParams,
    use_weights: bool = False,
) -> dict[int, float]:
    """Log-likelihood split by the chosen alternative; values sum to the total."""
    validate_params(spec, params, data.alternatives)
    d = build_design(data, spec)
    logp, *_ = _chosen_logprobs(d, spec, params)
    w = d.weights_obs if use_weights else np.ones(d.weights_obs.shape[0])
    contrib = w * logp
    chosen_alt = data.chosen_alt_by_obs()
    return {
        int(a): float(np.sum(contrib[chosen_alt == a])) for a in data.alternatives
    }


def gradient(
    data: ChoiceDataset,
    spec: ModelSpec,
    params: NaturalParams,
    use_weights: bool = False,
) -> np.ndarray:
    """Analytic score in packed order (beta, free taus, free shapes)."""
    validate_params(spec, params, data.alternatives)
    d = build_design(data, spec)
    return gradient_with_design(d, spec, params, use_weights)


def gradient_with_design(design: Design, spec, params, use_weights=False) -> np.ndarray:
    _, P, V, g_rows, nat, _ = _chosen_logprobs(design, spec, params)
    fam = spec.family
    J = len(design.alternatives)
    w_rows = (
        design.weights_obs[design.row_obs] if use_weights else 1.0
    )
    resid = (design.chosen.astype(float) - P) * w_rows

    pk = design.packing
    out = np.empty(pk.dim)
    dSdV = fam.d_value_dv(V, g_rows, J)
    out[: pk.n_beta] = design.X.T @ (resid * dSdV)

    g_tau = np.bincount(design.alt_index, weights=resid, minlength=J)
    out[pk.n_beta : pk.n_beta + pk.n_tau] = [
        g_tau[design.alternatives.index(a)] for a in pk.free_taus
    ]

    if fam.n_shapes_per_alt:
        dSdg = fam.d_value_dshape(V, g_rows, J)
        if fam.n_shapes_per_alt == 1:
            t = np.bincount(design.alt_index, weights=resid * dSdg, minlength=J)[
                :, None
            ]
        else:
            t = np.column_stack(
                [
                    np.bincount(
                        design.alt_index, weights=resid * dSdg[:, s], minlength=J
                    )
                    for s in range(fam.n_shapes_per_alt)
                ]
            )
        out[pk.n_beta + pk.n_tau :] = pk.shape_gradient(t, nat)
    return out

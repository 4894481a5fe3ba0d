"""Domain types, constrained/unconstrained transforms, and prior densities.

The sampler works on an unconstrained vector, so every positivity- or
positive-definiteness-constrained block carries an explicit transform:
variances and Weibull shapes are sampled as logs, covariance matrices as
lower-triangular Cholesky factors with log diagonals.  Prior densities are
always evaluated on the constrained scale; the log Jacobian of the
constraining map is exposed separately so targets can add it once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import multigammaln

LOG_2PI = math.log(2.0 * math.pi)

# Random-effect dimension per biomarker: (log-baseline, log-growth, log-decay).
RE_DIM = 3


@dataclass(frozen=True)
class BiexpPopulation:
    """Population log-scale parameters of one biomarker trajectory.

    theta1 is the log baseline (biomarker units, g/L), theta2 and theta3 are
    log growth and log decay rates (1/month).
    """

    theta1: float
    theta2: float
    theta3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3], dtype=float)


@dataclass(frozen=True)
class RandomEffects:
    """Per-patient deviations from the population log-scale parameters."""

    b1: float
    b2: float
    b3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.b1, self.b2, self.b3], dtype=float)


@dataclass(frozen=True)
class BiexpParams:
    """Natural-scale trajectory parameters: baseline B, growth G, decay D."""

    B: float
    G: float
    D: float

    def __post_init__(self):
        if not (self.B > 0 and self.G > 0 and self.D > 0):
            raise ValueError("B, G, D must all be positive")


def natural_params(pop: BiexpPopulation, re: RandomEffects) -> BiexpParams:
    """Map (population, random effect) to natural-scale trajectory parameters.

    B = exp(theta1 + b1), G = exp(theta2 + b2), D = exp(theta3 + b3); strictly
    positive for any finite inputs.
    """
    return BiexpParams(
        B=math.exp(pop.theta1 + re.b1),
        G=math.exp(pop.theta2 + re.b2),
        D=math.exp(pop.theta3 + re.b3),
    )


@dataclass(frozen=True)
class VarianceComponents:
    """Residual variance and random-effects covariance of one biomarker."""

    sigma2: float
    omega: np.ndarray  # (3, 3) symmetric positive definite

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        object.__setattr__(self, "omega", om)
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if om.shape != (RE_DIM, RE_DIM) or not np.allclose(om, om.T):
            raise ValueError("omega must be a symmetric 3x3 matrix")
        try:
            np.linalg.cholesky(om)
        except np.linalg.LinAlgError:
            raise ValueError("omega must be positive definite") from None


@dataclass(frozen=True)
class SurvivalParams:
    """Weibull cause-specific hazard parameters for one event type."""

    phi: float  # Weibull shape
    beta0: float  # Weibull log-scale (intercept of the log hazard)
    beta: np.ndarray  # covariate coefficients, shape (p,)
    alpha: np.ndarray  # association coefficients, shape (K, 3)

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "alpha", np.atleast_2d(np.asarray(self.alpha, dtype=float)))
        if not self.phi > 0:
            raise ValueError("phi must be positive")
        if self.alpha.shape[1] != RE_DIM:
            raise ValueError("alpha must have one (baseline, growth, decay) triple per biomarker")


@dataclass(frozen=True)
class LotParams:
    """Full constrained parameter set of one treatment line's joint model."""

    populations: tuple[BiexpPopulation, ...]  # one per biomarker
    variances: tuple[VarianceComponents, ...]  # one per biomarker
    survival: tuple[SurvivalParams, ...]  # one per active event

    def __post_init__(self):
        if len(self.populations) != len(self.variances):
            raise ValueError("one variance block per biomarker required")
        for sp in self.survival:
            if sp.alpha.shape[0] != len(self.populations):
                raise ValueError("alpha rows must match the number of biomarkers")


@dataclass(frozen=True)
class PriorConfig:
    """Weakly informative marginal priors for every parameter block.

    `prior_on` selects whether the half-Cauchy residual-scale prior applies to
    the standard deviation ("sd", the Gelman 2006 convention) or directly to
    the variance ("variance").
    """

    normal_sd: float = 10.0
    halfcauchy_scale_sigma: float = 5.0
    halfcauchy_scale_phi: float = 1.0
    invwishart_df: float = 4.0
    invwishart_scale: np.ndarray = field(default_factory=lambda: np.eye(RE_DIM))
    prior_on: str = "sd"

    def __post_init__(self):
        object.__setattr__(self, "invwishart_scale", np.asarray(self.invwishart_scale, dtype=float))
        if min(self.normal_sd, self.halfcauchy_scale_sigma, self.halfcauchy_scale_phi) <= 0:
            raise ValueError("all prior scales must be positive")
        if self.invwishart_df <= RE_DIM - 1:
            raise ValueError("inverse-Wishart df must exceed dimension - 1")
        if self.prior_on not in ("sd", "variance"):
            raise ValueError("prior_on must be 'sd' or 'variance'")

    def to_dict(self) -> dict:
        return {
            "normal_sd": self.normal_sd,
            "halfcauchy_scale_sigma": self.halfcauchy_scale_sigma,
            "halfcauchy_scale_phi": self.halfcauchy_scale_phi,
            "invwishart_df": self.invwishart_df,
            "invwishart_scale": self.invwishart_scale.tolist(),
            "prior_on": self.prior_on,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PriorConfig":
        d = dict(d)
        if "invwishart_scale" in d:
            d["invwishart_scale"] = np.asarray(d["invwishart_scale"], dtype=float)
        return cls(**d)


# ---------------------------------------------------------------------------
# Elementary log densities, each returning (logpdf, d logpdf / d x).
# ---------------------------------------------------------------------------


def normal_logpdf(x, sd):
    """Centered Normal log density and its derivative in x."""
    x = np.asarray(x, dtype=float)
    lp = -0.5 * LOG_2PI - math.log(sd) - 0.5 * x * x / (sd * sd)
    return lp, -x / (sd * sd)


def halfcauchy_logpdf(x, scale):
    """Half-Cauchy(0, scale) log density on x >= 0 and its derivative."""
    if isinstance(x, (float, int)):
        if x < 0:
            raise ValueError("half-Cauchy support is x >= 0")
        lp = math.log(2.0 / math.pi / scale) - math.log1p((x / scale) ** 2)
        return lp, -2.0 * x / (scale * scale + x * x)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("half-Cauchy support is x >= 0")
    lp = math.log(2.0 / math.pi / scale) - np.log1p((x / scale) ** 2)
    return lp, -2.0 * x / (scale * scale + x * x)


def invwishart_logpdf(omega, scale, df):
    """Inverse-Wishart log density at omega and its gradient wrt omega.

    The gradient treats omega as an unstructured symmetric matrix; callers
    chain it through the Cholesky parameterization.
    """
    omega = np.asarray(omega, dtype=float)
    d = omega.shape[0]
    try:
        chol = np.linalg.cholesky(omega)
    except np.linalg.LinAlgError:
        raise ValueError("omega must be positive definite") from None
    inv = np.linalg.inv(omega)
    sign, logdet_scale = np.linalg.slogdet(scale)
    logdet_omega = 2.0 * np.sum(np.log(np.diag(chol)))
    lp = (
        0.5 * df * logdet_scale
        - 0.5 * df * d * math.log(2.0)
        - multigammaln(0.5 * df, d)
        - 0.5 * (df + d + 1) * logdet_omega
        - 0.5 * np.trace(scale @ inv)
    )
    grad = -0.5 * (df + d + 1) * inv + 0.5 * (inv @ scale @ inv)
    return float(lp), grad


def sigma2_logprior(sigma2, cfg: PriorConfig):
    """Log prior density of the residual variance and its derivative.

    With prior_on="sd" the half-Cauchy is placed on sigma and transformed to a
    density on sigma^2 (including the |d sigma / d sigma^2| factor), so the
    returned value is always a density in sigma^2.
    """
    s = cfg.halfcauchy_scale_sigma
    if cfg.prior_on == "variance":
        lp, dldx = halfcauchy_logpdf(sigma2, s)
        return float(lp), float(dldx)
    sigma = math.sqrt(sigma2)
    lp, dldx = halfcauchy_logpdf(sigma, s)
    lp = float(lp) - math.log(2.0) - math.log(sigma)
    # chain rule: d/d sigma2 [lp_hc(sqrt(x)) - log(2 sqrt(x))]
    dl = float(dldx) / (2.0 * sigma) - 1.0 / (2.0 * sigma2)
    return lp, dl


def log_prior(params: LotParams, cfg: PriorConfig) -> float:
    """Sum of log prior densities on the constrained scale (no Jacobians)."""
    total = []
    for pop, vc in zip(params.populations, params.variances):
        lp_theta, _ = normal_logpdf(pop.as_array(), cfg.normal_sd)
        total.append(float(np.sum(lp_theta)))
        total.append(sigma2_logprior(vc.sigma2, cfg)[0])
        total.append(invwishart_logpdf(vc.omega, cfg.invwishart_scale, cfg.invwishart_df)[0])
    for sp in params.survival:
        coef = np.concatenate(([sp.beta0], sp.beta, sp.alpha.ravel()))
        lp_coef, _ = normal_logpdf(coef, cfg.normal_sd)
        total.append(float(np.sum(lp_coef)))
        lp_phi, _ = halfcauchy_logpdf(sp.phi, cfg.halfcauchy_scale_phi)
        total.append(float(lp_phi))
    return math.fsum(total)


# ---------------------------------------------------------------------------
# Cholesky-with-log-diagonal transform for covariance matrices.
# ---------------------------------------------------------------------------

# Unconstrained layout for a 3x3 covariance: (log L11, L21, log L22, L31, L32,
# log L33), i.e. row-major lower triangle with logged diagonal.
CHOL_DIM = RE_DIM * (RE_DIM + 1) // 2
_TRIL_ROWS, _TRIL_COLS = np.tril_indices(RE_DIM)
_DIAG_MASK = _TRIL_ROWS == _TRIL_COLS
# Jacobian weights of log|d Omega / d u|: (d - j + 2) per diagonal position j.
_JAC_WEIGHTS = np.array([RE_DIM - j + 1.0 for j in range(RE_DIM)]) + 1.0


def chol_unconstrain(omega: np.ndarray) -> np.ndarray:
    """Covariance matrix -> unconstrained Cholesky vector."""
    chol = np.linalg.cholesky(np.asarray(omega, dtype=float))
    u = chol[_TRIL_ROWS, _TRIL_COLS].copy()
    u[_DIAG_MASK] = np.log(u[_DIAG_MASK])
    return u


def chol_factor(u: np.ndarray) -> np.ndarray:
    """Unconstrained vector -> lower-triangular Cholesky factor."""
    u = np.asarray(u, dtype=float)
    if u.shape != (CHOL_DIM,):
        raise ValueError(f"expected vector of length {CHOL_DIM}")
    vals = u.copy()
    vals[_DIAG_MASK] = np.exp(vals[_DIAG_MASK])
    chol = np.zeros((RE_DIM, RE_DIM))
    chol[_TRIL_ROWS, _TRIL_COLS] = vals
    return chol

def chol_constrain(u: np.ndarray) -> np.ndarray:
    """Unconstrained vector -> covariance matrix."""
    chol = chol_factor(u)
    return chol @ chol.T


def chol_logdet(u: np.ndarray) -> float:
    """Log Jacobian of the map u -> Omega (Cholesky with log diagonal)."""
    u = np.asarray(u, dtype=float)
    return RE_DIM * math.log(2.0) + float(np.dot(_JAC_WEIGHTS, u[_DIAG_MASK]))


def chol_logdet_grad() -> np.ndarray:
    """Gradient of chol_logdet in the unconstrained vector (constant)."""
    g = np.zeros(CHOL_DIM)
    g[_DIAG_MASK] = _JAC_WEIGHTS
    return g


def chain_omega_grad(grad_omega: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Chain a symmetric gradient wrt Omega back to the unconstrained vector.

    For Omega = L L^T and symmetric G = df/dOmega, df/dL = 2 G L restricted to
    the lower triangle; diagonal entries pick up a factor L_jj from the log.
    """
    gl = 2.0 * grad_omega @ chol
    g = gl[_TRIL_ROWS, _TRIL_COLS].copy()
    g[_DIAG_MASK] *= np.diag(chol)
    return g


# ---------------------------------------------------------------------------
# Flat unconstrained parameter vector layout.
# ---------------------------------------------------------------------------

_CHOL_NAMES = [f"{i + 1}{j + 1}" for i, j in zip(_TRIL_ROWS, _TRIL_COLS)]
_RE_NAMES = ("b1", "b2", "b3")
_ALPHA_NAMES = ("B", "G", "D")


class ParamLayout:
    """Maps between structured parameters and the flat unconstrained vector.

    Coordinate order: per biomarker (theta triple, log sigma^2, Cholesky
    vector), then per event (log phi, beta0, covariate betas, association
    triples per biomarker), then per biomarker the per-patient random effects.
    An empty `event_ids` gives a longitudinal-only layout.
    """

    def __init__(self, biomarker_ids, event_ids, covariate_names, patient_ids):
        self.biomarker_ids = tuple(biomarker_ids)
        self.event_ids = tuple(event_ids)
        self.covariate_names = tuple(covariate_names)
        self.patient_ids = tuple(patient_ids)
        self.n_patients = len(self.patient_ids)

        names: list[str] = []
        self.theta: dict[int, slice] = {}
        self.log_sigma2: dict[int, int] = {}
        self.chol: dict[int, slice] = {}
        self.log_phi: dict[int, int] = {}
        self.beta0: dict[int, int] = {}
        self.beta: dict[int, slice] = {}
        self.alpha: dict[tuple[int, int], slice] = {}
        self.effects: dict[int, slice] = {}

        for k in self.biomarker_ids:
            self.theta[k] = slice(len(names), len(names) + RE_DIM)
            names += [f"theta{j + 1}_k{k}" for j in range(RE_DIM)]
            self.log_sigma2[k] = len(names)
            names.append(f"log_sigma2_k{k}")
            self.chol[k] = slice(len(names), len(names) + CHOL_DIM)
            names += [f"Lomega_{c}_k{k}" for c in _CHOL_NAMES]
        for v in self.event_ids:
            self.log_phi[v] = len(names)
            names.append(f"log_phi_v{v}")
            self.beta0[v] = len(names)
            names.append(f"beta0_v{v}")
            self.beta[v] = slice(len(names), len(names) + len(self.covariate_names))
            names += [f"beta_v{v}_{c}" for c in self.covariate_names]
            for k in self.biomarker_ids:
                self.alpha[(v, k)] = slice(len(names), len(names) + RE_DIM)
                names += [f"alpha{a}_k{k}_v{v}" for a in _ALPHA_NAMES]
        self.n_structural = len(names)
        for k in self.biomarker_ids:
            self.effects[k] = slice(len(names), len(names) + RE_DIM * self.n_patients)
            names += [
                f"{r}_k{k}_{pid}" for pid in self.patient_ids for r in _RE_NAMES
            ]
        self.names = tuple(names)
        self.dim = len(names)

        self._logdet_grad = np.zeros(self.dim)
        for k in self.biomarker_ids:
            self._logdet_grad[self.log_sigma2[k]] = 1.0
            gch = np.zeros(CHOL_DIM)
            gch[_DIAG_MASK] = _JAC_WEIGHTS
            self._logdet_grad[self.chol[k]] = gch
        for v in self.event_ids:
            self._logdet_grad[self.log_phi[v]] = 1.0
        self._jac_idx = np.flatnonzero(self._logdet_grad)
        self._jac_w = self._logdet_grad[self._jac_idx]
        self._jac_const = len(self.biomarker_ids) * RE_DIM * math.log(2.0)

    def effects_view(self, vector: np.ndarray, biomarker_id: int) -> np.ndarray:
        """Random effects of one biomarker as an (n_patients, 3) view."""
        return vector[self.effects[biomarker_id]].reshape(self.n_patients, RE_DIM)

    def pack(self, params: LotParams, effects=None) -> np.ndarray:
        """Unconstrain a structured parameter set into a flat vector."""
        if len(params.populations) != len(self.biomarker_ids):
            raise ValueError("parameter blocks do not match layout biomarkers")
        if len(params.survival) != len(self.event_ids):
            raise ValueError("survival blocks do not match layout events")
        v = np.zeros(self.dim)
        for k, pop, vc in zip(self.biomarker_ids, params.populations, params.variances):
            v[self.theta[k]] = pop.as_array()
            v[self.log_sigma2[k]] = math.log(vc.sigma2)
            v[self.chol[k]] = chol_unconstrain(vc.omega)
        for v_id, sp in zip(self.event_ids, params.survival):
            if sp.beta.shape != (len(self.covariate_names),):
                raise ValueError("beta length does not match covariates")
            v[self.log_phi[v_id]] = math.log(sp.phi)
            v[self.beta0[v_id]] = sp.beta0
            v[self.beta[v_id]] = sp.beta
            for row, k in enumerate(self.biomarker_ids):
                v[self.alpha[(v_id, k)]] = sp.alpha[row]
        if effects is not None:
            for row, k in enumerate(self.biomarker_ids):
                eff = np.asarray(effects[row] if not isinstance(effects, dict) else effects[k])
                if eff.shape != (self.n_patients, RE_DIM):
                    raise ValueError("effects must be (n_patients, 3) per biomarker")
                v[self.effects[k]] = eff.reshape(-1)
        return v

    def unpack(self, vector: np.ndarray) -> tuple[LotParams, np.ndarray]:
        """Constrain a flat vector into (LotParams, effects array (K, n, 3))."""
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}")
        pops, vcs, sps = [], [], []
        for k in self.biomarker_ids:
            th = vector[self.theta[k]]
            pops.append(BiexpPopulation(*th))
            vcs.append(
                VarianceComponents(
                    sigma2=math.exp(vector[self.log_sigma2[k]]),
                    omega=chol_constrain(vector[self.chol[k]]),
                )
            )
        for v_id in self.event_ids:
            alpha = np.stack([vector[self.alpha[(v_id, k)]] for k in self.biomarker_ids])
            sps.append(
                SurvivalParams(
                    phi=math.exp(vector[self.log_phi[v_id]]),
                    beta0=vector[self.beta0[v_id]],
                    beta=vector[self.beta[v_id]].copy(),
                    alpha=alpha,
                )
            )
        effects = np.stack(
            [self.effects_view(vector, k).copy() for k in self.biomarker_ids]
        ) if self.biomarker_ids else np.zeros((0, self.n_patients, RE_DIM))
        return (
            LotParams(populations=tuple(pops), variances=tuple(vcs), survival=tuple(sps)),
            effects,
        )

    def logdet(self, vector: np.ndarray) -> float:
        """Log Jacobian of the constraining map at the given vector."""
        return self._jac_const + float(vector[self._jac_idx] @ self._jac_w)

    def logdet_grad(self) -> np.ndarray:
        return self._logdet_grad.copy()

"""Synthetic cohort generation from the exact generative model.

Simulated cohorts give every estimator and metric a ground truth: random
effects are drawn from their Normal prior, event times by inverse-transform
sampling of the total cumulative hazard, and biomarker values from the mean
trajectory plus Normal noise (non-positive values are redrawn and counted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import LongitudinalRecord, LotCohort, SurvivalRecord
from .model import RE_DIM, LotParams, ParamLayout

# administrative cap on the bracket search; beyond this an event is treated
# as never occurring (sentinel returned, caller censors administratively)
_BRACKET_CAP = 1e6
_BISECT_TOL = 1e-10


@dataclass(frozen=True)
class CovariateSpec:
    """One baseline covariate: a standard Normal column or dummy-coded levels."""

    name: str
    kind: str = "normal"  # "normal" | "categorical"
    probs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("normal", "categorical"):
            raise ValueError("kind must be 'normal' or 'categorical'")
        if self.kind == "categorical":
            probs = tuple(float(p) for p in self.probs)
            if len(probs) < 2 or abs(sum(probs) - 1.0) > 1e-9:
                raise ValueError("categorical probs must have >= 2 levels and sum to 1")
            object.__setattr__(self, "probs", probs)

    @property
    def column_names(self) -> list[str]:
        if self.kind == "normal":
            return [self.name]
        # first level is the reference category
        return [f"{self.name}_{lvl + 2}" for lvl in range(len(self.probs) - 1)]


@dataclass(frozen=True)
class SimConfig:
    """Ground truth and sampling design for one simulated treatment line."""

    n_patients: int
    params: LotParams
    covariates: tuple[CovariateSpec, ...] = ()
    lot_index: int = 1
    terminal: bool = False
    biomarker_ids: tuple[int, ...] = (1, 2)
    visit_interval_mean: float = 1.0  # months between visits
    visit_interval_jitter: float = 0.5  # SD of the Gamma-distributed gaps
    max_visits: int = 8
    admin_censor_months: float = 18.0
    dropout_rate: float = 0.0  # exponential dropout hazard per month
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "biomarker_ids", tuple(self.biomarker_ids))
        if self.n_patients < 1:
            raise ValueError("n_patients must be positive")
        if self.admin_censor_months <= 0:
            raise ValueError("administrative censoring time must be positive")
        if self.visit_interval_mean <= 0 or self.visit_interval_jitter <= 0:
            raise ValueError("visit schedule parameters must be positive")
        if len(self.params.populations) != len(self.biomarker_ids):
            raise ValueError("one population block per biomarker required")
        n_events = 1 if self.terminal else 2
        if len(self.params.survival) != n_events:
            raise ValueError(f"expected {n_events} survival block(s)")
        p = len(self.covariate_names)
        for sp in self.params.survival:
            if sp.beta.shape != (p,):
                raise ValueError("beta length must match generated covariate columns")

    @property
    def covariate_names(self) -> tuple[str, ...]:
        names: list[str] = []
        for spec in self.covariates:
            names.extend(spec.column_names)
        return tuple(names)

    @property
    def event_ids(self) -> tuple[int, ...]:
        return (1,) if self.terminal else (1, 2)


@dataclass(frozen=True)
class SimTruth:
    """Everything the generator knew: parameters, effects, latent times."""

    params: LotParams
    effects: np.ndarray  # (K, n, 3)
    latent_times: np.ndarray  # (n,) uncensored event times
    latent_events: np.ndarray  # (n,) cause of the latent event
    censor_times: np.ndarray  # (n,) applied censoring time
    covariates: np.ndarray  # (n, p)
    n_redrawn_values: int
    patient_ids: tuple[str, ...]

    def param_vector(self, layout: ParamLayout) -> np.ndarray:
        """True parameters packed on the layout's unconstrained scale."""
        return layout.pack(self.params, self.effects)


def simulate_event_times(sps, etas, rng) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-transform sample competing event times for many subjects.

    sps: SurvivalParams per active event; etas: (V, n) full linear predictors.
    Solves sum_v T^phi_v exp(eta_v) = -log U by bracketed bisection (bracket
    doubling from one month, tolerance 1e-10 months) and assigns the cause
    with probability proportional to the cause-specific hazards at T.
    Subjects whose bracket exceeds 1e6 months get T = +inf (administrative
    sentinel) and cause 0.
    """
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    if len(sps) != etas.shape[0] or len(sps) == 0:
        raise ValueError("need one eta row per active event")
    n = etas.shape[1]
    phis = np.array([sp.phi for sp in sps])
    scales = np.exp(etas)  # (V, n)
    target = -np.log(rng.uniform(size=n))

    def total_hazard(t):
        # t: (n,) -> sum_v t^phi_v * exp(eta_v)
        return np.sum(np.power(t[np.newaxis, :], phis[:, np.newaxis]) * scales, axis=0)

    lo = np.zeros(n)
    hi = np.ones(n)
    alive = total_hazard(hi) < target
    while np.any(alive):
        lo[alive] = hi[alive]
        hi[alive] *= 2.0
        if hi.max() > _BRACKET_CAP:
            break
        alive = total_hazard(hi) < target
    never = total_hazard(hi) < target
    steps = int(math.ceil(math.log2(max(hi.max(), 1.0) / _BISECT_TOL))) + 2
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        below = total_hazard(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    times = 0.5 * (lo + hi)
    # cause assignment: h_v(T) proportional to phi_v T^(phi_v - 1) exp(eta_v)
    haz = phis[:, np.newaxis] * np.power(times[np.newaxis, :], phis[:, np.newaxis] - 1.0) * scales
    probs = haz / np.sum(haz, axis=0, keepdims=True)
    u = rng.uniform(size=n)
    causes = np.ones(n, dtype=int)
    if len(sps) > 1:
        causes = np.where(u < probs[0], 1, 2)
    times = np.where(never, np.inf, times)
    causes = np.where(never, 0, causes)
    return times, causes


def simulate_event_time(sps, etas, rng) -> tuple[float, int]:
    """Single-subject version of simulate_event_times."""
    t, c = simulate_event_times(sps, np.asarray(etas, dtype=float).reshape(len(sps), 1), rng)
    return float(t[0]), int(c[0])


def _draw_covariates(cfg: SimConfig, rng) -> np.ndarray:
    cols = []
    for spec in cfg.covariates:
        if spec.kind == "normal":
            cols.append(rng.standard_normal(cfg.n_patients))
        else:
            levels = rng.choice(len(spec.probs), size=cfg.n_patients, p=spec.probs)
            for lvl in range(1, len(spec.probs)):
                cols.append((levels == lvl).astype(float))
    if not cols:
        return np.zeros((cfg.n_patients, 0))
    return np.column_stack(cols)


def simulate_cohort(cfg: SimConfig) -> tuple[LotCohort, SimTruth]:
    """Generate one cohort plus the full ground truth used to create it."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_patients
    params = cfg.params
    pids = tuple(f"p{i:05d}" for i in range(n))

    effects = np.stack(
        [
            rng.multivariate_normal(np.zeros(RE_DIM), vc.omega, size=n)
            for vc in params.variances
        ]
    )  # (K, n, 3)
    X = _draw_covariates(cfg, rng)

    # linear predictors: eta_v = beta0 + X beta + sum_k alpha_kv . (theta_k + b_ki)
    etas = []
    log_params = [
        pop.as_array()[np.newaxis, :] + effects[row]
        for row, pop in enumerate(params.populations)
    ]
    for sp in params.survival:
        eta = sp.beta0 + X @ sp.beta
        for row in range(len(params.populations)):
            eta = eta + log_params[row] @ sp.alpha[row]
        etas.append(eta)
    latent_t, latent_c = simulate_event_times(params.survival, np.stack(etas), rng)

    censor = np.full(n, cfg.admin_censor_months)
    if cfg.dropout_rate > 0:
        censor = np.minimum(censor, rng.exponential(1.0 / cfg.dropout_rate, size=n))
    observed_t = np.minimum(latent_t, censor)
    observed_c = np.where(latent_t <= censor, latent_c, 0)

    gap_shape = (cfg.visit_interval_mean / cfg.visit_interval_jitter) ** 2
    gap_scale = cfg.visit_interval_mean / gap_shape

    longi = []
    n_redrawn = 0
    surv = []
    for i in range(n):
        surv.append(SurvivalRecord(pids[i], float(observed_t[i]), int(observed_c[i]), X[i]))
        for row, k in enumerate(cfg.biomarker_ids):
            bgd = np.exp(log_params[row][i])
            sigma = math.sqrt(params.variances[row].sigma2)
            t_visit = 0.0
            n_vis = 0
            while t_visit <= observed_t[i] and n_vis < cfg.max_visits:
                mu = bgd[0] * (math.exp(bgd[1] * t_visit) + math.exp(-bgd[2] * t_visit) - 1.0)
                y = mu + sigma * rng.standard_normal()
                while y <= 0:
                    n_redrawn += 1
                    y = mu + sigma * rng.standard_normal()
                longi.append(LongitudinalRecord(pids[i], k, t_visit, float(y)))
                n_vis += 1
                t_visit += rng.gamma(gap_shape, gap_scale)

    cohort = LotCohort(
        lot_index=cfg.lot_index,
        terminal=cfg.terminal,
        longitudinal=tuple(longi),
        survival=tuple(surv),
        covariate_names=cfg.covariate_names,
        biomarker_ids=cfg.biomarker_ids,
    )
    truth = SimTruth(
        params=params,
        effects=effects,
        latent_times=latent_t,
        latent_events=latent_c,
        censor_times=censor,
        covariates=X,
        n_redrawn_values=n_redrawn,
        patient_ids=pids,
    )
    return cohort, truth


def train_test_split(cohort: LotCohort, fraction: float, seed: int) -> tuple[LotCohort, LotCohort]:
    """Patient-level random partition into (train, test); deterministic per seed."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    pids = list(cohort.patient_ids)
    order = rng.permutation(len(pids))
    n_train = int(round(fraction * len(pids)))
    if n_train == 0 or n_train == len(pids):
        raise ValueError("split would leave an empty side")
    train_ids = {pids[i] for i in order[:n_train]}
    test_ids = {pids[i] for i in order[n_train:]}
    return cohort.subset(train_ids), cohort.subset(test_ids)

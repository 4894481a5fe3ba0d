"""Log-density factors of the joint model and their analytic gradients.

The joint log posterior of one treatment line factorizes into per-biomarker
longitudinal likelihoods, a competing-risks survival likelihood, Normal
random-effect densities, priors, and the Jacobian of the unconstraining map.
`JointTarget` evaluates that sum and its exact gradient on the flat
unconstrained vector; the free-standing functions implement the same factors
one record at a time for desk checks and small-scale use.

Because the shared terms (log baseline, log growth, log decay) are constant
in time, cumulative hazards are closed form: H_v(t) = t^phi_v exp(eta_v).
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.special import multigammaln

from .data import EVENT_NEXT_LOT, LotCohort
from .model import (
    LOG_2PI,
    RE_DIM,
    BiexpParams,
    LotParams,
    ParamLayout,
    PriorConfig,
    SurvivalParams,
    chain_omega_grad,
    chol_factor,
    invwishart_logpdf,
    normal_logpdf,
    halfcauchy_logpdf,
    sigma2_logprior,
)

# exp overflows double precision just above exp(709); beyond this the state is
# treated as a flagged divergent point rather than propagating inf/nan.
_EXP_GUARD = 700.0


def biexp_mean(t, p: BiexpParams):
    """Mean trajectory B * (exp(G t) + exp(-D t) - 1) at time t (months).

    Returns +inf (with a warning) when G*t would overflow the exponential.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    gt = p.G * t
    if np.any(gt > _EXP_GUARD):
        warnings.warn("biexp_mean overflow: G*t > 700; returning inf", RuntimeWarning)
        out = np.where(gt > _EXP_GUARD, np.inf, 0.0)
        ok = gt <= _EXP_GUARD
        out = np.asarray(out, dtype=float)
        out[ok] = p.B * (np.exp(gt[ok]) + np.exp(-p.D * t[ok]) - 1.0)
        return float(out) if out.ndim == 0 else out
    res = p.B * (np.exp(gt) + np.exp(-p.D * t) - 1.0)
    return float(res) if res.ndim == 0 else res


def biexp_trough(p: BiexpParams) -> float:
    """Stationary point of the mean trajectory, log(D/G)/(G+D).

    Positive (an actual trough) exactly when D > G; otherwise the trajectory
    is increasing from t = 0 on.
    """
    return math.log(p.D / p.G) / (p.G + p.D)


def longitudinal_loglik(records, pop, effects, vc) -> float:
    """Normal log likelihood of one biomarker's measurements.

    records: LongitudinalRecords of a single biomarker; effects maps
    patient_id -> RandomEffects.  Uses the standard Normal density with
    exponent -(y - mu)^2 / (2 sigma^2).
    """
    if not vc.sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    terms = []
    const = -0.5 * (LOG_2PI + math.log(vc.sigma2))
    from .model import natural_params

    params_cache: dict[str, BiexpParams] = {}
    for rec in records:
        if rec.patient_id not in params_cache:
            params_cache[rec.patient_id] = natural_params(pop, effects[rec.patient_id])
        mu = biexp_mean(rec.time, params_cache[rec.patient_id])
        terms.append(const - 0.5 * (rec.value - mu) ** 2 / vc.sigma2)
    return math.fsum(terms)


def linear_predictor(sp: SurvivalParams, covariates, log_params) -> float:
    """Full linear predictor eta = beta0 + x'beta + sum_k alpha_k . (B*,G*,D*).

    log_params is the (K, 3) array of log baseline / log growth / log decay
    per biomarker (theta + b).
    """
    covariates = np.asarray(covariates, dtype=float)
    log_params = np.atleast_2d(np.asarray(log_params, dtype=float))
    if log_params.shape != sp.alpha.shape:
        raise ValueError("log_params shape must match alpha")
    return float(sp.beta0 + covariates @ sp.beta + np.sum(sp.alpha * log_params))


def cause_specific_hazard(t, sp: SurvivalParams, eta: float):
    """Weibull cause-specific hazard phi * t^(phi-1) * exp(eta).

    eta is the full linear predictor (including beta0).  At t = 0 the hazard
    diverges for phi < 1, which is rejected.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    if sp.phi < 1.0 and np.any(t == 0):
        raise ValueError("hazard is infinite at t = 0 for phi < 1")
    res = sp.phi * np.power(t, sp.phi - 1.0) * math.exp(eta)
    return float(res) if res.ndim == 0 else res


def cumulative_hazard(t, sp: SurvivalParams, eta: float):
    """Closed-form cumulative hazard H(t) = t^phi * exp(eta)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    res = np.power(t, sp.phi) * math.exp(eta)
    return float(res) if res.ndim == 0 else res


def overall_survival(t, sps, etas):
    """exp(-sum_v H_v(t)) over the active events (one for a terminal line)."""
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    for sp, eta in zip(sps, etas):
        total = total + cumulative_hazard(t, sp, eta)
    res = np.exp(-total)
    return float(res) if res.ndim == 0 else res


def survival_loglik(cohort: LotCohort, sps, etas) -> float:
    """Competing-risks log likelihood: event terms minus integrated hazards.

    sps and etas are aligned with cohort.event_ids; etas[v] is an array over
    patients in cohort order.
    """
    events = cohort.event_ids
    if len(sps) != len(events):
        raise ValueError("one SurvivalParams per active event required")
    etas = [np.asarray(e, dtype=float) for e in etas]
    terms = []
    for i, rec in enumerate(cohort.survival):
        if rec.event == EVENT_NEXT_LOT and cohort.terminal:
            raise ValueError("competing transition in terminal LoT")
        for j, (v, sp) in enumerate(zip(events, sps)):
            if rec.event == v:
                terms.append(math.log(cause_specific_hazard(rec.time, sp, etas[j][i])))
            terms.append(-cumulative_hazard(rec.time, sp, etas[j][i]))
    return math.fsum(terms)


class JointTarget:
    """Joint log posterior of one treatment line on the unconstrained scale.

    Evaluates value + exact analytic gradient for the sampler.  The same class
    serves every estimation mode:

    - full joint model: default arguments;
    - longitudinal-only (two-stage stage 1): include_survival=False and a
      single biomarker;
    - stage 2: fixed_longitudinal pins (theta, sigma^2, Omega) per biomarker;
    - the naive two-stage variant additionally pins the random effects.

    Pinned coordinates keep their place in the full layout but are excluded
    from the free vector the sampler sees, so a stage-2 evaluation equals the
    full joint evaluation at the matching point.
    """

    def __init__(
        self,
        cohort: LotCohort,
        priors: PriorConfig,
        *,
        biomarkers=None,
        include_survival: bool = True,
        fixed_longitudinal: dict | None = None,
        fixed_effects=None,
    ):
        self.cohort = cohort
        self.priors = priors
        ks = tuple(biomarkers) if biomarkers is not None else tuple(cohort.biomarker_ids)
        vs = tuple(cohort.event_ids) if include_survival else ()
        self.layout = ParamLayout(ks, vs, cohort.covariate_names, cohort.patient_ids)

        n = cohort.n_patients
        index = {pid: i for i, pid in enumerate(cohort.patient_ids)}
        self._obs = {}
        for k in ks:
            recs = cohort.records_for(k)
            t = np.array([r.time for r in recs], dtype=float)
            y = np.array([r.value for r in recs], dtype=float)
            idx = np.array([index[r.patient_id] for r in recs], dtype=np.intp)
            self._obs[k] = (t, y, idx)
        self._T = np.array([r.time for r in cohort.survival], dtype=float)
        self._logT = np.log(self._T)
        self._delta = np.array([r.event for r in cohort.survival], dtype=int)
        if cohort.covariate_names:
            self._X = np.stack([r.covariates for r in cohort.survival])
        else:
            self._X = np.zeros((n, 0))
        self._ev_mask = {v: (self._delta == v).astype(float) for v in vs}
        self._n_events = {v: float(self._ev_mask[v].sum()) for v in vs}

        # pinned coordinates: template carries their fixed values
        self._template = np.zeros(self.layout.dim)
        free = np.ones(self.layout.dim, dtype=bool)
        if fixed_longitudinal:
            for k, (theta, sigma2, omega) in fixed_longitudinal.items():
                lay = self.layout
                self._template[lay.theta[k]] = np.asarray(theta, dtype=float)
                self._template[lay.log_sigma2[k]] = math.log(sigma2)
                from .model import chol_unconstrain

                self._template[lay.chol[k]] = chol_unconstrain(omega)
                free[lay.theta[k]] = False
                free[lay.log_sigma2[k]] = False
                free[lay.chol[k]] = False
        if fixed_effects is not None:
            for row, k in enumerate(ks):
                eff = np.asarray(
                    fixed_effects[k] if isinstance(fixed_effects, dict) else fixed_effects[row]
                )
                self._template[self.layout.effects[k]] = eff.reshape(-1)
                free[self.layout.effects[k]] = False
        self._free = np.flatnonzero(free)
        self.dim = len(self._free)
        self.names = tuple(self.layout.names[i] for i in self._free)
        # random effects start at zero; only structural coordinates get jitter
        self.jitter_mask = self._free < self.layout.n_structural
        self._logdet_grad_full = self.layout.logdet_grad()

        # state-independent prior constants and index arrays for the hot path
        pr = priors
        sign, logdet_scale = np.linalg.slogdet(pr.invwishart_scale)
        d = RE_DIM
        self._iw_const = (
            0.5 * pr.invwishart_df * logdet_scale
            - 0.5 * pr.invwishart_df * d * math.log(2.0)
            - float(multigammaln(0.5 * pr.invwishart_df, d))
        )
        self._iw_coef = 0.5 * (pr.invwishart_df + d + 1)
        self._normal_var = pr.normal_sd**2
        self._normal_const = -0.5 * LOG_2PI - math.log(pr.normal_sd)
        self._coef_idx = {}
        for v in vs:
            idx = [self.layout.beta0[v]]
            idx += list(range(self.layout.beta[v].start, self.layout.beta[v].stop))
            for k in ks:
                sl = self.layout.alpha[(v, k)]
                idx += list(range(sl.start, sl.stop))
            self._coef_idx[v] = np.asarray(idx, dtype=np.intp)

    # -- vector plumbing ---------------------------------------------------

    def full_vector(self, v_free: np.ndarray) -> np.ndarray:
        x = self._template.copy()
        x[self._free] = v_free
        return x

    def free_vector(self, v_full: np.ndarray) -> np.ndarray:
        return np.asarray(v_full, dtype=float)[self._free]

    def params_at(self, v_free: np.ndarray):
        """Constrained (LotParams, effects) at a free vector."""
        return self.layout.unpack(self.full_vector(v_free))

    # -- densities ----------------------------------------------------------

    def logpdf_and_grad(self, v_free: np.ndarray):
        value, grad = self._value_grad_full(self.full_vector(v_free))
        if grad is None:
            return value, np.zeros(self.dim)
        return value, grad[self._free]

    def logpdf(self, v_free: np.ndarray) -> float:
        return self.logpdf_and_grad(v_free)[0]

    def map_objective_and_grad(self, v_free: np.ndarray):
        """Constrained-scale log density (no Jacobian): the MAP objective."""
        x = self.full_vector(v_free)
        value, grad = self._value_grad_full(x)
        if grad is None:
            return value, np.zeros(self.dim)
        value -= self.layout.logdet(x)
        grad = grad - self._logdet_grad_full
        return value, grad[self._free]

    def _divergent(self):
        return -math.inf, None

    @staticmethod
    def _sym3_inv(m: np.ndarray) -> np.ndarray:
        """Cofactor inverse of a symmetric positive definite 3x3 matrix."""
        a, b, c = m[0, 0], m[0, 1], m[0, 2]
        d, e, f = m[1, 1], m[1, 2], m[2, 2]
        c00 = d * f - e * e
        c01 = c * e - b * f
        c02 = b * e - c * d
        det = a * c00 + b * c01 + c * c02
        c11 = a * f - c * c
        c12 = b * c - a * e
        c22 = a * d - b * b
        return np.array([[c00, c01, c02], [c01, c11, c12], [c02, c12, c22]]) / det

    def _value_grad_full(self, x: np.ndarray):
        lay = self.layout
        n = lay.n_patients
        pr = self.priors
        parts = []
        grad = np.zeros(lay.dim)
        log_params = {}

        for k in lay.biomarker_ids:
            th = x[lay.theta[k]]
            b = lay.effects_view(x, k)
            u = x[lay.log_sigma2[k]]
            if abs(u) > _EXP_GUARD:
                return self._divergent()
            lp = th[np.newaxis, :] + b
            if lp.size and np.max(lp) > _EXP_GUARD:
                return self._divergent()
            log_params[k] = lp
            nat = np.exp(lp)

            t, y, idx = self._obs[k]
            sig2 = math.exp(u)
            inv_sig2 = 1.0 / sig2
            if t.size:
                gt = nat[idx, 1] * t
                if np.max(gt) > _EXP_GUARD:
                    return self._divergent()
                a1 = np.exp(gt)
                a2 = np.exp(-nat[idx, 2] * t)
                bq = nat[idx, 0]
                mu = bq * (a1 + a2 - 1.0)
                r = y - mu
                ssr = float(r @ r)
                parts.append(-0.5 * t.size * (LOG_2PI + u) - 0.5 * ssr * inv_sig2)
                gmu = r * inv_sig2
                d1 = gmu * mu
                d2 = gmu * bq * gt * a1
                d3 = -gmu * bq * (nat[idx, 2] * t) * a2
                grad[lay.theta[k]] += (d1.sum(), d2.sum(), d3.sum())
                geff = lay.effects_view(grad, k)
                geff[:, 0] += np.bincount(idx, weights=d1, minlength=n)
                geff[:, 1] += np.bincount(idx, weights=d2, minlength=n)
                geff[:, 2] += np.bincount(idx, weights=d3, minlength=n)
                grad[lay.log_sigma2[k]] += -0.5 * t.size + 0.5 * ssr * inv_sig2
            # random-effects density b ~ N(0, Omega) with Omega = L L'
            chol = chol_factor(x[lay.chol[k]])
            omega = chol @ chol.T
            a_inv = self._sym3_inv(omega)
            ab = b @ a_inv
            quad = float(np.einsum("ij,ij->", ab, b))
            sum_logdiag = float(x[lay.chol[k]][0] + x[lay.chol[k]][2] + x[lay.chol[k]][5])
            parts.append(-0.5 * n * RE_DIM * LOG_2PI - n * sum_logdiag - 0.5 * quad)
            lay.effects_view(grad, k)[:] -= ab
            scatter = b.T @ b
            g_omega = 0.5 * (a_inv @ scatter @ a_inv) - (0.5 * n) * a_inv
            # priors: Normal on theta, half-Cauchy-derived on sigma^2, IW on Omega
            parts.append(3.0 * self._normal_const - 0.5 * float(th @ th) / self._normal_var)
            grad[lay.theta[k]] -= th / self._normal_var
            lp_s, g_s = sigma2_logprior(sig2, pr)
            parts.append(lp_s)
            grad[lay.log_sigma2[k]] += g_s * sig2
            # inverse-Wishart: const - coef*log|Omega| - tr(Psi Omega^-1)/2
            parts.append(
                self._iw_const
                - self._iw_coef * 2.0 * sum_logdiag
                - 0.5 * float(np.einsum("ij,ij->", pr.invwishart_scale, a_inv))
            )
            g_omega += -self._iw_coef * a_inv + 0.5 * (a_inv @ pr.invwishart_scale @ a_inv)
            grad[lay.chol[k]] += chain_omega_grad(g_omega, chol)

        if lay.event_ids:
            logT = self._logT
            for v in lay.event_ids:
                psi = x[lay.log_phi[v]]
                if abs(psi) > _EXP_GUARD:
                    return self._divergent()
                phi = math.exp(psi)
                eta = x[lay.beta0[v]] + self._X @ x[lay.beta[v]]
                for k in lay.biomarker_ids:
                    eta += log_params[k] @ x[lay.alpha[(v, k)]]
                z = phi * logT + eta
                if np.max(z) > _EXP_GUARD:
                    return self._divergent()
                haz_int = np.exp(z)
                ev = self._ev_mask[v]
                parts.append(
                    self._n_events[v] * psi
                    + (phi - 1.0) * float(ev @ logT)
                    + float(ev @ eta)
                    - float(haz_int.sum())
                )
                geta = ev - haz_int
                grad[lay.beta0[v]] += geta.sum()
                if self._X.shape[1]:
                    grad[lay.beta[v]] += self._X.T @ geta
                geta_sum = float(geta.sum())
                for k in lay.biomarker_ids:
                    alpha = x[lay.alpha[(v, k)]]
                    grad[lay.alpha[(v, k)]] += log_params[k].T @ geta
                    grad[lay.theta[k]] += alpha * geta_sum
                    lay.effects_view(grad, k)[:] += geta[:, np.newaxis] * alpha
                grad[lay.log_phi[v]] += (
                    self._n_events[v]
                    + phi * float(ev @ logT)
                    - phi * float(haz_int @ logT)
                )
                # priors: Normal on (beta0, beta, alpha), half-Cauchy on phi
                ci = self._coef_idx[v]
                coef = x[ci]
                parts.append(
                    len(ci) * self._normal_const - 0.5 * float(coef @ coef) / self._normal_var
                )
                grad[ci] -= coef / self._normal_var
                s_phi = pr.halfcauchy_scale_phi
                parts.append(
                    math.log(2.0 / math.pi / s_phi) - math.log1p((phi / s_phi) ** 2)
                )
                grad[lay.log_phi[v]] += -2.0 * phi * phi / (s_phi * s_phi + phi * phi)

        # Jacobian of the constraining map
        parts.append(self.layout.logdet(x))
        grad += self._logdet_grad_full

        value = math.fsum(parts)
        if not math.isfinite(value):
            return self._divergent()
        return value, grad

    def pointwise_loglik(self, v_free: np.ndarray) -> np.ndarray:
        """Per-patient likelihood terms (longitudinal + survival) at a state.

        Excludes random-effect densities, priors, and Jacobians; this is the
        pointwise unit used for predictive information criteria.
        """
        x = self.full_vector(v_free)
        lay = self.layout
        n = lay.n_patients
        out = np.zeros(n)
        log_params = {}
        for k in lay.biomarker_ids:
            lp = x[lay.theta[k]][np.newaxis, :] + lay.effects_view(x, k)
            log_params[k] = lp
            t, y, idx = self._obs[k]
            if not t.size:
                continue
            u = x[lay.log_sigma2[k]]
            nat = np.exp(lp)
            mu = nat[idx, 0] * (np.exp(nat[idx, 1] * t) + np.exp(-nat[idx, 2] * t) - 1.0)
            ll = -0.5 * (LOG_2PI + u) - 0.5 * (y - mu) ** 2 * math.exp(-u)
            out += np.bincount(idx, weights=ll, minlength=n)
        for v in lay.event_ids:
            phi = math.exp(x[lay.log_phi[v]])
            eta = x[lay.beta0[v]] + self._X @ x[lay.beta[v]]
            for k in lay.biomarker_ids:
                eta += log_params[k] @ x[lay.alpha[(v, k)]]
            ev = self._ev_mask[v]
            out += ev * (math.log(phi) + (phi - 1.0) * self._logT + eta)
            out -= np.exp(phi * self._logT + eta)
        return out


def joint_log_posterior(v, cohort: LotCohort, priors: PriorConfig):
    """Value and gradient of the full joint log posterior at vector v.

    Thin wrapper over JointTarget for one-off evaluations; construct a
    JointTarget directly when evaluating repeatedly.
    """
    return JointTarget(cohort, priors).logpdf_and_grad(np.asarray(v, dtype=float))

"""Gradient-based MCMC: dynamic-trajectory HMC over the unconstrained space.

The transition doubles leapfrog trajectories until a generalized U-turn (with
the cross-subtree boundary checks) and draws the next state multinomially by
trajectory weight.  Warm-up adapts the step size by dual averaging toward a
target acceptance statistic and a diagonal mass matrix over expanding windows.
Chains are independent with RNG streams spawned from one seed, so runs are
bit-reproducible regardless of execution order.

Targets must expose `dim`, `logpdf_and_grad(x) -> (float, ndarray)`, and
optionally `names` and `jitter_mask` (False entries initialize at zero).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .data import PosteriorDraws

# energy error beyond which a transition is flagged divergent (Stan default)
DIVERGENCE_THRESHOLD = 1000.0
# bulk ESS is capped at this multiple of the total draw count; antithetic
# trajectories can push the raw estimator above the number of draws
ESS_INFLATION_BOUND = 4.0


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 3
    n_warmup: int = 1000
    n_draws: int = 4000
    target_accept: float = 0.8
    max_tree_depth: int = 10
    seed: int = 0
    init_jitter: float = 2.0
    adapt_mass: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.n_chains < 1 or self.n_warmup < 1 or self.n_draws < 1:
            raise ValueError("n_chains, n_warmup, n_draws must all be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must be in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "n_chains": self.n_chains,
            "n_warmup": self.n_warmup,
            "n_draws": self.n_draws,
            "target_accept": self.target_accept,
            "max_tree_depth": self.max_tree_depth,
            "seed": self.seed,
            "init_jitter": self.init_jitter,
            "adapt_mass": self.adapt_mass,
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        return cls(**d)


@dataclass
class ChainStats:
    divergences: int
    warmup_divergences: int
    accept_mean: float
    step_size: float
    n_leapfrog: int
    max_depth_hits: int


@dataclass
class SamplerStats:
    chains: list[ChainStats]

    @property
    def divergences(self) -> int:
        return sum(c.divergences for c in self.chains)

    @property
    def accept_mean(self) -> np.ndarray:
        return np.array([c.accept_mean for c in self.chains])


def leapfrog(q, p, grad, eps, inv_mass, target):
    """One leapfrog step; returns (q', p', logp', grad')."""
    p_half = p + 0.5 * eps * grad
    q_new = q + eps * (inv_mass * p_half)
    logp, grad_new = target.logpdf_and_grad(q_new)
    p_new = p_half + 0.5 * eps * grad_new
    return q_new, p_new, logp, grad_new


def _kinetic(p, inv_mass) -> float:
    return 0.5 * float(p @ (inv_mass * p))


class _DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance."""

    GAMMA = 0.05
    T0 = 10.0
    KAPPA = 0.75

    def __init__(self, eps0: float, target_accept: float):
        self.mu = math.log(10.0 * eps0)
        self.target = target_accept
        self.log_eps = math.log(eps0)
        self.log_eps_bar = 0.0
        self.h_bar = 0.0
        self.count = 0

    def update(self, accept_prob: float) -> float:
        self.count += 1
        frac = 1.0 / (self.count + self.T0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_prob)
        self.log_eps = self.mu - math.sqrt(self.count) / self.GAMMA * self.h_bar
        w = self.count ** (-self.KAPPA)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def adapted(self) -> float:
        return math.exp(self.log_eps_bar)


class _Welford:
    """Online mean/variance accumulator for mass-matrix estimation."""

    def __init__(self, dim: int):
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def add(self, x):
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def variance(self) -> np.ndarray:
        if self.n < 2:
            return np.ones_like(self.mean)
        var = self.m2 / (self.n - 1)
        # shrink toward a small diagonal, as in windowed adaptation practice
        return (self.n / (self.n + 5.0)) * var + 1e-3 * (5.0 / (self.n + 5.0))


def _adaptation_windows(n_warmup: int, init_buffer=75, term_buffer=50, base_window=25):
    """Slow (mass) adaptation schedule: (first window start, window end indices)."""
    if n_warmup < 20:
        return n_warmup, []
    if init_buffer + term_buffer + base_window > n_warmup:
        init_buffer = max(1, int(0.15 * n_warmup))
        term_buffer = max(1, int(0.10 * n_warmup))
        base_window = n_warmup - init_buffer - term_buffer
    ends = []
    start = init_buffer
    size = base_window
    while True:
        end = start + size
        # extend the last window to the terminal buffer
        if end + 2 * size > n_warmup - term_buffer:
            ends.append(n_warmup - term_buffer)
            break
        ends.append(end)
        start = end
        size *= 2
    return init_buffer, ends


class _Tree:
    """One subtree of the trajectory: end states, momentum sum, proposal."""

    __slots__ = (
        "q_minus", "p_minus", "g_minus", "q_plus", "p_plus", "g_plus",
        "rho", "q_prop", "logp_prop", "g_prop", "log_w", "sum_alpha",
        "n_alpha", "divergent", "ok",
    )

    def __init__(self, q, p, g, logp, log_w, alpha, divergent):
        self.q_minus = self.q_plus = self.q_prop = q
        self.p_minus = self.p_plus = p
        self.g_minus = self.g_plus = self.g_prop = g
        self.logp_prop = logp
        self.rho = p
        self.log_w = log_w
        self.sum_alpha = alpha
        self.n_alpha = 1
        self.divergent = divergent
        self.ok = not divergent


def _criterion(sharp_a, sharp_b, rho) -> bool:
    return float(sharp_a @ rho) > 0.0 and float(sharp_b @ rho) > 0.0


def _merge_ok(left: _Tree, right: _Tree, inv_mass) -> bool:
    """Generalized U-turn over the merged tree plus boundary checks."""
    rho = left.rho + right.rho
    sharp_l = inv_mass * left.p_minus
    sharp_r = inv_mass * right.p_plus
    if not _criterion(sharp_l, sharp_r, rho):
        return False
    rho_left_ext = left.rho + right.p_minus
    if not _criterion(sharp_l, inv_mass * right.p_minus, rho_left_ext):
        return False
    rho_right_ext = right.rho + left.p_plus
    if not _criterion(inv_mass * left.p_plus, sharp_r, rho_right_ext):
        return False
    return True


class _NutsChain:
    def __init__(self, target, cfg: SamplerConfig, rng: np.random.Generator):
        self.target = target
        self.cfg = cfg
        self.rng = rng
        self.inv_mass = np.ones(target.dim)
        self.mass_sd = np.ones(target.dim)

    def _sample_momentum(self):
        return self.rng.standard_normal(self.target.dim) * self.mass_sd

    def _set_inv_mass(self, inv_mass):
        self.inv_mass = inv_mass
        self.mass_sd = 1.0 / np.sqrt(inv_mass)

    def find_reasonable_epsilon(self, q, logp, grad) -> float:
        """Double/halve eps until the one-step acceptance crosses 1/2."""
        eps = 1.0
        p = self._sample_momentum()
        joint0 = logp - _kinetic(p, self.inv_mass)
        _, p1, logp1, _ = leapfrog(q, p, grad, eps, self.inv_mass, self.target)
        delta = (logp1 - _kinetic(p1, self.inv_mass)) - joint0
        if not math.isfinite(delta):
            delta = -math.inf
        direction = 1.0 if delta > math.log(0.5) else -1.0
        for _ in range(100):
            eps *= 2.0 ** direction
            _, p1, logp1, _ = leapfrog(q, p, grad, eps, self.inv_mass, self.target)
            delta = (logp1 - _kinetic(p1, self.inv_mass)) - joint0
            if not math.isfinite(delta):
                delta = -math.inf
            if direction * delta <= direction * math.log(0.5) or eps < 1e-10 or eps > 1e7:
                break
        return max(eps, 1e-10)

    def _leaf(self, q, p, grad, eps, joint0):
        q1, p1, logp1, g1 = leapfrog(q, p, grad, eps, self.inv_mass, self.target)
        joint = logp1 - _kinetic(p1, self.inv_mass)
        delta = joint - joint0
        if not math.isfinite(delta):
            delta = -math.inf
        divergent = delta < -DIVERGENCE_THRESHOLD
        alpha = min(1.0, math.exp(min(delta, 0.0)))
        return _Tree(q1, p1, g1, logp1, delta, alpha, divergent)

    def _build(self, depth, q, p, grad, eps, joint0, direction):
        """Build a 2^depth-leaf subtree extending from (q, p, grad)."""
        if depth == 0:
            return self._leaf(q, p, grad, direction * eps, joint0)
        first = self._build(depth - 1, q, p, grad, eps, joint0, direction)
        if not first.ok:
            return first
        if direction > 0:
            second = self._build(depth - 1, first.q_plus, first.p_plus, first.g_plus,
                                 eps, joint0, direction)
        else:
            second = self._build(depth - 1, first.q_minus, first.p_minus, first.g_minus,
                                 eps, joint0, direction)
        first.sum_alpha += second.sum_alpha
        first.n_alpha += second.n_alpha
        first.divergent |= second.divergent
        if not second.ok:
            first.ok = False
            return first
        # multinomial choice between the halves
        total = np.logaddexp(first.log_w, second.log_w)
        if math.log(self.rng.uniform()) < second.log_w - total:
            first.q_prop = second.q_prop
            first.logp_prop = second.logp_prop
            first.g_prop = second.g_prop
        first.log_w = total
        left, right = (first, second) if direction > 0 else (second, first)
        ok = _merge_ok(left, right, self.inv_mass)
        first.rho = left.rho + right.rho
        first.q_minus, first.p_minus, first.g_minus = left.q_minus, left.p_minus, left.g_minus
        first.q_plus, first.p_plus, first.g_plus = right.q_plus, right.p_plus, right.g_plus
        first.ok = ok
        return first

    def transition(self, q, logp, grad, eps):
        """One dynamic-HMC transition; returns new state and statistics."""
        p0 = self._sample_momentum()
        joint0 = logp - _kinetic(p0, self.inv_mass)
        tree = _Tree(q, p0, grad, logp, 0.0, 1.0, False)
        tree.n_alpha = 0
        tree.sum_alpha = 0.0
        divergent = False
        n_leapfrog = 0
        depth = 0
        while depth < self.cfg.max_tree_depth:
            direction = 1 if self.rng.uniform() < 0.5 else -1
            if direction > 0:
                sub = self._build(depth, tree.q_plus, tree.p_plus, tree.g_plus,
                                  eps, joint0, direction)
            else:
                sub = self._build(depth, tree.q_minus, tree.p_minus, tree.g_minus,
                                  eps, joint0, direction)
            n_leapfrog += sub.n_alpha
            tree.sum_alpha += sub.sum_alpha
            tree.n_alpha += sub.n_alpha
            divergent |= sub.divergent
            if not sub.ok:
                break
            # biased progressive sampling toward the new subtree
            if math.log(self.rng.uniform()) < sub.log_w - tree.log_w:
                tree.q_prop = sub.q_prop
                tree.logp_prop = sub.logp_prop
                tree.g_prop = sub.g_prop
            tree.log_w = np.logaddexp(tree.log_w, sub.log_w)
            left, right = (tree, sub) if direction > 0 else (sub, tree)
            ok = _merge_ok(left, right, self.inv_mass)
            tree.rho = left.rho + right.rho
            tree.q_minus, tree.p_minus, tree.g_minus = left.q_minus, left.p_minus, left.g_minus
            tree.q_plus, tree.p_plus, tree.g_plus = right.q_plus, right.p_plus, right.g_plus
            depth += 1
            if not ok:
                break
        accept_stat = tree.sum_alpha / max(tree.n_alpha, 1)
        return (
            tree.q_prop, tree.logp_prop, tree.g_prop,
            accept_stat, divergent, n_leapfrog, depth >= self.cfg.max_tree_depth,
        )

    def run(self, q0):
        cfg = self.cfg
        logp, grad = self.target.logpdf_and_grad(q0)
        q = q0
        eps = self.find_reasonable_epsilon(q, logp, grad)
        da = _DualAveraging(eps, cfg.target_accept)
        if cfg.adapt_mass:
            slow_start, window_ends = _adaptation_windows(cfg.n_warmup)
        else:
            slow_start, window_ends = cfg.n_warmup, []
        welford = _Welford(self.target.dim)
        warmup_div = 0
        next_window = 0
        for m in range(cfg.n_warmup):
            q, logp, grad, accept, div, _, _ = self.transition(q, logp, grad, eps)
            warmup_div += int(div)
            eps = da.update(accept)
            if window_ends and m >= slow_start and next_window < len(window_ends):
                welford.add(q)
                if m + 1 == window_ends[next_window]:
                    self._set_inv_mass(welford.variance())
                    welford = _Welford(self.target.dim)
                    next_window += 1
                    eps = self.find_reasonable_epsilon(q, logp, grad)
                    da = _DualAveraging(eps, cfg.target_accept)
        eps = da.adapted
        draws = np.empty((cfg.n_draws, self.target.dim))
        logdens = np.empty(cfg.n_draws)
        divergences = 0
        max_depth_hits = 0
        accept_sum = 0.0
        n_leapfrog_total = 0
        for m in range(cfg.n_draws):
            q, logp, grad, accept, div, n_leap, hit = self.transition(q, logp, grad, eps)
            draws[m] = q
            logdens[m] = logp
            divergences += int(div)
            max_depth_hits += int(hit)
            accept_sum += accept
            n_leapfrog_total += n_leap
        stats = ChainStats(
            divergences=divergences,
            warmup_divergences=warmup_div,
            accept_mean=accept_sum / cfg.n_draws,
            step_size=eps,
            n_leapfrog=n_leapfrog_total,
            max_depth_hits=max_depth_hits,
        )
        return draws, logdens, stats


def _init_point(target, cfg, rng):
    dim = target.dim
    mask = getattr(target, "jitter_mask", np.ones(dim, dtype=bool))
    for _ in range(100):
        q = np.zeros(dim)
        q[mask] = rng.uniform(-cfg.init_jitter, cfg.init_jitter, size=int(mask.sum()))
        logp, _ = target.logpdf_and_grad(q)
        if math.isfinite(logp):
            return q
    raise RuntimeError("could not find a finite initialization in 100 tries")


def _run_chain(args):
    target, cfg, seed_seq, x0 = args
    rng = np.random.default_rng(seed_seq)
    q0 = np.asarray(x0, dtype=float) if x0 is not None else _init_point(target, cfg, rng)
    chain = _NutsChain(target, cfg, rng)
    return chain.run(q0)


def sample(target, cfg: SamplerConfig, x0=None) -> tuple[PosteriorDraws, SamplerStats]:
    """Run `cfg.n_chains` independent chains; deterministic given cfg.seed.

    x0 optionally fixes the initial point of every chain (warm starts);
    otherwise structural coordinates are jittered uniformly and coordinates
    masked by `target.jitter_mask` start at zero.
    """
    seed_children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    jobs = [(target, cfg, seed_children[c], x0) for c in range(cfg.n_chains)]
    if cfg.jobs > 1 and cfg.n_chains > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, cfg.n_chains)) as pool:
            results = list(pool.map(_run_chain, jobs))
    else:
        results = [_run_chain(job) for job in jobs]
    names = getattr(target, "names", None) or tuple(f"x{i}" for i in range(target.dim))
    draws = np.concatenate([r[0] for r in results])
    logdens = np.concatenate([r[1] for r in results])
    chains = np.repeat(np.arange(cfg.n_chains), cfg.n_draws)
    iters = np.tile(np.arange(cfg.n_draws), cfg.n_chains)
    post = PosteriorDraws(
        draws=draws, chains=chains, iterations=iters, names=tuple(names), log_density=logdens
    )
    return post, SamplerStats(chains=[r[2] for r in results])


# ---------------------------------------------------------------------------
# Convergence and efficiency diagnostics.
# ---------------------------------------------------------------------------


def _split(chains: np.ndarray) -> np.ndarray:
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    m, n = chains.shape
    half = n // 2
    return np.concatenate([chains[:, :half], chains[:, n - half:]], axis=0)

def _rank_normalize(chains: np.ndarray) -> np.ndarray:
    flat = chains.reshape(-1)
    ranks = rankdata(flat, method="average")
    z = ndtri((ranks - 0.375) / (flat.size + 0.25))
    return z.reshape(chains.shape)


def _rhat_base(chains: np.ndarray) -> float:
    m, n = chains.shape
    chain_means = chains.mean(axis=1)
    within = float(np.mean(np.var(chains, axis=1, ddof=1)))
    if within == 0.0:
        return math.nan
    between = n * float(np.var(chain_means, ddof=1))
    var_plus = (n - 1.0) / n * within + between / n
    return math.sqrt(var_plus / within)


def split_rhat(chains: np.ndarray) -> float:
    """Rank-normalized split R-hat (max of bulk and folded-tail variants).

    chains: (n_chains, n_iterations) for one parameter.  Returns NaN (with a
    warning) when the within-chain variance vanishes.
    """
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    if chains.shape[0] < 2 or chains.shape[1] < 4:
        raise ValueError("split_rhat needs >= 2 chains and >= 4 draws per chain")
    if np.ptp(chains) == 0.0:
        warnings.warn("constant chains: R-hat undefined", RuntimeWarning)
        return math.nan
    halves = _split(chains)
    bulk = _rhat_base(_rank_normalize(halves))
    folded = _rhat_base(_rank_normalize(np.abs(halves - np.median(halves))))
    if math.isnan(bulk) or math.isnan(folded):
        warnings.warn("zero within-chain variance: R-hat undefined", RuntimeWarning)
        return math.nan
    return max(bulk, folded)


def _autocov(chains: np.ndarray) -> np.ndarray:
    m, n = chains.shape
    centered = chains - chains.mean(axis=1, keepdims=True)
    size = 1
    while size < 2 * n:
        size *= 2
    f = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n].real
    return acov / n


def ess(chains: np.ndarray) -> float:
    """Bulk effective sample size (rank-normalized split chains).

    Autocorrelation-sum estimator with Geyer's initial-monotone truncation,
    capped at ESS_INFLATION_BOUND times the total draw count.  Returns NaN
    (with a warning) for constant chains.
    """
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    if chains.shape[0] < 2 or chains.shape[1] < 4:
        raise ValueError("ess needs >= 2 chains and >= 4 draws per chain")
    if np.ptp(chains) == 0.0:
        warnings.warn("constant chains: ESS undefined", RuntimeWarning)
        return math.nan
    z = _rank_normalize(_split(chains))
    m, n = z.shape
    acov = _autocov(z)
    chain_var = acov[:, 0] * n / (n - 1.0)
    mean_var = float(np.mean(chain_var))
    var_plus = mean_var * (n - 1.0) / n + float(np.var(z.mean(axis=1), ddof=1))
    if var_plus == 0.0:
        warnings.warn("zero variance: ESS undefined", RuntimeWarning)
        return math.nan
    rho = np.zeros(n)
    rho[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - float(np.mean(acov[:, 1]))) / var_plus
    rho[1] = rho_odd
    t = 1
    while t < n - 3 and (rho_even + rho_odd) > 0.0:
        rho_even = 1.0 - (mean_var - float(np.mean(acov[:, t + 1]))) / var_plus
        rho_odd = 1.0 - (mean_var - float(np.mean(acov[:, t + 2]))) / var_plus
        if rho_even + rho_odd >= 0.0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0.0:
        rho[max_t + 1] = rho_even
    # enforce monotone decrease of the paired sums
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2
    total = m * n
    tau = -1.0 + 2.0 * float(np.sum(rho[: max_t + 2]))
    tau = max(tau, 1.0 / math.log10(total))
    return min(total / tau, ESS_INFLATION_BOUND * total)


@dataclass(frozen=True)
class Diagnostics:
    """Per-parameter convergence/efficiency summary of one sampler run."""

    names: tuple[str, ...]
    rhat: np.ndarray
    ess: np.ndarray
    divergences: int
    warmup_divergences: int
    accept_mean: np.ndarray  # per chain
    step_size: np.ndarray  # per chain
    warnings: tuple[str, ...] = ()

    def max_rhat(self, names=None) -> float:
        vals = self._select(self.rhat, names)
        return float(np.nanmax(vals)) if len(vals) else math.nan

    def min_ess(self, names=None) -> float:
        vals = self._select(self.ess, names)
        return float(np.nanmin(vals)) if len(vals) else math.nan

    def _select(self, arr, names):
        if names is None:
            return arr
        wanted = set(names)
        idx = [i for i, n in enumerate(self.names) if n in wanted]
        return arr[idx]

    def meets(self, rhat_max=1.05, ess_min=100.0, names=None) -> bool:
        """Convergence bar: R-hat below and ESS above the given thresholds."""
        vals_r = self._select(self.rhat, names)
        vals_e = self._select(self.ess, names)
        if np.any(np.isnan(vals_r)) or np.any(np.isnan(vals_e)):
            return False
        return bool(np.all(vals_r < rhat_max) and np.all(vals_e > ess_min))

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "rhat": [None if math.isnan(x) else x for x in self.rhat.tolist()],
            "ess": [None if math.isnan(x) else x for x in self.ess.tolist()],
            "divergences": self.divergences,
            "warmup_divergences": self.warmup_divergences,
            "accept_mean": self.accept_mean.tolist(),
            "step_size": self.step_size.tolist(),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Diagnostics":
        return cls(
            names=tuple(d["names"]),
            rhat=np.array([math.nan if x is None else x for x in d["rhat"]]),
            ess=np.array([math.nan if x is None else x for x in d["ess"]]),
            divergences=d["divergences"],
            warmup_divergences=d["warmup_divergences"],
            accept_mean=np.asarray(d["accept_mean"], dtype=float),
            step_size=np.asarray(d["step_size"], dtype=float),
            warnings=tuple(d.get("warnings", ())),
        )


def compute_diagnostics(draws: PosteriorDraws, stats: SamplerStats) -> Diagnostics:
    """Split R-hat and bulk ESS for every parameter plus sampler health flags."""
    by_chain = draws.by_chain()  # (M, N, dim)
    m, n, dim = by_chain.shape
    rhats = np.empty(dim)
    esses = np.empty(dim)
    flagged = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for j in range(dim):
            chains_j = by_chain[:, :, j]
            if np.ptp(chains_j) == 0.0:
                rhats[j] = math.nan
                esses[j] = math.nan
                flagged.append(f"constant parameter {draws.names[j]}")
                continue
            rhats[j] = split_rhat(chains_j)
            esses[j] = ess(chains_j)
    notes = list(flagged[:10])
    total_div = sum(c.divergences for c in stats.chains)
    if total_div > 0.10 * draws.n_total:
        notes.append(
            f"divergence rate {total_div / draws.n_total:.1%} exceeds 10% of draws"
        )
    return Diagnostics(
        names=draws.names,
        rhat=rhats,
        ess=esses,
        divergences=total_div,
        warmup_divergences=sum(c.warmup_divergences for c in stats.chains),
        accept_mean=np.array([c.accept_mean for c in stats.chains]),
        step_size=np.array([c.step_size for c in stats.chains]),
        warnings=tuple(notes),
    )

"""Evolutionary optimizer and the fitness functions used to shape the pump.

``evolve`` is a covariance-adapting evolution strategy: Gaussian mutants
around an incumbent, rank-weighted recombination of the better half, a
rank-one plus rank-mu covariance update and cumulative step-size control.
The new incumbent is blended with the previous one to damp noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NoGainError, SPDCError
from .gaussian import supermode_gains
from .jsa import assemble
from .modes import (
    NullifierCovariance,
    mode_covariance_from_coupling,
    nullifier_variances,
    optimize_frexel_phases,
    permute_covariance,
    rotate_modes,
)
from .pump import pump_power_weight, shaped_pump

FITNESS_KINDS = (
    "flatten_f1",
    "flatten_f1_bar",
    "gap_f2",
    "gap_f2_bar",
    "nullifier_f3",
    "nullifier_f3_bar",
    "custom",
)

# ---------------------------------------------------------------------------
# penalty shapes and fitness functions


@dataclass(frozen=True)
class PenaltyShape:
    """Power penalty ``1 / (scale * w)^power``; tiny for large ``w``, steep below ``1/scale``."""

    scale: float = 5.0
    power: float = 6.0

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0 and np.isfinite(self.power) and self.power > 0):
            raise ValueError("penalty scale and power must be positive and finite")

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore"):
            out = 1.0 / (self.scale * w) ** self.power
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        return {"type": "inverse_power", "scale": self.scale, "power": self.power}

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        kind = data.pop("type", "inverse_power")
        if kind != "inverse_power":
            raise ConfigError(f"unknown penalty shape {kind!r}")
        unknown = set(data) - {"scale", "power"}
        if unknown:
            raise ConfigError(f"unknown penalty keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def _sorted_gains(gains):
    g = np.sort(np.asarray(gains, dtype=float))[::-1]
    if g.size == 0 or not g[0] > 0:
        raise NoGainError("leading gain must be positive")
    return g


def fitness_flatten(gains, k):
    """``sum_{j <= k} gains_j / gains_1`` over the descending gains (maximized).

    Raises:
        NoGainError: the leading gain is zero.
    """
    g = _sorted_gains(gains)
    if not 1 <= k <= g.size:
        raise ValueError(f"k must lie in [1, {g.size}]")
    return float(np.sum(g[:k]) / g[0])


def fitness_gap(gains):
    """``gains_1 / gains_2`` (maximized).

    Raises:
        NoGainError: fewer than two positive gains, so the gap is infinite.
    """
    g = _sorted_gains(gains)
    if g.size < 2 or not g[1] > 0:
        raise NoGainError("second gain is zero: the gap is infinite")
    return float(g[0] / g[1])


def power_penalty(w, weight, shape=None):
    """``weight * shape(w)``, the magnitude of the low-power penalty."""
    shape = PenaltyShape() if shape is None else shape
    return float(weight * shape(w))


def fitness_flatten_bar(gains, k, shaper, base, a=3.0, x=None):
    """Flatness ``f1`` with the low-power penalty ``a * x(w)`` subtracted.

    The penalty is positive and grows steeply as the transmitted power
    weight ``w`` drops, so subtracting it disfavours lossy profiles of a
    maximized fitness.
    """
    w = pump_power_weight(shaper, base)
    return fitness_flatten(gains, k) - power_penalty(w, a, x)


def fitness_gap_bar(gains, shaper, base, b=1.0, y=None):
    """Gap ``f2`` with the low-power penalty ``b * y(w)`` subtracted."""
    w = pump_power_weight(shaper, base)
    return fitness_gap(gains) - power_penalty(w, b, y)


def fitness_nullifier(gamma_nullifiers):
    """Trace of the nullifier covariance block (minimized).

    Args:
        gamma_nullifiers: a :class:`NullifierCovariance`, or the ``m x m``
            nullifier block itself.
    """
    if isinstance(gamma_nullifiers, NullifierCovariance):
        block = gamma_nullifiers.nullifier_block
    else:
        block = np.atleast_2d(np.asarray(gamma_nullifiers, dtype=float))
    return float(np.trace(block))


def fitness_nullifier_bar(gamma_nullifiers, shaper, base, h=1.35):
    """``Tr - h * w``: transmitted power is rewarded."""
    return fitness_nullifier(gamma_nullifiers) - h * pump_power_weight(shaper, base)


@dataclass(frozen=True)
class FitnessSpec:
    """Which fitness to optimize and its penalty parameters."""

    kind: str = "flatten_f1_bar"
    k: int = 100
    a: float = 3.0
    b: float = 1.0
    h: float = 1.35
    x: PenaltyShape = field(default_factory=PenaltyShape)
    y: PenaltyShape = field(default_factory=PenaltyShape)

    def __post_init__(self):
        if self.kind not in FITNESS_KINDS:
            raise ConfigError(f"unknown fitness kind {self.kind!r}; expected one of {FITNESS_KINDS}")
        for name in ("a", "b", "h"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ConfigError(f"penalty parameter {name} must be finite and non-negative")
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError("k must be a positive integer")

    @property
    def maximize(self):
        return self.kind in ("flatten_f1", "flatten_f1_bar", "gap_f2", "gap_f2_bar")

    @property
    def needs_cluster(self):
        return self.kind.startswith("nullifier")

    def to_dict(self):
        return {
            "kind": self.kind,
            "k": self.k,
            "a": self.a,
            "b": self.b,
            "h": self.h,
            "x": self.x.to_dict(),
            "y": self.y.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - {"kind", "k", "a", "b", "h", "x", "y"}
        if unknown:
            raise ConfigError(f"unknown fitness keys: {sorted(unknown)}")
        for key in ("x", "y"):
            if key in data:
                data[key] = PenaltyShape.from_dict(data[key])
        return cls(**data)


# ---------------------------------------------------------------------------
# shaper objective


@dataclass(frozen=True)
class ShaperMetrics:
    """Quantities reported for one shaper setting."""

    value: float
    gains: np.ndarray
    power_weight: float
    gap: float
    n_flat: int
    nullifier_variances: np.ndarray | None = None
    phases: np.ndarray | None = None


class ShaperObjective:
    """Maps shaper parameters ``u`` to a fitness value.

    The phase-matching matrix is computed once; each evaluation only
    reshapes the pump, reassembles ``L`` and factorizes it.

    Args:
        fitness: the :class:`FitnessSpec`.
        phase_matching: precomputed ``sinc`` matrix on the grid.
        base: unshaped reference pump on the grid's pump axis.
        shaper: shaper template; only its ``u`` is replaced.
        frexels: detection :class:`~spdc.modes.ModeMatrix` (nullifier kinds).
        graph: :class:`~spdc.modes.ClusterGraph` (nullifier kinds).
        perm: node assignment of the frexels (nullifier kinds).
        target_db: leading-supermode squeezing used for calibration.
        phase_kwargs: options for the inner phase optimization.
    """

    def __init__(self, fitness, phase_matching, base, shaper, *, frexels=None, graph=None, perm=None,
                 target_db=7.0, phase_kwargs=None):
        self.fitness = fitness
        self.phase_matching = phase_matching
        self.base = base
        self.shaper = shaper
        self.frexels = frexels
        self.graph = graph
        self.perm = None if perm is None else tuple(perm)
        self.target_db = target_db
        self.phase_kwargs = {"n_scan": 180, "sweeps": 2, "n_starts": 4} if phase_kwargs is None else phase_kwargs
        if fitness.kind == "custom":
            raise ConfigError("custom fitness functions are passed to evolve() directly")
        if fitness.needs_cluster and (frexels is None or graph is None):
            raise ConfigError("nullifier fitness needs frexels and a cluster graph")

    @property
    def maximize(self):
        return self.fitness.maximize

    def coupling(self, u):
        shaper = self.shaper.with_params(u)
        return assemble(self.phase_matching, shaped_pump(self.base, shaper).amplitudes), shaper

    def _nullifier_stats(self, L):
        svd = np.linalg.svd(L)
        gains = svd[1]
        if not gains[0] > 0:
            raise NoGainError("no parametric gain: leading gain is zero")
        eta_t = self.target_db * np.log(10.0) / (20.0 * gains[0])
        gamma = mode_covariance_from_coupling(L, eta_t, self.frexels, svd=svd)
        if self.perm is not None:
            gamma = permute_covariance(gamma, self.perm)
        res = optimize_frexel_phases(gamma, self.graph, **self.phase_kwargs)
        return gains, res.variances, res.thetas

    def metrics(self, u):
        L, shaper = self.coupling(u)
        f = self.fitness
        w = pump_power_weight(shaper, self.base)
        variances = thetas = None
        if f.needs_cluster:
            gains, variances, thetas = self._nullifier_stats(L)
            value = float(np.sum(variances))
            if f.kind == "nullifier_f3_bar":
                value -= f.h * w
        else:
            gains = supermode_gains(L)
            if f.kind.startswith("flatten"):
                value = fitness_flatten(gains, f.k)
                if f.kind == "flatten_f1_bar":
                    value -= power_penalty(w, f.a, f.x)
            else:
                value = fitness_gap(gains)
                if f.kind == "gap_f2_bar":
                    value -= power_penalty(w, f.b, f.y)
        gains = np.sort(gains)[::-1]
        gap = float(gains[0] / gains[1]) if gains.size > 1 and gains[1] > 0 else np.inf
        n_flat = int(np.sum(gains > 0.9 * gains[0])) if gains[0] > 0 else 0
        return ShaperMetrics(float(value), gains, w, gap, n_flat, variances, thetas)

    def __call__(self, u):
        try:
            return self.metrics(u).value
        except (NoGainError, ValueError, np.linalg.LinAlgError):
            return np.nan


# ---------------------------------------------------------------------------
# evolution strategy


@dataclass(frozen=True)
class EvoConfig:
    """Settings of :func:`evolve`.

    Attributes:
        dimension: number of parameters ``n``.
        sigma0: initial global step size.
        max_generations: generation budget.
        seed: RNG seed.
        population: mutants per generation; defaults to ``4 + floor(3 ln n)``.
        parents: selected mutants; defaults to half the population.
        history_blend: weight of the previous incumbent in the new one.
        lower, upper: optional box bounds (scalars or length-``n`` arrays,
            ``None`` entries meaning unbounded).
        max_resample: retries for a mutant whose objective is not finite.
        target: stop once the best value reaches this level.
        sigma_min: stop once the step size falls below this.
        scales: optional per-coordinate multipliers of the initial step
            (the initial covariance is ``diag(scales^2)``).
    """

    dimension: int
    sigma0: float = 0.3
    max_generations: int = 200
    seed: int = 0
    population: int | None = None
    parents: int | None = None
    history_blend: float = 0.3
    lower: object = None
    upper: object = None
    max_resample: int = 10
    target: float | None = None
    sigma_min: float = 1e-14
    scales: object = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError("dimension must be >= 1")
        pop = 4 + int(np.floor(3.0 * np.log(self.dimension))) if self.population is None else int(self.population)
        parents = pop // 2 if self.parents is None else int(self.parents)
        object.__setattr__(self, "population", pop)
        object.__setattr__(self, "parents", parents)
        if pop < 2 or not 1 <= parents <= pop:
            raise ConfigError("need population >= 2 and 1 <= parents <= population")
        if not (np.isfinite(self.sigma0) and self.sigma0 > 0):
            raise ConfigError("sigma0 must be positive")
        if not 0.0 <= self.history_blend < 1.0:
            raise ConfigError("history_blend must lie in [0, 1)")
        if self.max_generations < 0:
            raise ConfigError("max_generations must be non-negative")
        if self.scales is not None:
            scales = np.broadcast_to(np.asarray(self.scales, dtype=float), (self.dimension,)).copy()
            if not np.all(np.isfinite(scales) & (scales > 0)):
                raise ConfigError("scales must be positive")
            object.__setattr__(self, "scales", scales)

    def bounds(self):
        n = self.dimension

        def expand(b, fill):
            if b is None:
                return np.full(n, fill)
            arr = np.array([fill if v is None else v for v in np.broadcast_to(np.asarray(b, dtype=object), (n,))],
                           dtype=float)
            return arr

        lo, hi = expand(self.lower, -np.inf), expand(self.upper, np.inf)
        if np.any(lo > hi):
            raise ConfigError("lower bound exceeds upper bound")
        return lo, hi


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best: float
    mean: float
    sigma: float


@dataclass
class EvoResult:
    best_u: np.ndarray
    best_value: float
    history: list
    evaluations: np.ndarray  # (generations, population) objective values
    mean: np.ndarray
    sigma: float
    n_evaluations: int
    stop_reason: str


def _weights(mu):
    w = np.log(mu + 1.0) - np.log(np.arange(1, mu + 1))
    return w / w.sum()


def evolve(objective, config, maximize=False, x0=None, map_fn=map):
    """Optimize ``objective`` with a covariance-adapting evolution strategy.

    Args:
        objective: callable ``u -> float``; non-finite values are rejected.
        config: :class:`EvoConfig`.
        maximize: maximize instead of minimize.
        x0: starting point; drawn uniformly in the box (or standard normal
            where unbounded) when omitted.
        map_fn: ``map``-like callable used to evaluate a generation; results
            must come back in input order. All random draws happen before it
            is called, so a parallel map cannot change the result.

    Returns:
        EvoResult with the best point found and the per-generation history.

    Raises:
        SPDCError: a mutant stays non-finite after ``max_resample`` retries, or
            the objective is not finite at ``x0``.
    """
    n = config.dimension
    lam, mu = config.population, config.parents
    lo, hi = config.bounds()
    rng = np.random.default_rng(config.seed)
    sign = -1.0 if maximize else 1.0  # internally minimize sign * f

    if x0 is None:
        finite = np.isfinite(lo) & np.isfinite(hi)
        x0 = np.where(finite, rng.uniform(np.where(finite, lo, 0), np.where(finite, hi, 1)), rng.standard_normal(n))
    mean = np.clip(np.asarray(x0, dtype=float).copy(), lo, hi)
    if mean.shape != (n,):
        raise ConfigError(f"x0 must have length {n}")

    weights = _weights(mu)
    mu_eff = 1.0 / np.sum(weights**2)
    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, np.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    chi_n = np.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
    blend = config.history_blend

    sigma = float(config.sigma0)
    scales = np.ones(n) if config.scales is None else config.scales
    C = np.diag(scales**2)
    B, Dsq = np.eye(n), scales**2
    p_sigma = np.zeros(n)
    p_c = np.zeros(n)

    f0 = float(objective(mean))
    if not np.isfinite(f0):
        raise SPDCError("objective is not finite at the starting point")
    best_u, best_f = mean.copy(), sign * f0
    history, evaluations = [], []
    n_evals = 1
    stop = "max_generations"

    def reached(fmin):
        return config.target is not None and fmin <= sign * config.target

    for gen in range(config.max_generations):
        BD = B * np.sqrt(Dsq)
        z = rng.standard_normal((lam, n))
        xs = np.clip(mean + sigma * z @ BD.T, lo, hi)
        fs = sign * np.array(list(map_fn(objective, list(xs))), dtype=float)
        n_evals += lam
        for i in np.flatnonzero(~np.isfinite(fs)):
            for _ in range(config.max_resample):
                xs[i] = np.clip(mean + sigma * BD @ rng.standard_normal(n), lo, hi)
                fs[i] = sign * float(objective(xs[i]))
                n_evals += 1
                if np.isfinite(fs[i]):
                    break
            else:
                raise SPDCError(f"objective stayed non-finite after {config.max_resample} resamples")

        order = np.argsort(fs, kind="stable")
        if fs[order[0]] < best_f:
            best_f, best_u = float(fs[order[0]]), xs[order[0]].copy()

        if np.ptp(fs) == 0.0:
            # no ranking information: keep the incumbent and let the step decay
            p_sigma *= 1.0 - c_sigma
        else:
            ys = (xs[order[:mu]] - mean) / sigma
            y_w = weights @ ys
            recombined = mean + sigma * y_w
            mean = np.clip((1.0 - blend) * recombined + blend * mean, lo, hi)

            inv_sqrt_C = (B / np.sqrt(Dsq)) @ B.T
            p_sigma = (1.0 - c_sigma) * p_sigma + np.sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * inv_sqrt_C @ y_w
            norm_ps = np.linalg.norm(p_sigma) / np.sqrt(1.0 - (1.0 - c_sigma) ** (2 * (gen + 1)))
            h_sigma = float(norm_ps < (1.4 + 2.0 / (n + 1.0)) * chi_n)
            p_c = (1.0 - c_c) * p_c + h_sigma * np.sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w
            rank_mu = (ys.T * weights) @ ys
            C = (
                (1.0 - c_1 - c_mu) * C
                + c_1 * (np.outer(p_c, p_c) + (1.0 - h_sigma) * c_c * (2.0 - c_c) * C)
                + c_mu * rank_mu
            )
            C = 0.5 * (C + C.T)
            Dsq, B = np.linalg.eigh(C)
            Dsq = np.maximum(Dsq, 1e-20 * max(Dsq.max(), 1e-300))

        sigma *= float(np.exp((c_sigma / d_sigma) * (np.linalg.norm(p_sigma) / chi_n - 1.0)))
        evaluations.append(sign * fs)
        history.append(GenerationRecord(gen, sign * best_f, float(np.mean(sign * fs)), sigma))

        if reached(best_f):
            stop = "target"
            break
        if sigma * np.sqrt(Dsq.max()) < config.sigma_min:
            stop = "sigma_min"
            break

    return EvoResult(
        best_u=best_u,
        best_value=sign * best_f,
        history=history,
        evaluations=np.array(evaluations).reshape(len(evaluations), lam),
        mean=mean,
        sigma=sigma,
        n_evaluations=n_evals,
        stop_reason=stop,
    )


def shaper_evo_config(shaper, amplitude_scale=1.0, phase_scale=1.0, **kwargs):
    """EvoConfig for shaper parameters: amplitudes boxed to [0, 2], phases free.

    ``amplitude_scale`` and ``phase_scale`` set the relative initial step of
    the two halves of ``u``.
    """
    m = shaper.n_control
    lower = [0.0] * m + [None] * m
    upper = [2.0] * m + [None] * m
    scales = np.concatenate([np.full(m, amplitude_scale), np.full(m, phase_scale)])
    return EvoConfig(dimension=2 * m, lower=lower, upper=upper, scales=scales, **kwargs)


def reduce_phases(shaper):
    """Shaper with its phase controls reduced mod 2 pi for reporting."""
    u = shaper.u.copy()
    u[shaper.n_control :] = np.mod(u[shaper.n_control :], 2.0 * np.pi)
    return replace(shaper, u=u)


def nullifier_trace_at(gamma_modes, graph, thetas):
    """Sum of nullifier variances for fixed LO phases."""
    return float(np.sum(nullifier_variances(rotate_modes(gamma_modes, thetas), graph)))

"""Synthetic multi-graph dependent generators and empirical tail checks
for the concentration inequalities.

Generators produce K independent task blocks.  An `iid_blocks` task is a
sum of m independent base draws (edgeless dependency graph, chi_f = 1); a
`bipartite_ranking` task draws n_pos + n_neg latent values, forms one
bounded pair variable g(u_p, w_q) per (positive, negative) pair, and sums
them, which realizes the rook dependency graph with chi_f =
max(n_pos, n_neg).  All summands are bounded so the unit increment
condition behind the tail bounds holds, and the (v, sigma^2, W, U) bundle
is available in closed form for the uniform and two-point bases.

Reproducibility: trials are simulated in fixed-size batches; batch i uses
the i-th child stream of numpy's SeedSequence(master_seed).  Aggregation
over batches is order-independent, so batches could run concurrently
without changing any reported number.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import concentration as conc
from .concentration import TailBoundInput
from .errors import ConfigError, DomainError, ModeError

BATCH = 1 << 16

INEQUALITIES = ("bennett_general", "bennett_refined", "lower_tail", "talagrand")


@dataclass(frozen=True)
class DependentSampler:
    """Seeded generator of Z = sum of multi-graph dependent block sums.

    structure 'iid_blocks': K tasks of m independent summands each.
    structure 'bipartite_ranking': K tasks of n_pos * n_neg pair variables
    g(u_p, w_q); kernel is one of 'product', 'centered_product', 'mean'.
    base is 'uniform' on [0,1] or 'two_point' taking base_hi with
    probability base_p and base_lo otherwise (base_lo = base_hi gives a
    point mass).  centered subtracts the mean from each iid summand
    (iid_blocks only).
    """

    structure: str
    k_tasks: int = 1
    m: int = 0
    n_pos: int = 0
    n_neg: int = 0
    base: str = "uniform"
    base_p: float = 0.5
    base_lo: float = 0.0
    base_hi: float = 1.0
    kernel: str = "product"
    centered: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.structure not in ("iid_blocks", "bipartite_ranking"):
            raise ConfigError(f"unknown structure {self.structure!r}")
        if self.structure == "iid_blocks" and self.m < 1:
            raise ConfigError("iid_blocks needs m >= 1")
        if self.structure == "bipartite_ranking" and (self.n_pos < 1 or self.n_neg < 1):
            raise ConfigError("bipartite_ranking needs n_pos, n_neg >= 1")
        if self.base not in ("uniform", "two_point"):
            raise ConfigError(f"unknown base {self.base!r}")
        if self.base == "two_point":
            if not (0.0 < self.base_p < 1.0):
                raise ConfigError("two_point base needs 0 < base_p < 1")
            if not (0.0 <= self.base_lo <= self.base_hi <= 1.0):
                raise ConfigError("two_point base needs 0 <= lo <= hi <= 1")
        if self.kernel not in ("product", "centered_product", "mean"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.k_tasks < 1:
            raise ConfigError("k_tasks must be >= 1")

    def config_dict(self):
        return {
            "structure": self.structure,
            "k_tasks": self.k_tasks,
            "m": self.m,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "base": self.base,
            "base_p": self.base_p,
            "base_lo": self.base_lo,
            "base_hi": self.base_hi,
            "kernel": self.kernel,
            "centered": self.centered,
            "seed": self.seed,
        }


def _base_moments(sampler):
    """(mean, second moment, sup) of one base draw."""
    if sampler.base == "uniform":
        return 0.5, 1.0 / 3.0, 1.0
    p, lo, hi = sampler.base_p, sampler.base_lo, sampler.base_hi
    mean = lo + (hi - lo) * p
    e2 = lo * lo * (1.0 - p) + hi * hi * p
    return mean, e2, hi


def _base_range(sampler):
    if sampler.base == "uniform":
        return 0.0, 1.0
    return sampler.base_lo, sampler.base_hi


def _kernel_moments(sampler):
    """(E[g], E[g^2], sup g) of one pair variable."""
    mean, e2, _ = _base_moments(sampler)
    lo, hi = _base_range(sampler)
    var = e2 - mean**2
    if sampler.kernel == "product":
        return mean**2, e2**2, hi * hi
    if sampler.kernel == "centered_product":
        sup = max((hi - mean) ** 2, (mean - lo) ** 2)
        return 0.0, var**2, sup
    # mean kernel (u + w) / 2
    return mean, (e2 + mean**2) / 2.0, hi


def _summand_moments(sampler):
    """(E, E^2-moment, b) of one summand (iid summand or pair variable)."""
    if sampler.structure == "iid_blocks":
        mean, e2, sup = _base_moments(sampler)
        if sampler.centered:
            return 0.0, e2 - mean**2, sup - mean
        return mean, e2, sup
    return _kernel_moments(sampler)


def _task_shape(sampler):
    """(number of cover classes, class size, summands per task, chi_f)."""
    if sampler.structure == "iid_blocks":
        return 1, sampler.m, sampler.m, 1.0
    n_classes = max(sampler.n_pos, sampler.n_neg)
    size = min(sampler.n_pos, sampler.n_neg)
    return n_classes, size, sampler.n_pos * sampler.n_neg, float(n_classes)


def analytic_input(sampler) -> TailBoundInput:
    """Closed-form (v, sigma^2, W, U) bundle for the declared distribution."""
    mean_g, e2_g, b = _summand_moments(sampler)
    n_classes, size, n_summands, chi = _task_shape(sampler)
    ez_class = size * mean_g
    s_class = size * e2_g
    v_class = (1.0 + b) * ez_class + s_class
    task_blocks = tuple((1.0, v_class) for _ in range(n_classes))
    return TailBoundInput(
        b=b,
        EZ=sampler.k_tasks * n_summands * mean_g,
        sigma_sq=sampler.k_tasks * n_summands * e2_g,
        chi_list=(chi,) * sampler.k_tasks,
        blocks=(task_blocks,) * sampler.k_tasks,
    )


def _batch_streams(seed, n_batches):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_batches)]


def _draw_base(rng, sampler, shape):
    if sampler.base == "uniform":
        return rng.random(shape)
    lo, hi = sampler.base_lo, sampler.base_hi
    return lo + (hi - lo) * (rng.random(shape) < sampler.base_p)


def _pair_values(sampler, u, w):
    mean, _, _ = _base_moments(sampler)
    if sampler.kernel == "product":
        return u[..., :, None] * w[..., None, :]
    if sampler.kernel == "centered_product":
        return (u[..., :, None] - mean) * (w[..., None, :] - mean)
    return 0.5 * (u[..., :, None] + w[..., None, :])


def _simulate(sampler, n_trials, sup_mode=False, stream_offset=0):
    """Z realizations; sup_mode replaces each task sum by the supremum of
    the two-function centered class {+f, -f} (|centered task sum| / amp)."""
    mean_g, e2_g, _ = _summand_moments(sampler)
    if sup_mode:
        amp = _sup_amp(sampler)
    n_batches = (n_trials + BATCH - 1) // BATCH
    streams = _batch_streams(sampler.seed, stream_offset + n_batches)[stream_offset:]
    out = np.empty(n_trials)
    done = 0
    for rng in streams:
        size = min(BATCH, n_trials - done)
        if sampler.structure == "iid_blocks":
            draws = _draw_base(rng, sampler, (size, sampler.k_tasks, sampler.m))
            if sampler.centered:
                base_mean, _, _ = _base_moments(sampler)
                draws = draws - base_mean
            task_sums = draws.sum(axis=2)
        else:
            u = _draw_base(rng, sampler, (size, sampler.k_tasks, sampler.n_pos))
            w = _draw_base(rng, sampler, (size, sampler.k_tasks, sampler.n_neg))
            task_sums = _pair_values(sampler, u, w).sum(axis=(2, 3))
        if sup_mode:
            _, _, n_summands, _ = _task_shape(sampler)
            centered = task_sums - n_summands * mean_g
            task_sums = np.abs(centered) / amp
        out[done:done + size] = task_sums.sum(axis=1)
        done += size
    return out


def _summand_range(sampler):
    """(lo, hi) range of one summand."""
    mean, _, _ = _base_moments(sampler)
    b_lo, b_hi = _base_range(sampler)
    if sampler.structure == "iid_blocks":
        if sampler.centered:
            return b_lo - mean, b_hi - mean
        return b_lo, b_hi
    if sampler.kernel == "product":
        return b_lo * b_lo, b_hi * b_hi
    if sampler.kernel == "centered_product":
        return (-(b_hi - mean) * (mean - b_lo),
                max((b_hi - mean) ** 2, (mean - b_lo) ** 2))
    return b_lo, b_hi


def _sup_amp(sampler):
    """sup |summand - E[summand]|, the scaling putting the class in [-1, 1]."""
    mean_g, _, _ = _summand_moments(sampler)
    lo, hi = _summand_range(sampler)
    amp = max(hi - mean_g, mean_g - lo)
    if amp <= 0.0:
        raise ModeError("degenerate summand: supremum class has no spread")
    return amp


@dataclass
class SampleResult:
    z: np.ndarray
    inp: TailBoundInput
    moments_mode: str


def sample_Z(sampler: DependentSampler, n_trials: int,
             moments: str = "analytic") -> SampleResult:
    """Simulate Z and return realizations plus the tail-bound bundle.

    moments='analytic' computes (E[Z], sigma^2, v) from the declared base
    and kernel; moments='plugin' estimates the summand moments from a
    calibration run one tenth the size (separate seed stream) and is
    labeled as such in the result.
    """
    if n_trials < 1:
        raise DomainError("n_trials must be >= 1")
    if moments not in ("analytic", "plugin"):
        raise ConfigError(f"unknown moments mode {moments!r}")
    z = _simulate(sampler, n_trials)
    if moments == "analytic":
        return SampleResult(z=z, inp=analytic_input(sampler), moments_mode="analytic")
    n_cal = max(1000, n_trials // 10)
    main_batches = (n_trials + BATCH - 1) // BATCH
    mean_hat, e2_hat = _calibrate(sampler, n_cal, stream_offset=main_batches)
    inp = _plugin_input(sampler, mean_hat, e2_hat)
    return SampleResult(z=z, inp=inp, moments_mode="plugin")


def _calibrate(sampler, n_cal, stream_offset):
    """Pooled empirical (mean, second moment) of one summand, from a
    calibration run on separate seed streams."""
    n_batches = (n_cal + BATCH - 1) // BATCH
    streams = _batch_streams(sampler.seed, stream_offset + n_batches)[stream_offset:]
    s1, s2, count = 0.0, 0.0, 0
    done = 0
    for rng in streams:
        size = min(BATCH, n_cal - done)
        if sampler.structure == "iid_blocks":
            vals = _draw_base(rng, sampler, (size, sampler.k_tasks, sampler.m))
            if sampler.centered:
                base_mean, _, _ = _base_moments(sampler)
                vals = vals - base_mean
        else:
            u = _draw_base(rng, sampler, (size, sampler.k_tasks, sampler.n_pos))
            w = _draw_base(rng, sampler, (size, sampler.k_tasks, sampler.n_neg))
            vals = _pair_values(sampler, u, w)
        s1 += float(vals.sum())
        s2 += float((vals**2).sum())
        count += vals.size
        done += size
    return s1 / count, s2 / count


def _plugin_input(sampler, mean_hat, e2_hat):
    """Bundle with the summand moments replaced by calibration estimates;
    the almost-sure bound b stays structural (it cannot be estimated)."""
    _, _, b = _summand_moments(sampler)
    n_classes, size, n_summands, chi = _task_shape(sampler)
    e2_hat = max(e2_hat, mean_hat**2)
    ez_class = size * mean_hat
    v_class = (1.0 + b) * ez_class + size * e2_hat
    return TailBoundInput(
        b=b,
        EZ=sampler.k_tasks * n_summands * mean_hat,
        sigma_sq=sampler.k_tasks * n_summands * e2_hat,
        chi_list=(chi,) * sampler.k_tasks,
        blocks=(tuple((1.0, v_class) for _ in range(n_classes)),) * sampler.k_tasks,
    )


def empirical_tail(samples, threshold: float):
    """(frequency of samples >= threshold, binomial standard error)."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise DomainError("empirical_tail needs a nonempty sample")
    freq = float((arr >= threshold).mean())
    stderr = math.sqrt(freq * (1.0 - freq) / arr.size)
    return freq, stderr


@dataclass
class TailReport:
    """Empirical-vs-bound comparison over a grid of confidence exponents."""

    config: dict
    inequality: str
    form: str
    moments_mode: str
    n_trials: int
    t_grid: list
    rows: list = field(default_factory=list)

    @property
    def violations(self):
        return [row["t"] for row in self.rows if row["violation"]]

    def as_dict(self):
        return {
            "config": self.config,
            "inequality": self.inequality,
            "form": self.form,
            "moments_mode": self.moments_mode,
            "n_trials": self.n_trials,
            "t_grid": list(self.t_grid),
            "rows": self.rows,
            "violations": self.violations,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)

    def to_table(self):
        header = f"{'t':>10} {'threshold':>14} {'empirical':>12} {'stderr':>12} {'bound':>12} {'viol':>5}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r['t']:>10.4g} {r['threshold']:>14.6g} {r['empirical']:>12.6g} "
                f"{r['stderr']:>12.6g} {r['bound']:>12.6g} {'YES' if r['violation'] else 'no':>5}"
            )
        return "\n".join(lines)


def _bound_at(inequality, inp, t, v_override=None):
    """Probability-form bound at deviation t for the chosen inequality."""
    if v_override is None:
        work = inp
    else:
        # fault-injection knob for harness self-tests: replace v, keep structure
        sigma_fake = v_override - (1.0 + inp.b) * inp.EZ
        if sigma_fake < 0:
            raise DomainError("v override smaller than (1+b)E[Z]")
        scale = v_override / inp.v
        blocks = None
        if inp.blocks is not None:
            blocks = tuple(
                tuple((w, vk * scale) for w, vk in task) for task in inp.blocks
            )
        work = TailBoundInput(b=inp.b, EZ=inp.EZ, sigma_sq=sigma_fake,
                              chi_list=inp.chi_list, blocks=blocks)
    if inequality == "bennett_general":
        p_tight, _ = conc.bennett_tail_general(work, t)
        return p_tight
    if inequality == "bennett_refined":
        return conc.bennett_tail_refined(work, t)
    if inequality == "lower_tail":
        return conc.bennett_lower_tail(work, t)
    if inequality == "talagrand":
        _, p_simple = conc.bennett_tail_general(work, t)
        return p_simple
    raise ConfigError(f"unknown inequality {inequality!r}")


def verify_inequality(sampler: DependentSampler, inequality: str, t_grid,
                      n_trials: int, form: str = "probability",
                      moments: str = "analytic",
                      v_override: float | None = None) -> TailReport:
    """Compare empirical tails against one inequality over a t grid.

    form='probability' checks P(Z >= E[Z] + t) (or <= E[Z] - t for the
    lower tail) against the inequality's probability bound at each grid t.
    form='deviation' checks P(Z >= E[Z] + d(t)) against exp(-t), with
    d(t) = sqrt(2 c v t) + 2 c t / 3 and c the constant matching the mode.
    A row is flagged as a violation only when the empirical frequency
    exceeds the bound by more than three Monte Carlo standard errors.
    """
    if inequality not in INEQUALITIES:
        raise ConfigError(f"unknown inequality {inequality!r}; choose from {INEQUALITIES}")
    if form not in ("probability", "deviation"):
        raise ConfigError(f"unknown form {form!r}")

    if inequality == "talagrand":
        z = _simulate(sampler, n_trials, sup_mode=True)
        n_cal = max(1000, n_trials // 10)
        main_batches = (n_trials + BATCH - 1) // BATCH
        ez = float(_simulate(sampler, n_cal, sup_mode=True,
                             stream_offset=main_batches).mean())
        inp = _talagrand_input(sampler, ez)
        moments_mode = "plugin"
    else:
        result = sample_Z(sampler, n_trials, moments=moments)
        z, inp, moments_mode = result.z, result.inp, result.moments_mode
        if not inp.unit_weights and inequality == "bennett_refined":
            raise ModeError("refined mode requires unit cover weights")

    v = inp.v if v_override is None else v_override
    if inequality == "bennett_refined":
        c_dev = conc.refined_bernstein_constant(inp.chi_list)
    else:
        c_dev = conc.general_bernstein_constant(inp.chi_list)

    report = TailReport(
        config=sampler.config_dict(), inequality=inequality, form=form,
        moments_mode=moments_mode, n_trials=n_trials, t_grid=list(t_grid),
    )
    lower = inequality == "lower_tail"
    for t in t_grid:
        if t < 0:
            raise DomainError("t grid entries must be >= 0")
        if t == 0.0:
            row = {"t": 0.0, "threshold": inp.EZ, "empirical": 1.0,
                   "stderr": 0.0, "bound": 1.0, "violation": False}
            report.rows.append(row)
            continue
        if form == "probability":
            dev = t
            bound = _bound_at(inequality, inp, t, v_override=v_override)
        else:
            dev = conc.bernstein_deviation(c_dev, v, t)
            bound = math.exp(-t)
        if lower:
            threshold = inp.EZ - dev
            freq = float((z <= threshold).mean())
            stderr = math.sqrt(freq * (1.0 - freq) / z.size)
        else:
            threshold = inp.EZ + dev
            freq, stderr = empirical_tail(z, threshold)
        violation = freq - 3.0 * stderr > bound
        report.rows.append({
            "t": float(t), "threshold": float(threshold), "empirical": freq,
            "stderr": stderr, "bound": float(bound), "violation": bool(violation),
        })
    return report


def _talagrand_input(sampler, ez_estimate):
    """Bundle for the supremum process: v = sum w sigma_kj^2 + 2 E[Z]."""
    if ez_estimate < 0:
        ez_estimate = 0.0
    mean_g, e2_g, _ = _summand_moments(sampler)
    amp = _sup_amp(sampler)
    f_second = (e2_g - mean_g**2) / amp**2  # sup_f E[f^2] per summand
    n_classes, size, _, chi = _task_shape(sampler)
    sigma_blocks = (tuple((1.0, size * f_second) for _ in range(n_classes)),) * sampler.k_tasks
    v = conc.talagrand_v(sigma_blocks, ez_estimate)
    # Reuse TailBoundInput plumbing: encode v via EZ = E[Z], b = 1 and a
    # sigma^2 making (1+b)EZ + sigma^2 equal the Talagrand v.
    sigma_sq = v - 2.0 * ez_estimate
    return TailBoundInput(b=1.0, EZ=ez_estimate, sigma_sq=sigma_sq,
                          chi_list=(chi,) * sampler.k_tasks, blocks=None)

"""Sandwich estimates of the small-ball function Q(u) of linear marginals.

The sphere infimum Q(u) = inf_t P{|<X,t>| >= u} is not computable, so every
report carries both sides of a sandwich:

- upper: a direction-search minimum of the empirical tail (a search over a
  subset of the sphere can only overestimate the infimum);
- lower: the Paley-Zygmund bound (1 - u/alpha)^q (1/beta_p)^q from moment
  ratios, certified when alpha and beta_p are.

Search strategy (deterministic under a fixed seed): 80% of the direction
budget goes to uniform random directions, then the 2n signed coordinate
directions, then greedy local refinement of the best candidate by Gaussian
perturbations of decaying scale.  Ties break to the lowest pool index.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .distributions import DistributionSpec, marginal_abs_moment
from .errors import InvalidInputError, InvalidParameterError, UnsupportedQueryError
from .streams import as_generator

_REFINE_SCALE0 = 0.5
_REFINE_DECAY = 0.9


def q_direction(samples: np.ndarray, t: np.ndarray, u: float) -> float:
    """Empirical fraction of draws with |<X_i, t>| >= u for a unit vector t."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise InvalidInputError(f"samples must be a nonempty 2-D array, got shape {samples.shape}")
    t = np.asarray(t, dtype=float)
    if abs(np.linalg.norm(t) - 1.0) > 1e-10:
        raise InvalidParameterError(f"direction must be unit norm, got ||t|| = {np.linalg.norm(t)}")
    if u < 0:
        raise InvalidParameterError(f"u must be >= 0, got {u}")
    return float((np.abs(samples @ t) >= u).mean())


def _base_pool(n: int, budget: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Random + signed-coordinate directions and the leftover refinement budget.

    At least one random direction is always drawn; coordinate directions
    (e_1..e_n then -e_1..-e_n) are appended only while budget remains, so tiny
    budgets degenerate to pure random search.
    """
    if budget < 1:
        raise InvalidParameterError(f"budget must be >= 1, got {budget}")
    n_rand = max(1, int(round(0.8 * budget)))
    g = rng.standard_normal((n_rand, n))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    dirs = [g / norms]
    n_coord = min(2 * n, max(0, budget - n_rand))
    if n_coord > 0:
        eye = np.eye(n)
        coords = np.vstack([eye, -eye])[:n_coord]
        dirs.append(coords)
    pool = np.vstack(dirs)
    n_refine = max(0, budget - pool.shape[0])
    return pool, n_refine


def _perturb(best: np.ndarray, scale: float, rng: np.random.Generator) -> np.ndarray:
    cand = best + scale * rng.standard_normal(best.shape[0])
    norm = np.linalg.norm(cand)
    if norm == 0:
        return best
    return cand / norm


def q_inf_search(
    samples: np.ndarray,
    u: float,
    budget: int,
    rng: np.random.Generator | int | None = None,
) -> tuple[float, np.ndarray]:
    """Upper estimate of Q(u): minimum of q_direction over the search set."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise InvalidInputError(f"samples must be a nonempty 2-D array, got shape {samples.shape}")
    rng = as_generator(rng)
    n = samples.shape[1]
    pool, n_refine = _base_pool(n, budget, rng)
    fracs = (np.abs(samples @ pool.T) >= u).mean(axis=0)
    best_i = int(np.argmin(fracs))
    best_q = float(fracs[best_i])
    best_dir = pool[best_i]
    scale = _REFINE_SCALE0
    for _ in range(n_refine):
        cand = _perturb(best_dir, scale, rng)
        qc = float((np.abs(samples @ cand) >= u).mean())
        if qc < best_q:
            best_q, best_dir = qc, cand
        scale *= _REFINE_DECAY
    return best_q, best_dir


@dataclass(frozen=True)
class MomentRatios:
    """alpha = inf of L1 norms over directions; beta_p = sup of Lp/L1 ratios."""

    alpha: float
    beta_p: float
    p: float
    degenerate: bool = False
    alpha_dir: np.ndarray | None = None
    beta_dir: np.ndarray | None = None


def moment_ratios(
    source: np.ndarray | DistributionSpec,
    p: float = 2.0,
    budget: int = 256,
    rng: np.random.Generator | int | None = None,
) -> MomentRatios:
    """Moment ratios of linear marginals, by quadrature or direction search.

    A ``DistributionSpec`` takes the analytic path (rotation-invariant
    families only, where coordinate quadrature equals the sphere extremes).
    An array of samples takes the empirical path: alpha from a direction
    search minimizing the empirical L1 norm, beta_p from a search maximizing
    the empirical Lp/L1 ratio.  A direction with empirical L1 norm 0 makes the
    result degenerate (alpha = 0).
    """
    if p <= 1:
        raise InvalidParameterError(f"p must be > 1, got {p}")
    if isinstance(source, DistributionSpec):
        if not source.analytic["q"]:
            raise UnsupportedQueryError(
                f"{source.family} is not rotation-invariant; use the empirical path"
            )
        alpha = marginal_abs_moment(source, 1.0)
        lp = marginal_abs_moment(source, p) ** (1.0 / p)
        return MomentRatios(alpha=alpha, beta_p=lp / alpha, p=p)

    samples = np.asarray(source, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise InvalidInputError(f"samples must be a nonempty 2-D array, got shape {samples.shape}")
    rng = as_generator(rng)
    n = samples.shape[1]
    pool, n_refine = _base_pool(n, budget, rng)

    def l1_of(d: np.ndarray) -> float:
        return float(np.abs(samples @ d).mean())

    def ratio_of(d: np.ndarray) -> float:
        proj = np.abs(samples @ d)
        l1 = proj.mean()
        if l1 == 0:
            return math.inf
        return float((proj**p).mean() ** (1.0 / p) / l1)

    proj = np.abs(samples @ pool.T)
    l1s = proj.mean(axis=0)
    lps = (proj**p).mean(axis=0) ** (1.0 / p)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(l1s > 0, lps / l1s, math.inf)

    ai = int(np.argmin(l1s))
    alpha, alpha_dir = float(l1s[ai]), pool[ai]
    bi = int(np.argmax(np.where(np.isfinite(ratios), ratios, -math.inf)))
    beta, beta_dir = float(ratios[bi]), pool[bi]
    if not np.isfinite(beta):  # every direction degenerate
        beta = math.inf

    scale = _REFINE_SCALE0
    for k in range(n_refine):
        if k % 2 == 0:
            cand = _perturb(alpha_dir, scale, rng)
            val = l1_of(cand)
            if val < alpha:
                alpha, alpha_dir = val, cand
        else:
            cand = _perturb(beta_dir, scale, rng)
            val = ratio_of(cand)
            if math.isfinite(val) and val > beta:
                beta, beta_dir = val, cand
        scale *= _REFINE_DECAY
    degenerate = alpha == 0.0
    return MomentRatios(
        alpha=alpha, beta_p=beta, p=p, degenerate=degenerate, alpha_dir=alpha_dir, beta_dir=beta_dir
    )


class PZBound(NamedTuple):
    value: float
    vacuous: bool


def paley_zygmund_lower(ratios: MomentRatios, u: float) -> PZBound:
    """Paley-Zygmund lower bound (1 - u/alpha)^q (1/beta_p)^q, q conjugate to p.

    Vacuous (value 0) when u >= alpha or the ratios are degenerate.
    """
    if u < 0:
        raise InvalidParameterError(f"u must be >= 0, got {u}")
    if ratios.p <= 1:
        raise InvalidParameterError(f"p must be > 1, got {ratios.p}")
    if ratios.alpha <= 0 or u >= ratios.alpha or not math.isfinite(ratios.beta_p):
        return PZBound(0.0, True)
    q = ratios.p / (ratios.p - 1.0)
    value = (1.0 - u / ratios.alpha) ** q * (1.0 / ratios.beta_p) ** q
    return PZBound(float(value), False)


@dataclass(frozen=True)
class SmallBallCurve:
    """Sandwich of Q(u) over a grid: search upper estimates and PZ lower bounds."""

    u_grid: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    argmin_dirs: np.ndarray
    dir_indices: np.ndarray
    sample_size: int

    def stderr(self) -> np.ndarray:
        """Binomial standard error of each upper estimate."""
        q = self.upper
        return np.sqrt(q * (1.0 - q) / self.sample_size)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "q_upper", "q_lower", "dir_index", "stderr"])
            for u, qu, ql, di, se in zip(
                self.u_grid, self.upper, self.lower, self.dir_indices, self.stderr()
            ):
                w.writerow([repr(float(u)), repr(float(qu)), repr(float(ql)), int(di), repr(float(se))])


def small_ball_curve(
    samples: np.ndarray,
    u_grid,
    budget: int = 256,
    p: float = 2.0,
    rng: np.random.Generator | int | None = None,
    ratios: MomentRatios | None = None,
) -> SmallBallCurve:
    """Build the sandwich curve over an ascending threshold grid.

    One direction pool serves every u: base pool first, then refinement
    rounds against each grid point append their candidates, and the final
    minima are taken over the full pool at every u.  Minimizing over a common
    set makes the upper estimates nonincreasing in u by construction.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise InvalidInputError(f"samples must be a nonempty 2-D array, got shape {samples.shape}")
    u_grid = np.asarray(u_grid, dtype=float)
    if u_grid.ndim != 1 or len(u_grid) == 0:
        raise InvalidParameterError("u_grid must be a nonempty 1-D sequence")
    if np.any(np.diff(u_grid) < 0) or np.any(u_grid < 0):
        raise InvalidParameterError("u_grid must be ascending and nonnegative")
    rng = as_generator(rng)
    n = samples.shape[1]

    pool, n_refine = _base_pool(n, budget, rng)
    dirs = [pool]
    per_u = n_refine // len(u_grid)
    if per_u > 0:
        proj = np.abs(samples @ pool.T)
        for u in u_grid:
            fracs = (proj >= u).mean(axis=0)
            best_i = int(np.argmin(fracs))
            best_q, best_dir = float(fracs[best_i]), pool[best_i]
            scale = _REFINE_SCALE0
            extra = []
            for _ in range(per_u):
                cand = _perturb(best_dir, scale, rng)
                qc = float((np.abs(samples @ cand) >= u).mean())
                if qc < best_q:
                    best_q, best_dir = qc, cand
                extra.append(cand)
                scale *= _REFINE_DECAY
            dirs.append(np.array(extra))
    all_dirs = np.vstack(dirs)

    proj = np.abs(samples @ all_dirs.T)
    upper = np.empty(len(u_grid))
    indices = np.empty(len(u_grid), dtype=int)
    for i, u in enumerate(u_grid):
        fracs = (proj >= u).mean(axis=0)
        indices[i] = int(np.argmin(fracs))
        upper[i] = float(fracs[indices[i]])

    if ratios is None:
        ratios = moment_ratios(samples, p=p, budget=budget, rng=rng)
    lower = np.array([paley_zygmund_lower(ratios, u).value for u in u_grid])

    return SmallBallCurve(
        u_grid=u_grid,
        upper=upper,
        lower=lower,
        argmin_dirs=all_dirs[indices],
        dir_indices=indices,
        sample_size=samples.shape[0],
    )

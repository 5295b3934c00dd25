"""Instrumentation for the empirical-process machinery behind the floors.

Contents:

- the piecewise-linear truncation phi_u squeezed between the indicators of
  {t >= u} and {t >= 2u}, Lipschitz with constant 1/u;
- the exact layered-integral identity P_N f^2 = 2 int_0^inf u P_N{|f|>u} du;
- the dyadic level decomposition (truncation level, per-level tail bounds);
- net-based deviation estimates for the dyadic superlevel classes;
- the four-term VC deviation formula;
- a brute-force VC shattering checker at tiny dimension;
- an exhaustive tiny-instance oracle that enumerates every sample tuple and
  every sign vector of a finite probability space, with exact rational
  probability arithmetic, and compares the exact success probability of the
  small-ball floor event against its predicted bound.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.optimize import linprog

from .errors import BudgetExceededError, InvalidInputError, InvalidParameterError
from .rademacher import _all_sign_vectors
from .streams import as_generator

# ---------------------------------------------------------------------------
# truncation function and exact identities
# ---------------------------------------------------------------------------


def truncation_phi(u: float, t) -> float | np.ndarray:
    """Ramp from 0 at t <= u to 1 at t >= 2u: clip(t/u - 1, 0, 1).

    Accepts scalar or array t >= 0; u must be > 0.
    """
    if u <= 0:
        raise InvalidParameterError(f"u must be > 0, got {u}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise InvalidParameterError("t must be >= 0")
    out = np.clip(t_arr / u - 1.0, 0.0, 1.0)
    return float(out) if np.isscalar(t) else out


def second_moment_identity(values) -> tuple[float, float, float]:
    """Mean of squares vs the exact layered integral 2 int u P_N{|v|>u} du.

    The integral is computed piecewise over the sorted magnitudes (the
    empirical tail is a step function), giving an independent path to the same
    quantity; returns (lhs, rhs, gap).
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInputError(f"values must be a nonempty 1-D array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("values must be finite")
    lhs = float((v**2).mean())
    mags = np.sort(np.abs(v))
    N = len(mags)
    edges = np.concatenate([[0.0], mags])
    # On (edges[k], edges[k+1]) exactly N-k values exceed u.
    counts = N - np.arange(N)
    rhs = float((counts * (edges[1:] ** 2 - edges[:-1] ** 2)).sum() / N)
    return lhs, rhs, abs(lhs - rhs)


def tail_integral(tail: Callable[[float], float], a_trunc: float) -> float:
    """Quadrature of 2 int_A^inf u P{|f| > u} du (relative error <= 1e-8).

    Returns inf when the integrand fails to decay faster than 1/u (tail
    exponent <= 2), the divergent case.
    """
    if a_trunc <= 0:
        raise InvalidParameterError(f"a_trunc must be > 0, got {a_trunc}")
    t2, t4 = tail(2.0 * a_trunc), tail(4.0 * a_trunc)
    if t2 > 0 and t4 > 0:
        local_exp = math.log(t2 / t4) / math.log(2.0)
        if local_exp <= 2.0 + 1e-9:
            return math.inf
    val, _ = integrate.quad(
        lambda u: 2.0 * u * tail(u), a_trunc, np.inf, epsabs=1e-14, epsrel=1e-10, limit=400
    )
    return float(val)


# ---------------------------------------------------------------------------
# dyadic decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DyadicDecomposition:
    """Truncation level and per-level tail bounds for a (eta, L) profile.

    ``a_trunc`` = max((L/(eta*delta))^(1/eta), 1); ``j0`` is the smallest
    integer with 2^j0 >= a_trunc; ``sigma_bounds[j-1]`` bounds the squared
    level-j supremum sup_f P{|f| >= 2^j} by L 2^(-j(2+eta)) for j = 1..j0.
    """

    eta: float
    L: float
    delta: float
    a_trunc: float
    j0: int
    sigma_bounds: tuple

    @classmethod
    def from_profile(cls, eta: float, L: float, delta: float) -> "DyadicDecomposition":
        if eta <= 0:
            raise InvalidParameterError(f"eta must be > 0, got {eta}")
        if L < 1:
            raise InvalidParameterError(f"L must be >= 1, got {L}")
        if delta <= 0:
            raise InvalidParameterError(f"delta must be > 0, got {delta}")
        a = max((L / (eta * delta)) ** (1.0 / eta), 1.0)
        j0 = 0
        while 2.0**j0 < a:
            j0 += 1
        sig = tuple(L * 2.0 ** (-j * (2.0 + eta)) for j in range(1, j0 + 1))
        return cls(eta=eta, L=L, delta=delta, a_trunc=a, j0=j0, sigma_bounds=sig)

    @property
    def levels(self) -> range:
        return range(0, self.j0 + 1)


@dataclass(frozen=True)
class DyadicDeviation:
    """Net-based lower estimate of a level's class deviation sup.

    The max runs over a finite direction net and threshold grid inside the
    level, both subsets of the class, so the true supremum can only be larger.
    ``reference`` records whether reference probabilities were analytic or an
    independent sample.
    """

    value: float
    level: int
    n_directions: int
    n_thresholds: int
    reference: str


def dyadic_sup_dev(
    samples: np.ndarray,
    level: int,
    directions: np.ndarray,
    reference: Callable[[float], float] | np.ndarray,
    n_thresholds: int = 9,
) -> DyadicDeviation:
    """Max over the net and a level-j threshold grid of |P_N - P|{|<X,t>| > u}.

    Level 0 covers thresholds in (0, 1]; level j >= 1 covers [2^j, 2^(j+1)].
    ``reference`` is either an analytic tail (direction-independent) or an
    independent reference sample array.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise InvalidInputError("samples must be a nonempty 2-D array")
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if level < 0:
        raise InvalidParameterError(f"level must be >= 0, got {level}")
    if level == 0:
        us = np.linspace(1.0 / n_thresholds, 1.0, n_thresholds)
    else:
        us = np.linspace(2.0**level, 2.0 ** (level + 1), n_thresholds)

    proj = np.abs(samples @ directions.T)  # (M, K)
    emp = np.stack([(proj > u).mean(axis=0) for u in us])  # (n_u, K)
    if callable(reference):
        ref = np.array([reference(u) for u in us])[:, None]
        kind = "analytic"
    else:
        ref_samples = np.asarray(reference, dtype=float)
        rproj = np.abs(ref_samples @ directions.T)
        ref = np.stack([(rproj > u).mean(axis=0) for u in us])
        kind = "sample"
    value = float(np.max(np.abs(emp - ref)))
    return DyadicDeviation(
        value=value,
        level=level,
        n_directions=directions.shape[0],
        n_thresholds=n_thresholds,
        reference=kind,
    )


def vc_deviation_bound(sigma: float, d: float, N: int, t: float, kappa: float = 1.0) -> float:
    """Four-term class-deviation bound at class weakness sigma and VC dim d:

    kappa (sigma sqrt(d/N log(e/sigma)) + d/N log(e/sigma)
           + sigma sqrt(t/N) + t/N).
    """
    if not (0 < sigma <= 1):
        raise InvalidParameterError(f"sigma must be in (0, 1], got {sigma}")
    if d < 1 or N < 1:
        raise InvalidParameterError(f"need d >= 1 and N >= 1, got d={d}, N={N}")
    if t <= 0:
        raise InvalidParameterError(f"t must be > 0, got {t}")
    if kappa <= 0:
        raise InvalidParameterError(f"kappa must be > 0, got {kappa}")
    log_term = math.log(math.e / sigma)
    return kappa * (
        sigma * math.sqrt(d / N * log_term)
        + d / N * log_term
        + sigma * math.sqrt(t / N)
        + t / N
    )


# ---------------------------------------------------------------------------
# brute-force VC dimension
# ---------------------------------------------------------------------------

_VC_MAX_POINTS = 25
_VC_MAX_DIM = 3


def _halfspace_separable(inside: np.ndarray, outside: np.ndarray) -> bool:
    """Exact strict linear separability via an LP feasibility problem.

    Scale invariance turns strict separation into margin-1 feasibility:
    w.x + b >= 1 on one side, <= -1 on the other.
    """
    if inside.size == 0 or outside.size == 0:
        return True  # a far-away halfspace realizes the empty/full dichotomy
    dim = inside.shape[1]
    # variables: (w_1..w_dim, b); constraints as A_ub z <= b_ub
    a_in = -np.hstack([inside, np.ones((len(inside), 1))])
    a_out = np.hstack([outside, np.ones((len(outside), 1))])
    A = np.vstack([a_in, a_out])
    b = -np.ones(len(A))
    res = linprog(
        c=np.zeros(dim + 1),
        A_ub=A,
        b_ub=b,
        bounds=[(None, None)] * (dim + 1),
        method="highs",
    )
    return res.status == 0


def _abs_threshold_realizable(inside_mags: np.ndarray, outside_mags: np.ndarray) -> bool:
    """Feasibility of {|x| > s} picking exactly the inside points (s > 0)."""
    if inside_mags.size == 0:
        return True  # s above every magnitude
    lo = float(outside_mags.max()) if outside_mags.size else 0.0
    hi = float(inside_mags.min())
    return lo < hi and hi > 0


_ABS_NET_SIZE = 64


def _abs_threshold_net(dim: int) -> np.ndarray:
    """Deterministic direction net for the slab-complement class in R^2/R^3."""
    if dim == 2:
        angles = np.pi * np.arange(_ABS_NET_SIZE) / _ABS_NET_SIZE
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    # Fibonacci hemisphere
    k = np.arange(_ABS_NET_SIZE * 4)
    z = (k + 0.5) / (_ABS_NET_SIZE * 4)
    phi = k * math.pi * (3.0 - math.sqrt(5.0))
    r = np.sqrt(1 - z**2)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _dichotomy_realizable(points: np.ndarray, mask: np.ndarray, klass: str) -> bool:
    if klass == "halfspaces":
        return _halfspace_separable(points[mask], points[~mask])
    # abs-threshold: {x : |<t, x>| > u}; exact in 1-D, direction net above.
    dim = points.shape[1]
    if dim == 1:
        mags = np.abs(points[:, 0])
        return _abs_threshold_realizable(mags[mask], mags[~mask])
    for t in _abs_threshold_net(dim):
        mags = np.abs(points @ t)
        if _abs_threshold_realizable(mags[mask], mags[~mask]):
            return True
    return False


def _is_shattered(points: np.ndarray, klass: str) -> bool:
    k = len(points)
    # Halfspaces are complement-closed, so only dichotomies containing point 0
    # need testing.
    n_masks = 1 << (k - 1) if klass == "halfspaces" else 1 << k
    offset = 1 << (k - 1) if klass == "halfspaces" else 0
    for code in range(n_masks):
        bits = (code + offset) if klass == "halfspaces" else code
        mask = np.array([(bits >> i) & 1 == 1 for i in range(k)])
        if not _dichotomy_realizable(points, mask, klass):
            return False
    return True


def vc_bruteforce(points, klass: str = "halfspaces") -> int:
    """Largest subset size shattered by the class, by dichotomy enumeration.

    ``klass`` is "halfspaces" (exact LP separability checks, dim <= 3) or
    "abs-threshold" ({x : |<t, x>| > u}; exact in 1-D, direction-net based in
    dim 2-3 where the result is a lower estimate).  Capped at 25 points.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidInputError("points must be a nonempty 2-D array")
    m, dim = pts.shape
    if klass not in ("halfspaces", "abs-threshold"):
        raise InvalidParameterError(f"unknown class {klass!r}")
    if m > _VC_MAX_POINTS or dim > _VC_MAX_DIM:
        raise BudgetExceededError(
            f"enumeration capped at {_VC_MAX_POINTS} points in dim <= {_VC_MAX_DIM}, "
            f"got {m} points in dim {dim}"
        )
    best = 0
    for k in range(1, m + 1):
        found = False
        for subset in itertools.combinations(range(m), k):
            if _is_shattered(pts[list(subset)], klass):
                found = True
                break
        if not found:
            break
        best = k
    return best


# ---------------------------------------------------------------------------
# exact tiny-instance oracle
# ---------------------------------------------------------------------------

_ORACLE_MAX_ATOMS = 6
_ORACLE_MAX_FUNCTIONS = 4
_ORACLE_MAX_N = 10
_ORACLE_BUDGET = 1 << 26  # tuples x sign vectors


@dataclass(frozen=True)
class FiniteInstance:
    """A finite probability space with exact rational atom weights.

    ``probs`` are Fractions summing to 1 exactly (<= 6 atoms); ``functions``
    are real-valued functions given by their values on the atoms (<= 4);
    ``N`` <= 10 is the sample size enumerated by the oracle.
    """

    probs: tuple
    functions: tuple
    N: int

    def __post_init__(self):
        if not (1 <= len(self.probs) <= _ORACLE_MAX_ATOMS):
            raise InvalidParameterError(f"need 1..{_ORACLE_MAX_ATOMS} atoms, got {len(self.probs)}")
        if not all(isinstance(p, Fraction) and p > 0 for p in self.probs):
            raise InvalidParameterError("probs must be positive Fractions")
        if sum(self.probs, Fraction(0)) != 1:
            raise InvalidParameterError(f"probs must sum to 1 exactly, got {sum(self.probs)}")
        if not (1 <= len(self.functions) <= _ORACLE_MAX_FUNCTIONS):
            raise InvalidParameterError(
                f"need 1..{_ORACLE_MAX_FUNCTIONS} functions, got {len(self.functions)}"
            )
        for f in self.functions:
            if len(f) != len(self.probs):
                raise InvalidParameterError("each function needs one value per atom")
        if not (1 <= self.N <= _ORACLE_MAX_N):
            raise InvalidParameterError(f"need 1 <= N <= {_ORACLE_MAX_N}, got {self.N}")

    def describe(self) -> dict:
        return {
            "probs": [str(p) for p in self.probs],
            "functions": [list(map(float, f)) for f in self.functions],
            "N": self.N,
        }


@dataclass(frozen=True)
class OracleReport:
    """Exact enumeration results for one instance at one tau."""

    instance: dict
    tau: float
    q2tau: Fraction
    r_n: float
    floor: float
    exact_prob: Fraction
    bound: float
    hypothesis_ok: bool
    verdict: str  # "holds" | "violated" | "not-applicable"

    def to_json_dict(self) -> dict:
        return {
            "instance": self.instance,
            "tau": self.tau,
            "q2tau": str(self.q2tau),
            "q2tau_float": float(self.q2tau),
            "r_n": self.r_n,
            "floor": self.floor,
            "exact_prob": str(self.exact_prob),
            "exact_prob_float": float(self.exact_prob),
            "bound": self.bound,
            "hypothesis_ok": self.hypothesis_ok,
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def tiny_smallball_oracle(inst: FiniteInstance, tau: float) -> OracleReport:
    """Exhaustive verification of the small-ball floor on a finite instance.

    Enumerates all |atoms|^N sample tuples with exact rational probabilities
    and all 2^N sign vectors, producing:

    - Q(2 tau): min over functions of the exact atom mass with |f| >= 2 tau;
    - the exact Rademacher average over tuples and sign vectors;
    - the exact probability of {min_f P_N f^2 >= tau^2 Q(2 tau)/2};
    - the predicted success bound 1 - 2 exp(-Q(2 tau)^2 N / 8);
    - a verdict: when the applicability condition R_N <= tau Q(2 tau)/16
      holds, exact probability >= bound must hold ("holds"/"violated"),
      otherwise "not-applicable".
    """
    if tau <= 0:
        raise InvalidParameterError(f"tau must be > 0, got {tau}")
    n_atoms = len(inst.probs)
    N = inst.N
    n_tuples = n_atoms**N
    if n_tuples * (1 << N) > _ORACLE_BUDGET:
        raise BudgetExceededError(
            f"{n_atoms}^{N} tuples x 2^{N} signs = {n_tuples * (1 << N)} "
            f"exceeds budget {_ORACLE_BUDGET}"
        )

    F = np.array([[float(v) for v in f] for f in inst.functions])  # (nf, n_atoms)

    # Q(2 tau) exactly.
    q2tau = Fraction(1)
    for fi in range(len(inst.functions)):
        mass = sum(
            (p for p, v in zip(inst.probs, F[fi]) if abs(v) >= 2.0 * tau), Fraction(0)
        )
        q2tau = min(q2tau, mass)
    floor = tau**2 * float(q2tau) / 2.0

    # All sample tuples as mixed-radix atom indices.
    T = (np.arange(n_tuples, dtype=np.int64)[:, None] // (n_atoms ** np.arange(N, dtype=np.int64))) % n_atoms

    # Exact tuple probabilities as integers over a common denominator D^N.
    denom = math.lcm(*(p.denominator for p in inst.probs))
    if denom ** N >= (1 << 62):
        raise BudgetExceededError(f"probability denominator {denom}^{N} too large for exact sums")
    weights = np.array([int(p * denom) for p in inst.probs], dtype=np.int64)
    tuple_num = np.prod(weights[T], axis=1, dtype=np.int64)  # sums to denom**N

    # Event {min_f P_N f^2 >= floor}.
    vals = F[:, T]  # (nf, n_tuples, N)
    pn_sq = (vals**2).mean(axis=2)  # (nf, n_tuples)
    success = np.all(pn_sq >= floor, axis=0)
    exact_prob = Fraction(int(tuple_num[success].sum()), denom**N)

    # Exact Rademacher average: E_tuple E_sign max_f |sum_i eps_i f(x_i)| / N.
    signs = _all_sign_vectors(N)  # (2^N, N)
    tuple_prob = tuple_num / float(denom**N)
    r_n = 0.0
    chunk = max(1, _ORACLE_BUDGET // (8 * (1 << N) * len(inst.functions)))
    for start in range(0, n_tuples, chunk):
        sl = slice(start, min(start + chunk, n_tuples))
        sup = None
        for fi in range(len(inst.functions)):
            a = np.abs(vals[fi, sl] @ signs.T)  # (chunk, 2^N)
            sup = a if sup is None else np.maximum(sup, a)
        r_n += float((tuple_prob[sl] * sup.mean(axis=1)).sum())
    r_n /= N

    hypothesis_ok = r_n <= tau * float(q2tau) / 16.0
    bound = 1.0 - 2.0 * math.exp(-float(q2tau) ** 2 * N / 8.0)
    if not hypothesis_ok:
        verdict = "not-applicable"
    else:
        verdict = "holds" if float(exact_prob) >= bound else "violated"
    return OracleReport(
        instance=inst.describe(),
        tau=tau,
        q2tau=q2tau,
        r_n=r_n,
        floor=floor,
        exact_prob=exact_prob,
        bound=bound,
        hypothesis_ok=hypothesis_ok,
        verdict=verdict,
    )


def random_instances(
    count: int,
    rng: np.random.Generator | int | None = None,
    max_atoms: int = 4,
    max_functions: int = 3,
    max_n: int = 8,
) -> list[tuple[FiniteInstance, float]]:
    """Randomized oracle battery: (instance, tau) pairs.

    Function values mix zeros, moderate, and large magnitudes so the battery
    exercises degenerate (applicable) and non-degenerate (gated) instances.
    """
    rng = as_generator(rng)
    out = []
    for _ in range(count):
        n_atoms = int(rng.integers(2, max_atoms + 1))
        n_funcs = int(rng.integers(1, max_functions + 1))
        N = int(rng.integers(2, max_n + 1))
        ints = rng.integers(1, 7, size=n_atoms)
        total = int(ints.sum())
        probs = tuple(Fraction(int(v), total) for v in ints)
        kind = rng.random()
        if kind < 0.15:
            funcs = tuple(tuple(0.0 for _ in range(n_atoms)) for _ in range(n_funcs))
        else:
            scale = 4.0 if kind < 0.5 else 0.8
            funcs = tuple(
                tuple(
                    float(np.round(rng.standard_normal() * scale, 3)) * int(rng.random() > 0.2)
                    for _ in range(n_atoms)
                )
                for _ in range(n_funcs)
            )
        tau = float(rng.choice([0.125, 0.25, 0.5, 1.0]))
        out.append((FiniteInstance(probs=probs, functions=funcs, N=N), tau))
    return out


def oracle_battery(
    instances: Sequence[tuple[FiniteInstance, float]],
) -> tuple[list[OracleReport], int, int]:
    """Run the oracle over a battery; returns (reports, n_applicable, n_violated)."""
    reports = [tiny_smallball_oracle(inst, tau) for inst, tau in instances]
    applicable = sum(1 for r in reports if r.hypothesis_ok)
    violated = sum(1 for r in reports if r.verdict == "violated")
    return reports, applicable, violated

"""Predicted floors on lambda_min and their failure probabilities.

Every theorem-shaped floor is evaluated with explicit, overridable constants
(all default to 1; the underlying results only prove existence).  Floors that
come out <= 0 are reported as-is with a "vacuous" flag -- only probabilities
clamp to [0, 1].  Calibration fits a multiplicative constant empirically at an
anchor and holds it fixed, which keeps the floors falsifiable on holdout grid
points.

Regimes over the tail surplus eta (aspect ratio beta = n/N):

- eta > 2:  floor 1 - c2 sqrt(beta),
            failure c0 log(e/beta) exp(-c1 N beta)
- eta = 2:  floor 1 - c4 sqrt(beta) log^(3/2)(1/beta),
            failure exp(-c3 N beta log(1/beta))
- eta < 2:  floor 1 - c6 (beta log(1/beta))^(eta/(2+eta)),
            failure exp(-c5 N beta log(1/beta))

plus the small-ball floor (tau^2 Q(2tau)/2 on the squared scale, no free
constants), the L1/L2-equivalence floor c2 a/B^2, and the generalized
small-ball floor c2 tau sqrt(Q(2tau)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .distributions import CovarianceBand
from .errors import CalibrationUnavailableError, InvalidParameterError

ETA_EQ_TOL = 1e-9

REGIMES = (
    "eta-gt-2",
    "eta-eq-2",
    "eta-lt-2",
    "basic-smallball",
    "isomorphic",
    "general-smallball",
)

_CONSTANT_NAMES = (
    "c0",
    "c1",
    "c2",
    "c3",
    "c4",
    "c5",
    "c6",
    "kappa",
    "iso_c0",
    "iso_c1",
    "iso_c2",
    "gen_c1",
    "gen_c2",
    "gen_c3",
)


@dataclass(frozen=True)
class ConstantSet:
    """Named positive constants with provenance ("default" or "calibrated")."""

    c0: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    c5: float = 1.0
    c6: float = 1.0
    kappa: float = 1.0
    iso_c0: float = 1.0
    iso_c1: float = 1.0
    iso_c2: float = 1.0
    gen_c1: float = 1.0
    gen_c2: float = 1.0
    gen_c3: float = 1.0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in _CONSTANT_NAMES:
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"constant {name} must be > 0")

    def value(self, name: str) -> float:
        if name not in _CONSTANT_NAMES:
            raise InvalidParameterError(f"unknown constant {name!r}")
        return getattr(self, name)

    def origin(self, name: str) -> str:
        return self.provenance.get(name, "default")

    def with_value(self, name: str, value: float, origin: str = "calibrated") -> "ConstantSet":
        if name not in _CONSTANT_NAMES:
            raise InvalidParameterError(f"unknown constant {name!r}")
        prov = dict(self.provenance)
        prov[name] = origin
        return replace(self, **{name: float(value), "provenance": prov})

    def to_config(self) -> dict[str, str]:
        return {name: repr(getattr(self, name)) for name in _CONSTANT_NAMES}

    @classmethod
    def from_config(cls, section: dict[str, str]) -> "ConstantSet":
        unknown = set(section) - set(_CONSTANT_NAMES)
        if unknown:
            raise InvalidParameterError(f"unknown constant keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in section.items()})


@dataclass(frozen=True)
class BoundPrediction:
    """A regime-tagged floor with its failure probability and gate status."""

    regime: str
    floor: float
    prob_failure: float
    constants: dict
    precondition_ok: bool
    precondition_detail: str
    flags: tuple = ()

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "floor": self.floor,
            "prob_failure": self.prob_failure,
            "constants": dict(self.constants),
            "precondition_ok": self.precondition_ok,
            "precondition_detail": self.precondition_detail,
            "flags": list(self.flags),
        }


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def regime_for_eta(eta: float) -> str:
    if eta <= 0:
        raise InvalidParameterError(f"eta must be > 0, got {eta}")
    if abs(eta - 2.0) <= ETA_EQ_TOL:
        return "eta-eq-2"
    return "eta-gt-2" if eta > 2.0 else "eta-lt-2"


def regime_rate(regime: str, beta: float, eta: float | None = None) -> float:
    """Theoretical deficit-rate function of beta for a tail regime.

    "power-law" is the raw beta scale used by generic scaling fits.
    """
    if not (0 < beta <= 1):
        raise InvalidParameterError(f"beta must be in (0, 1], got {beta}")
    if regime == "eta-gt-2":
        return math.sqrt(beta)
    if regime == "eta-eq-2":
        return math.sqrt(beta) * math.log(1.0 / beta) ** 1.5 if beta < 1 else 0.0
    if regime == "eta-lt-2":
        if eta is None or not (0 < eta < 2):
            raise InvalidParameterError(f"eta-lt-2 rate needs eta in (0, 2), got {eta}")
        return (beta * math.log(1.0 / beta)) ** (eta / (2.0 + eta)) if beta < 1 else 0.0
    if regime == "power-law":
        return beta
    raise InvalidParameterError(f"unknown rate regime {regime!r}")


def floor_regime(eta: float, L: float, beta: float, k: ConstantSet, N: int) -> BoundPrediction:
    """Tail-regime floor for the declared (eta, L) profile at aspect ratio beta.

    The regime is selected by eta (above/at/below 2, tolerance 1e-9).  N enters
    the failure probability only.  Vacuous floors (<= 0) are reported as-is
    with a flag; the boundary beta = 1 makes the log-rate regimes degenerate
    and is flagged too.
    """
    if not (0 < beta <= 1):
        raise InvalidParameterError(f"beta must be in (0, 1], got {beta}")
    if L < 1:
        raise InvalidParameterError(f"L must be >= 1, got {L}")
    if N < 1:
        raise InvalidParameterError(f"N must be >= 1, got {N}")
    regime = regime_for_eta(eta)
    flags: list[str] = []
    if regime == "eta-gt-2":
        floor = 1.0 - k.c2 * math.sqrt(beta)
        pfail = _clamp01(k.c0 * math.log(math.e / beta) * math.exp(-k.c1 * N * beta))
        constants = {"c0": k.c0, "c1": k.c1, "c2": k.c2}
    elif regime == "eta-eq-2":
        floor = 1.0 - k.c4 * regime_rate("eta-eq-2", beta)
        pfail = _clamp01(math.exp(-k.c3 * N * beta * math.log(1.0 / beta)) if beta < 1 else 1.0)
        constants = {"c3": k.c3, "c4": k.c4}
        if beta == 1.0:
            flags.append("degenerate-edge")
    else:
        floor = 1.0 - k.c6 * regime_rate("eta-lt-2", beta, eta)
        pfail = _clamp01(math.exp(-k.c5 * N * beta * math.log(1.0 / beta)) if beta < 1 else 1.0)
        constants = {"c5": k.c5, "c6": k.c6}
        if beta == 1.0:
            flags.append("degenerate-edge")
    if floor <= 0:
        flags.append("vacuous")
    return BoundPrediction(
        regime=regime,
        floor=floor,
        prob_failure=pfail,
        constants=constants,
        precondition_ok=True,
        precondition_detail=f"eta={eta}, L={L}, beta={beta}, N={N}",
        flags=tuple(flags),
    )


def basic_floor(tau: float, q2tau: float, r_n: float, N: int) -> BoundPrediction:
    """Small-ball floor tau^2 Q(2tau)/2 on the squared (lambda_min^2) scale.

    Applies when the Rademacher complexity satisfies r_n <= tau Q(2tau)/16;
    there are no free constants.  Failure probability 2 exp(-Q(2tau)^2 N / 8).
    """
    if tau <= 0:
        raise InvalidParameterError(f"tau must be > 0, got {tau}")
    if not (0 <= q2tau <= 1):
        raise InvalidParameterError(f"q2tau must be in [0, 1], got {q2tau}")
    if N < 1:
        raise InvalidParameterError(f"N must be >= 1, got {N}")
    threshold = tau * q2tau / 16.0
    ok = r_n <= threshold
    floor = tau**2 * q2tau / 2.0
    pfail = _clamp01(2.0 * math.exp(-(q2tau**2) * N / 8.0))
    flags = ["squared-scale"]
    if floor <= 0:
        flags.append("vacuous")
    return BoundPrediction(
        regime="basic-smallball",
        floor=floor,
        prob_failure=pfail,
        constants={},
        precondition_ok=ok,
        precondition_detail=f"r_n={r_n} vs tau*q2tau/16={threshold}",
        flags=tuple(flags),
    )


def isomorphic_floor(band: CovarianceBand, n: int, N: int, k: ConstantSet) -> BoundPrediction:
    """L1/L2-equivalence floor c2 a / B^2, gated on N >= c0 B^4 (A/a)^2 n.

    The failure probability uses the exponent exp(-c1 N / B^4).
    """
    if n < 1 or N < 1:
        raise InvalidParameterError(f"need n, N >= 1, got n={n}, N={N}")
    needed = k.iso_c0 * band.B**4 * (band.A / band.a) ** 2 * n
    ok = N >= needed
    floor = k.iso_c2 * band.a / band.B**2
    pfail = _clamp01(math.exp(-k.iso_c1 * N / band.B**4))
    return BoundPrediction(
        regime="isomorphic",
        floor=floor,
        prob_failure=pfail,
        constants={"iso_c0": k.iso_c0, "iso_c1": k.iso_c1, "iso_c2": k.iso_c2},
        precondition_ok=ok,
        precondition_detail=f"N={N} vs c0*B^4*(A/a)^2*n={needed:.6g}",
        flags=() if floor > 0 else ("vacuous",),
    )


def general_floor(
    tau: float, q2tau: float, A: float, n: int, N: int, k: ConstantSet
) -> BoundPrediction:
    """Generalized small-ball floor c2 tau sqrt(Q(2tau)).

    Needs only (E||X||^2)^(1/2) <= A sqrt(n) and Q(2tau) > 0; gated on
    N >= c1 A n / (tau^2 Q(2tau)^2).
    """
    if tau <= 0:
        raise InvalidParameterError(f"tau must be > 0, got {tau}")
    if not (0 <= q2tau <= 1):
        raise InvalidParameterError(f"q2tau must be in [0, 1], got {q2tau}")
    if A <= 0 or n < 1 or N < 1:
        raise InvalidParameterError(f"need A > 0, n >= 1, N >= 1; got A={A}, n={n}, N={N}")
    if q2tau == 0:
        needed = math.inf
    else:
        needed = k.gen_c1 * A * n / (tau**2 * q2tau**2)
    ok = N >= needed
    floor = k.gen_c2 * tau * math.sqrt(q2tau)
    pfail = _clamp01(2.0 * math.exp(-k.gen_c3 * N * q2tau**2))
    return BoundPrediction(
        regime="general-smallball",
        floor=floor,
        prob_failure=pfail,
        constants={"gen_c1": k.gen_c1, "gen_c2": k.gen_c2, "gen_c3": k.gen_c3},
        precondition_ok=ok,
        precondition_detail=f"N={N} vs c1*A*n/(tau^2 q^2)={needed:.6g}",
        flags=() if floor > 0 else ("vacuous",),
    )


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationResult:
    """Least-squares fit deficit ~ constant * rate(beta)^exponent."""

    regime: str
    constant: float
    exponent: float
    half_width: float
    n_rows: int


def _loglog_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Slope, intercept, and 2-stderr half-width of log(y) on log(x)."""
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = ly - (slope * lx + intercept)
    dof = len(x) - 2
    if dof > 0:
        s2 = float(resid @ resid) / dof
        sxx = float(((lx - lx.mean()) ** 2).sum())
        half = 2.0 * math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    else:
        half = math.inf
    return slope, intercept, half


def calibrate_constant(
    rows, regime: str, eta: float | None = None
) -> CalibrationResult:
    """Fit the multiplicative constant and exponent of deficit vs rate(beta).

    ``rows`` are (beta, deficit) pairs; rows with deficit <= 0 are dropped.
    ``regime`` picks the rate variable: the tail-regime rate functions, or
    "power-law" for the raw beta scale.  Requires >= 4 usable rows.
    """
    usable = [(b, d) for b, d in rows if d > 0]
    if len(usable) < 4:
        raise CalibrationUnavailableError(
            f"need >= 4 rows with positive deficit, got {len(usable)}"
        )
    beta = np.array([b for b, _ in usable])
    deficit = np.array([d for _, d in usable])
    rate = np.array([regime_rate(regime, b, eta) for b in beta])
    if np.any(rate <= 0):
        raise CalibrationUnavailableError("rate function vanishes on the grid (beta = 1 row?)")
    slope, intercept, half = _loglog_fit(rate, deficit)
    return CalibrationResult(
        regime=regime,
        constant=float(math.exp(intercept)),
        exponent=slope,
        half_width=half,
        n_rows=len(usable),
    )


def anchor_constant(deficit: float, beta: float, regime: str, eta: float | None = None) -> float:
    """Constant c with c * rate(beta) = deficit: single-point anchor calibration."""
    if deficit <= 0:
        raise CalibrationUnavailableError(f"anchor deficit must be > 0, got {deficit}")
    rate = regime_rate(regime, beta, eta)
    if rate <= 0:
        raise CalibrationUnavailableError(f"rate vanishes at anchor beta={beta}")
    return deficit / rate


_REGIME_CONSTANT = {"eta-gt-2": "c2", "eta-eq-2": "c4", "eta-lt-2": "c6"}


def apply_calibration(k: ConstantSet, regime: str, constant: float) -> ConstantSet:
    """Return constants with the regime's floor constant replaced (calibrated)."""
    if regime not in _REGIME_CONSTANT:
        raise InvalidParameterError(f"no floor constant associated with regime {regime!r}")
    return k.with_value(_REGIME_CONSTANT[regime], constant)

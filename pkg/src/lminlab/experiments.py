"""Beta-sweep harness: samplers -> spectra -> floors, with exponent fitting,
deterministic parallel trials, config parsing, and a one-command verify suite.

N is derived from the aspect ratio by N = ceil(n/beta) so n/N <= beta holds
exactly.  Every trial draws from the substream keyed by (master seed,
beta index, trial index); auxiliary per-beta estimates (small-ball summary,
Rademacher estimate) use trial indices >= trials so they never collide.
Aggregation is a sequential reduce in fixed index order, which makes sweep
output byte-identical regardless of worker count.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bd
from . import distributions as dist
from . import empirical_process as ep
from . import rademacher as rad
from . import smallball as sb
from . import spectrum as sp
from .errors import CalibrationUnavailableError, ConfigError, InvalidParameterError
from .streams import SeedRecord, substream_seed

ROWS_HEADER = ["family", "eta", "n", "N", "beta", "trial", "lambda_min", "lambda_max", "seed"]
SUMMARY_HEADER = [
    "family",
    "eta",
    "n",
    "beta",
    "median_lmin",
    "p05_lmin",
    "deficit",
    "floor_regime",
    "floor_value",
    "precondition_ok",
]

_Q_SUMMARY_U = 0.5
_Q_SUMMARY_SAMPLES = 2048
_Q_SUMMARY_BUDGET = 48
_RN_DRAWS = 256


@dataclass(frozen=True)
class OutputPaths:
    rows: str | None = None
    summary: str | None = None
    result: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    spec: dist.DistributionSpec
    beta_grid: tuple
    trials: int
    seed: int
    constants: bd.ConstantSet = field(default_factory=bd.ConstantSet)
    outputs: OutputPaths = field(default_factory=OutputPaths)

    def __post_init__(self):
        if len(self.beta_grid) == 0:
            raise InvalidParameterError("beta_grid must be nonempty")
        for b in self.beta_grid:
            if not (0 < b <= 1):
                raise InvalidParameterError(f"beta values must be in (0, 1], got {b}")
        if self.trials < 1:
            raise InvalidParameterError(f"trials must be >= 1, got {self.trials}")

    def sample_size(self, beta: float) -> int:
        return max(self.spec.n, math.ceil(self.spec.n / beta))


@dataclass(frozen=True)
class TrialRow:
    family: str
    eta: float | None
    n: int
    N: int
    beta: float
    trial: int
    lambda_min: float
    lambda_max: float
    seed: int


@dataclass(frozen=True)
class BetaSummary:
    family: str
    eta: float | None
    n: int
    N: int
    beta: float
    mean_lmin: float
    median_lmin: float
    p05_lmin: float
    deficit: float
    floor_regime: str
    floor_value: float
    precondition_ok: bool
    r_n_estimate: float
    q_at_half: float


@dataclass(frozen=True)
class FitResult:
    exponent: float
    constant: float
    half_width: float
    n_used: int
    n_excluded: int
    regime: str


@dataclass(frozen=True)
class SweepResult:
    config_seed: int
    rows: tuple
    summaries: tuple
    fit: FitResult | None
    failures: tuple

    def rows_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(ROWS_HEADER)
            for r in self.rows:
                w.writerow(
                    [
                        r.family,
                        "" if r.eta is None else repr(float(r.eta)),
                        r.n,
                        r.N,
                        repr(float(r.beta)),
                        r.trial,
                        repr(float(r.lambda_min)),
                        repr(float(r.lambda_max)),
                        r.seed,
                    ]
                )

    def summary_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_HEADER)
            for s in self.summaries:
                w.writerow(
                    [
                        s.family,
                        "" if s.eta is None else repr(float(s.eta)),
                        s.n,
                        repr(float(s.beta)),
                        repr(float(s.median_lmin)),
                        repr(float(s.p05_lmin)),
                        repr(float(s.deficit)),
                        s.floor_regime,
                        repr(float(s.floor_value)),
                        s.precondition_ok,
                    ]
                )

    def to_json_dict(self) -> dict:
        return {
            "seed": self.config_seed,
            "rows": [vars(r) for r in self.rows],
            "summaries": [vars(s) for s in self.summaries],
            "fit": None if self.fit is None else vars(self.fit),
            "failures": list(self.failures),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)


def _trial(cfg: ExperimentConfig, beta_index: int, trial_index: int):
    beta = cfg.beta_grid[beta_index]
    N = cfg.sample_size(beta)
    record = SeedRecord(cfg.seed, beta_index, trial_index)
    m = sp.assemble(cfg.spec, N, record)
    res = sp.lambda_extremes(m)
    return TrialRow(
        family=cfg.spec.family,
        eta=cfg.spec.eta,
        n=cfg.spec.n,
        N=N,
        beta=beta,
        trial=trial_index,
        lambda_min=res.lambda_min,
        lambda_max=res.lambda_max,
        seed=record.derived,
    )


def _regime_for_spec(spec: dist.DistributionSpec) -> tuple[str, float]:
    """Regime tag and the eta used for floors.

    Families without a declared polynomial tail (bounded or Gaussian
    marginals) satisfy every eta > 2 tail bound, so they report under the
    eta-gt-2 regime with eta = inf.
    """
    if spec.eta is not None:
        return bd.regime_for_eta(spec.eta), spec.eta
    return "eta-gt-2", math.inf


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> SweepResult:
    """Execute the sweep: trials (parallelizable), per-beta aggregation,
    floor predictions, and an exponent fit when enough grid points allow.

    A trial that raises is recorded in ``failures`` and excluded from
    aggregation; the sweep continues.
    """
    if threads < 1:
        raise InvalidParameterError(f"threads must be >= 1, got {threads}")
    tasks = [(b, t) for b in range(len(cfg.beta_grid)) for t in range(cfg.trials)]
    results: dict[tuple[int, int], TrialRow] = {}
    failures: list[str] = []

    def run_one(key):
        b, t = key
        try:
            return key, _trial(cfg, b, t), None
        except Exception as exc:  # noqa: BLE001 - per-trial isolation is the contract
            return key, None, f"beta_index={b} trial={t}: {exc!r}"

    if threads == 1:
        outcomes = map(run_one, tasks)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run_one, tasks))
    for key, row, err in outcomes:
        if err is None:
            results[key] = row
        else:
            failures.append(err)

    rows = tuple(results[k] for k in sorted(results))
    regime, eta_eff = _regime_for_spec(cfg.spec)
    tail = cfg.spec.tail
    L = tail.L if tail is not None else 1.0

    summaries = []
    for b, beta in enumerate(cfg.beta_grid):
        lmins = np.array([r.lambda_min for r in rows if r.beta == beta])
        if lmins.size == 0:
            continue
        N = cfg.sample_size(beta)
        median = float(np.median(lmins))
        pred = bd.floor_regime(eta_eff, L, beta, cfg.constants, N)
        q_rng = np.random.default_rng(substream_seed(cfg.seed, b, cfg.trials))
        q_sample = dist.sample_matrix(cfg.spec, _Q_SUMMARY_SAMPLES, q_rng)
        q_val, _ = sb.q_inf_search(q_sample, _Q_SUMMARY_U, _Q_SUMMARY_BUDGET, q_rng)
        rn_record = SeedRecord(cfg.seed, b, cfg.trials + 1)
        raw = sp.assemble(cfg.spec, N, rn_record).raw_rows()
        rn = rad.rademacher_linear(raw, draws=_RN_DRAWS, rng=rn_record.generator())
        summaries.append(
            BetaSummary(
                family=cfg.spec.family,
                eta=cfg.spec.eta,
                n=cfg.spec.n,
                N=N,
                beta=beta,
                mean_lmin=float(lmins.mean()),
                median_lmin=median,
                p05_lmin=float(np.quantile(lmins, 0.05)),
                deficit=1.0 - median,
                floor_regime=pred.regime,
                floor_value=pred.floor,
                precondition_ok=pred.precondition_ok,
                r_n_estimate=rn.value,
                q_at_half=q_val,
            )
        )

    fit = None
    fit_rows = [(s.beta, s.deficit) for s in summaries if s.deficit > 0]
    if len(fit_rows) >= 4:
        fit = fit_exponent(fit_rows, regime=regime)
    return SweepResult(
        config_seed=cfg.seed,
        rows=rows,
        summaries=tuple(summaries),
        fit=fit,
        failures=tuple(failures),
    )


def fit_exponent(rows, regime: str = "eta-gt-2") -> FitResult:
    """Least-squares scaling exponent of deficit vs the regime's rate variable.

    The rate variable is beta itself for the eta >= 2 regimes and
    beta*log(1/beta) below eta = 2 (where the predicted exponent is
    eta/(2+eta)).  Rows with nonpositive deficit are excluded (and counted);
    at least 4 usable rows are required.
    """
    usable = [(b, d) for b, d in rows if d > 0]
    excluded = len(list(rows)) - len(usable)
    if len(usable) < 4:
        raise CalibrationUnavailableError(f"need >= 4 rows with positive deficit, got {len(usable)}")
    if regime in ("eta-gt-2", "eta-eq-2"):
        xs = np.array([b for b, _ in usable])
    elif regime == "eta-lt-2":
        xs = np.array([b * math.log(1.0 / b) for b, _ in usable])
        if np.any(xs <= 0):
            raise CalibrationUnavailableError("rate variable vanishes on the grid (beta = 1 row?)")
    else:
        raise InvalidParameterError(f"unknown regime {regime!r}")
    ys = np.array([d for _, d in usable])
    slope, intercept, half = bd._loglog_fit(xs, ys)
    return FitResult(
        exponent=slope,
        constant=float(math.exp(intercept)),
        half_width=half,
        n_used=len(usable),
        n_excluded=excluded,
        regime=regime,
    )


# ---------------------------------------------------------------------------
# config file parsing
# ---------------------------------------------------------------------------

_SWEEP_KEYS = {"beta_grid", "trials", "seed"}
_OUTPUT_KEYS = {"rows", "summary", "result"}


def parse_config(path) -> ExperimentConfig:
    """Plain-text config: [distribution] and [sweep] sections required,
    [constants] and [outputs] optional.  Unknown sections or keys are
    rejected."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    known = {"distribution", "sweep", "constants", "outputs"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    if "distribution" not in parser or "sweep" not in parser:
        raise ConfigError("config requires [distribution] and [sweep] sections")

    try:
        spec = dist.spec_from_config(dict(parser["distribution"]))
    except (InvalidParameterError, ValueError) as exc:
        raise ConfigError(f"bad [distribution] section: {exc}") from exc

    sweep = dict(parser["sweep"])
    unknown = set(sweep) - _SWEEP_KEYS
    if unknown:
        raise ConfigError(f"unknown [sweep] keys: {sorted(unknown)}")
    missing = _SWEEP_KEYS - set(sweep)
    if missing:
        raise ConfigError(f"missing [sweep] keys: {sorted(missing)}")
    try:
        beta_grid = tuple(float(tok) for tok in sweep["beta_grid"].replace(",", " ").split())
        trials = int(sweep["trials"])
        seed = int(sweep["seed"])
    except ValueError as exc:
        raise ConfigError(f"bad [sweep] value: {exc}") from exc

    constants = bd.ConstantSet()
    if "constants" in parser:
        try:
            constants = bd.ConstantSet.from_config(dict(parser["constants"]))
        except (InvalidParameterError, ValueError) as exc:
            raise ConfigError(f"bad [constants] section: {exc}") from exc

    outputs = OutputPaths()
    if "outputs" in parser:
        out = dict(parser["outputs"])
        unknown = set(out) - _OUTPUT_KEYS
        if unknown:
            raise ConfigError(f"unknown [outputs] keys: {sorted(unknown)}")
        outputs = OutputPaths(**out)

    try:
        return ExperimentConfig(
            spec=spec, beta_grid=beta_grid, trials=trials, seed=seed, constants=constants, outputs=outputs
        )
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc


def write_config(cfg: ExperimentConfig, path) -> None:
    parser = configparser.ConfigParser()
    parser["distribution"] = dist.spec_to_config(cfg.spec)
    parser["sweep"] = {
        "beta_grid": " ".join(repr(float(b)) for b in cfg.beta_grid),
        "trials": str(cfg.trials),
        "seed": str(cfg.seed),
    }
    parser["constants"] = cfg.constants.to_config()
    out = {k: v for k, v in vars(cfg.outputs).items() if v is not None}
    if out:
        parser["outputs"] = out
    with open(path, "w") as fh:
        parser.write(fh)


# ---------------------------------------------------------------------------
# verification suite
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # "pass" | "fail" | "skipped"
    detail: str


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple
    budget: int

    @property
    def ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def to_json_dict(self) -> dict:
        return {
            "budget": self.budget,
            "ok": self.ok,
            "checks": [vars(c) for c in self.checks],
        }


def verify_suite(budget: int = 100, overrides: dict | None = None, seed: int = 20260809) -> VerifyReport:
    """One-command execution of the module invariants and oracles.

    ``budget`` scales the oracle battery and instance counts; checks whose
    minimum cost exceeds the budget are reported as "skipped".  ``overrides``
    swaps named operations for corrupted variants (mutation testing of the
    suite itself): supported keys "phi".
    """
    overrides = overrides or {}
    rng = np.random.default_rng(seed)
    checks: list[CheckResult] = []

    phi = overrides.get("phi", ep.truncation_phi)

    def add(name, ok, detail):
        checks.append(CheckResult(name, "pass" if ok else "fail", detail))

    # indicator sandwich and Lipschitz property of the truncation ramp
    us = np.linspace(0.05, 4.0, 25)
    ts = np.linspace(0.0, 10.0, 60)
    ok, worst = True, 0.0
    for u in us:
        for t in ts:
            val = phi(u, t)
            lo = 1.0 if t >= 2 * u else 0.0
            hi = 1.0 if t >= u else 0.0
            if not (lo <= val <= hi):
                ok = False
                worst = max(worst, max(lo - val, val - hi))
    add("phi-sandwich", ok, f"worst violation {worst:.3g}")
    ok = True
    for u in us[:10]:
        t1 = rng.uniform(0, 5, 40)
        t2 = rng.uniform(0, 5, 40)
        lhs = np.abs(np.array([phi(u, a) for a in t1]) - np.array([phi(u, a) for a in t2]))
        if np.any(lhs > np.abs(t1 - t2) / u + 1e-12):
            ok = False
    add("phi-lipschitz", ok, "|phi(t1)-phi(t2)| <= |t1-t2|/u on random pairs")

    n_ident = min(1000, max(10, 10 * budget))
    worst = 0.0
    for _ in range(n_ident):
        v = rng.standard_normal(int(rng.integers(1, 60))) * rng.uniform(0.1, 10)
        lhs, _, gap = ep.second_moment_identity(v)
        worst = max(worst, gap / max(lhs, 1e-300))
    add("second-moment-identity", worst <= 1e-12, f"worst relative gap {worst:.3g} over {n_ident}")

    spec = dist.DistributionSpec("gaussian-iid", 4)
    ratios = sb.moment_ratios(spec, p=2.0)
    ok = True
    details = []
    for u in (0.1, 0.2, 0.4):
        pz = sb.paley_zygmund_lower(ratios, u).value
        tail = dist.theoretical_tail(spec, u)
        details.append(f"u={u}: {pz:.4f} <= {tail:.4f}")
        if pz > tail:
            ok = False
    add("pz-sandwich-analytic", ok, "; ".join(details))

    n_spec = min(100, budget)
    if n_spec < 5:
        checks.append(CheckResult("spectral-cross-method", "skipped", f"budget {budget} < 5"))
    else:
        worst = 0.0
        for _ in range(n_spec):
            vals = rng.standard_normal((20, 10)) / np.sqrt(20)
            m = sp.SampleMatrix(20, 10, vals, SeedRecord(0))
            r = sp.lambda_extremes(m)
            p = sp.lambda_min_power(m)
            worst = max(worst, abs(p - r.lambda_min**2) / r.lambda_min**2)
        add("spectral-cross-method", worst <= 1e-8, f"worst relative gap {worst:.3g} over {n_spec}")

    if budget < 20:
        checks.append(CheckResult("rademacher-exact-vs-mc", "skipped", f"budget {budget} < 20"))
    else:
        ok, worst = True, 0.0
        for _ in range(20):
            rows = rng.standard_normal((10, 3))
            exact = rad.rademacher_linear(rows, method="exact")
            mc = rad.rademacher_linear(rows, draws=2000, rng=rng, method="mc")
            z = abs(mc.value - exact.value) / mc.stderr
            worst = max(worst, z)
            if z > 3:
                ok = False
        add("rademacher-exact-vs-mc", ok, f"worst |mc-exact|/stderr {worst:.2f}")

    if budget < 10:
        checks.append(CheckResult("tiny-oracle-battery", "skipped", f"budget {budget} < 10"))
    else:
        battery = ep.random_instances(budget, rng=rng)
        _, applicable, violated = ep.oracle_battery(battery)
        add(
            "tiny-oracle-battery",
            violated == 0,
            f"{budget} instances, {applicable} applicable, {violated} violated",
        )

    m_iso = 20000
    x = dist.sample_matrix(spec, m_iso, rng)
    cov = x.T @ x / m_iso
    dev = float(np.abs(cov - np.eye(4)).max())
    add("isotropy-quick", dev <= 5.0 / math.sqrt(m_iso), f"max covariance deviation {dev:.4f}")

    return VerifyReport(checks=tuple(checks), budget=budget)

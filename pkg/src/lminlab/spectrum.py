"""Row-normalized sample matrices and their extreme singular values.

The sample matrix stores rows X_i/sqrt(N).  Extremes are computed from the
n x n Gram matrix with a symmetric eigensolver; an independent inverse-power
path cross-validates the smallest eigenvalue.  At desk scale (n <= ~500) the
Gram route is the fast one and its squaring loss is irrelevant above ~1e-6.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .distributions import DistributionSpec, sample_matrix
from .errors import InvalidInputError, InvalidParameterError, NoConvergenceError
from .streams import SeedRecord

_MAGIC = b"SMAT"
_VERSION = 1


@dataclass(frozen=True)
class SampleMatrix:
    """N x n array of rows X_i/sqrt(N) with seed provenance."""

    N: int
    n: int
    values: np.ndarray
    seed: SeedRecord

    def __post_init__(self):
        if self.N < 1 or self.n < 1:
            raise InvalidParameterError(f"need N, n >= 1, got N={self.N}, n={self.n}")
        if self.values.shape != (self.N, self.n):
            raise InvalidInputError(f"values shape {self.values.shape} != ({self.N}, {self.n})")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("matrix entries must be finite")

    def raw_rows(self) -> np.ndarray:
        """The unnormalized sample rows X_i (values times sqrt(N))."""
        return self.values * np.sqrt(self.N)

    def save(self, path) -> None:
        """Binary layout: magic, u32 version, u64 N, u64 n, 3 x u64 seed
        fields (master, beta_index, trial_index), then row-major float64,
        all little-endian."""
        header = _MAGIC + struct.pack(
            "<IQQQQQ",
            _VERSION,
            self.N,
            self.n,
            self.seed.master,
            self.seed.beta_index,
            self.seed.trial_index,
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "SampleMatrix":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MAGIC:
                raise InvalidInputError(f"bad magic {magic!r}")
            version, N, n, master, bidx, tidx = struct.unpack("<IQQQQQ", fh.read(4 + 5 * 8))
            if version != _VERSION:
                raise InvalidInputError(f"unsupported version {version}")
            data = np.frombuffer(fh.read(N * n * 8), dtype="<f8").reshape(N, n)
        record = SeedRecord(master=master, beta_index=bidx, trial_index=tidx)
        return cls(N=int(N), n=int(n), values=data.astype(float), seed=record)


@dataclass(frozen=True)
class SpectralResult:
    """Extreme singular values with a backward-error estimate."""

    lambda_min: float
    lambda_max: float
    method: str
    residual: float


def assemble(
    spec: DistributionSpec,
    N: int,
    seed: int | SeedRecord,
    beta_index: int = 0,
    trial_index: int = 0,
) -> SampleMatrix:
    """Draw N independent rows and scale by 1/sqrt(N); deterministic in seed."""
    if N < 1:
        raise InvalidParameterError(f"N must be >= 1, got {N}")
    record = seed if isinstance(seed, SeedRecord) else SeedRecord(seed, beta_index, trial_index)
    rows = sample_matrix(spec, N, record.generator())
    return SampleMatrix(N=N, n=spec.n, values=rows / np.sqrt(N), seed=record)


def gram(m: SampleMatrix) -> np.ndarray:
    """Exact Gram matrix of the columns (symmetric to round-off)."""
    g = m.values.T @ m.values
    return (g + g.T) / 2.0


def lambda_extremes(m: SampleMatrix) -> SpectralResult:
    """Extreme singular values via the symmetric eigenproblem of the Gram.

    For N < n the matrix is rank deficient and lambda_min is reported as
    exactly 0.  The residual is max ||G v - mu v|| over the two extreme
    eigenpairs, scaled by lambda_max (machine-level for a healthy solve).
    """
    g = gram(m)
    vals, vecs = np.linalg.eigh(g)
    lam_max = float(np.sqrt(max(vals[-1], 0.0)))
    if m.N < m.n:
        lam_min = 0.0
    else:
        lam_min = float(np.sqrt(max(vals[0], 0.0)))
    res = 0.0
    for idx in (0, len(vals) - 1):
        v = vecs[:, idx]
        res = max(res, float(np.linalg.norm(g @ v - vals[idx] * v)))
    scale = lam_max if lam_max > 0 else 1.0
    return SpectralResult(lambda_min=lam_min, lambda_max=lam_max, method="sym-eig", residual=res / scale)


def lambda_min_power(
    m: SampleMatrix,
    shift: float = 0.0,
    tol: float = 1e-13,
    max_iter: int = 20000,
) -> float:
    """Smallest eigenvalue of the Gram matrix by shifted inverse iteration.

    Independent validation path for ``lambda_extremes`` (compare against
    lambda_min**2).  Fixed-shift iteration runs until the Rayleigh quotient
    stabilizes, then two Rayleigh-quotient steps polish the estimate.  Raises
    ``NoConvergenceError`` with diagnostics at the iteration cap.
    """
    g = gram(m)
    n = g.shape[0]
    ident = np.eye(n)
    try:
        lu = sla.lu_factor(g - shift * ident)
    except ValueError as exc:
        raise InvalidInputError(f"gram - shift*I not factorizable: {exc}") from exc
    # Deterministic start vector with a ramp so it is not an eigenvector of
    # structured test matrices.
    v = np.ones(n) + np.linspace(0.0, 0.5, n)
    v /= np.linalg.norm(v)
    est = float("inf")
    for it in range(1, max_iter + 1):
        w = sla.lu_solve(lu, v)
        norm_w = np.linalg.norm(w)
        if not np.isfinite(norm_w) or norm_w == 0.0:
            if not np.isfinite(est):
                raise InvalidInputError("gram - shift*I is numerically singular")
            break  # solve blew up: v is numerically the eigenvector already
        v = w / norm_w
        new_est = float(v @ g @ v)
        if abs(new_est - est) <= tol * max(1.0, abs(new_est)):
            est = new_est
            break
        est = new_est
    else:
        raise NoConvergenceError("inverse power iteration did not converge", max_iter, est)
    # Rayleigh-quotient polish (cubic); a singular factorization here means
    # the estimate is already at an eigenvalue.
    for _ in range(2):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu2 = sla.lu_factor(g - est * ident)
                w = sla.lu_solve(lu2, v)
        except (ValueError, sla.LinAlgError):
            break
        norm_w = np.linalg.norm(w)
        if not np.isfinite(norm_w) or norm_w == 0.0:
            break
        v = w / norm_w
        est = float(v @ g @ v)
    return est

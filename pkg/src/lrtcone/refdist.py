"""Reference distributions for likelihood ratio statistics.

Provides the classical chi-square CDF, the mixture law w^2 1{w >= 0} that
appears when a variance component sits on the boundary, and Monte Carlo
samples of the cone-projection limit laws:

* ``sample_cone_projection_law``: the law of
  min over tau in T0 of || Z - I^(1/2) tau ||^2, the limit of the LRT of a
  submodel against the saturated model.  When T0 is a linear subspace this
  is exactly chi-square with ambient-minus-cone degrees of freedom.
* ``sample_nested_cone_law``: the law of the paired difference of two such
  minima over nested cones, the limit of the LRT between two submodels.
  Both minima are evaluated on the same draw of Z.

Draw i always uses the RNG stream keyed by (seed, "refdist", i), so results
are identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, ndtr

from .cones import ConeMinConfig, ConeProjector, mixture_chi2_reduction
from .fisher import InfoMatrix, sqrt_psd
from .seeding import child_rng

NEGATIVE_DRAW_TOL = 1e-6


class SingularInfoError(ValueError):
    """Information matrix is numerically singular; the cone-projection law
    for a saturated ambient model requires an invertible information."""


class NegativeDrawError(RuntimeError):
    """A nested-cone draw came out negative beyond tolerance, which means
    the alternative-cone minimizer failed to beat the null-cone minimum."""


@dataclass(frozen=True)
class EmpiricalCDF:
    """Sorted sample of scalar statistics with CDF and quantile queries."""

    values: np.ndarray
    n: int

    @classmethod
    def from_samples(cls, draws: np.ndarray) -> "EmpiricalCDF":
        draws = np.asarray(draws, dtype=float)
        return cls(values=np.sort(draws), n=draws.shape[0])

    def cdf(self, x) -> np.ndarray | float:
        """Fraction of the sample at or below x."""
        result = np.searchsorted(self.values, x, side="right") / self.n
        return float(result) if np.isscalar(x) else result

    def survival(self, x) -> np.ndarray | float:
        """Fraction of the sample at or above x (inclusive, for p-values)."""
        result = 1.0 - np.searchsorted(self.values, x, side="left") / self.n
        return float(result) if np.isscalar(x) else result

    def quantile(self, p: float) -> float:
        """Smallest sample value whose CDF reaches p."""
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        steps = np.arange(1, self.n + 1) / self.n
        index = int(np.searchsorted(steps, p, side="left"))
        return float(self.values[min(index, self.n - 1)])

    def to_csv(self, path) -> None:
        steps = np.arange(1, self.n + 1) / self.n
        with open(path, "w") as handle:
            handle.write("value,cdf\n")
            for value, step in zip(self.values, steps):
                handle.write(f"{float(value)!r},{float(step)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "EmpiricalCDF":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(values=np.sort(data[:, 0]), n=data.shape[0])


def chi2_cdf(df: float, x) -> np.ndarray | float:
    """Chi-square CDF via the regularized lower incomplete gamma function."""
    x = np.asarray(x, dtype=float)
    result = np.where(x > 0, gammainc(df / 2.0, np.maximum(x, 0.0) / 2.0), 0.0)
    return float(result) if result.ndim == 0 else result


def chi2_sf(df: float, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    result = 1.0 - chi2_cdf(df, x)
    return float(result) if np.isscalar(result) or np.ndim(result) == 0 else result


def mixture_chi2_cdf(x) -> np.ndarray | float:
    """CDF of w^2 1{w >= 0} with w standard normal: half mass at zero, then a
    half chi-square(1) tail; equals Phi(sqrt(x)) for x >= 0."""
    x = np.asarray(x, dtype=float)
    result = np.where(x < 0, 0.0, ndtr(np.sqrt(np.maximum(x, 0.0))))
    return float(result) if result.ndim == 0 else result


def mixture_chi2_survival(x) -> np.ndarray | float:
    """P(W >= x) for the mixture law, inclusive of the point mass at zero."""
    x = np.asarray(x, dtype=float)
    result = np.where(x <= 0, 1.0, 1.0 - mixture_chi2_cdf(x))
    return float(result) if result.ndim == 0 else result


def ks_distance(empirical: EmpiricalCDF, reference) -> float:
    """Sup-norm distance between an empirical CDF and a reference CDF.

    The reference may be a callable CDF or another EmpiricalCDF.  The sup is
    taken over the step points of the empirical CDF, comparing right values
    at each step and left limits just below it, so references with atoms
    (the mixture law's mass at zero, other empirical CDFs) are handled
    exactly.
    """
    ref_cdf = reference.cdf if isinstance(reference, EmpiricalCDF) else reference
    points = np.unique(empirical.values)
    emp_right = np.searchsorted(empirical.values, points, side="right") / empirical.n
    emp_left = np.searchsorted(empirical.values, points, side="left") / empirical.n
    ref_right = np.asarray(ref_cdf(points), dtype=float)
    ref_left = np.asarray(ref_cdf(np.nextafter(points, -np.inf)), dtype=float)
    gap_right = np.abs(emp_right - ref_right)
    gap_left = np.abs(emp_left - ref_left)
    return float(max(gap_right.max(), gap_left.max()))


# --------------------------------------------------------------------------
# Monte Carlo cone-projection laws
# --------------------------------------------------------------------------


def _require_invertible(info: InfoMatrix) -> None:
    if info.eigenvalues[0] <= 1e-8 * info.eigenvalues[-1]:
        raise SingularInfoError(
            f"information eigenvalue ratio {info.eigen_ratio():.3e} is below 1e-8"
        )


def _chunk_ranges(n: int, n_workers: int) -> list[tuple[int, int]]:
    # Fixed-size chunks: batch shapes must not depend on the worker count,
    # or BLAS blocking could perturb low-order bits across runs.  128 draws
    # also keeps the batched minimizer's working set modest.
    size = 128
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _draws_and_rngs(k: int, seed: int, lo: int, hi: int):
    rngs = [child_rng(seed, "refdist", i) for i in range(lo, hi)]
    z_rows = np.stack([rng.standard_normal(k) for rng in rngs])
    return z_rows, rngs


def _single_cone_chunk(args) -> np.ndarray:
    projector, k, seed, lo, hi, min_config = args
    z_rows, rngs = _draws_and_rngs(k, seed, lo, hi)
    return projector.minimize_many(z_rows, rngs, min_config)


def _nested_cone_chunk(args) -> np.ndarray:
    proj_null, proj_alt, k, seed, lo, hi, min_config = args
    z_rows, rngs = _draws_and_rngs(k, seed, lo, hi)
    val_null = proj_null.minimize_many(z_rows, rngs, min_config)
    val_alt = proj_alt.minimize_many(z_rows, rngs, min_config)
    return val_null - val_alt


def _mixture_chunk(args) -> np.ndarray:
    direction, k, seed, lo, hi = args
    z_rows, _ = _draws_and_rngs(k, seed, lo, hi)
    w = z_rows @ direction
    return np.where(w >= 0, w * w, 0.0)


def _run_chunks(worker, payloads, n_workers: int) -> np.ndarray:
    if n_workers <= 1 or len(payloads) <= 1:
        parts = [worker(payload) for payload in payloads]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(worker, payloads))
    return np.concatenate(parts)


def sample_cone_projection_law(
    cone,
    info: InfoMatrix,
    n_draws: int = 10_000,
    seed: int = 0,
    n_workers: int = 1,
    min_config: ConeMinConfig | None = None,
) -> EmpiricalCDF:
    """Monte Carlo law of the squared distance from Z to the weighted cone.

    Z is k-variate standard normal and the cone is weighted by the symmetric
    square root of the information.  For a linear subspace of dimension m
    the law is chi-square with k - m degrees of freedom.
    """
    _require_invertible(info)
    isqrt = sqrt_psd(info)
    projector = ConeProjector(cone, isqrt)
    k = info.dim
    payloads = [
        (projector, k, seed, lo, hi, min_config)
        for lo, hi in _chunk_ranges(n_draws, n_workers)
    ]
    draws = _run_chunks(_single_cone_chunk, payloads, n_workers)
    return EmpiricalCDF.from_samples(draws)


def sample_nested_cone_law(
    cone_null,
    cone_alt,
    info: InfoMatrix,
    n_draws: int = 10_000,
    seed: int = 0,
    n_workers: int = 1,
    min_config: ConeMinConfig | None = None,
) -> EmpiricalCDF:
    """Monte Carlo law of the paired projection gap over nested cones.

    Each draw evaluates both minima on the same Z.  When the pair is a
    linear subspace plus the same-basis half-space cone, the draw reduces
    analytically to w^2 1{w >= 0} along the ray's orthogonalized direction
    and the optimizer is bypassed.
    """
    _require_invertible(info)
    isqrt = sqrt_psd(info)
    k = info.dim
    if mixture_chi2_reduction(cone_null, cone_alt) is not None:
        mapped_linear = isqrt @ cone_alt.linear_basis
        mapped_ray = isqrt @ cone_alt.ray
        q, _ = np.linalg.qr(mapped_linear)
        perp = mapped_ray - q @ (q.T @ mapped_ray)
        direction = perp / np.linalg.norm(perp)
        payloads = [
            (direction, k, seed, lo, hi)
            for lo, hi in _chunk_ranges(n_draws, n_workers)
        ]
        draws = _run_chunks(_mixture_chunk, payloads, n_workers)
        return EmpiricalCDF.from_samples(draws)
    proj_null = ConeProjector(cone_null, isqrt)
    proj_alt = ConeProjector(cone_alt, isqrt)
    payloads = [
        (proj_null, proj_alt, k, seed, lo, hi, min_config)
        for lo, hi in _chunk_ranges(n_draws, n_workers)
    ]
    draws = _run_chunks(_nested_cone_chunk, payloads, n_workers)
    if draws.min() < -NEGATIVE_DRAW_TOL:
        raise NegativeDrawError(
            f"nested-cone draw {draws.min()} is negative beyond tolerance"
        )
    return EmpiricalCDF.from_samples(np.maximum(draws, 0.0))

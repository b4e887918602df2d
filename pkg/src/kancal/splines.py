"""Uniform B-spline bases on a bounded grid.

The grid covers ``[grid_min, grid_max]`` with ``grid_size`` equal intervals
and is extended ``degree`` knot steps past each end, giving every in-range
point full basis support (the basis values sum to one everywhere on the
grid).  Inputs outside the grid are clamped to its ends before evaluation;
callers that need tail behaviour must provide it separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SplineSpec:
    """Geometry of one spline family: grid range, interval count, degree."""

    grid_min: float
    grid_max: float
    grid_size: int
    degree: int

    def __post_init__(self):
        if not (np.isfinite(self.grid_min) and np.isfinite(self.grid_max)):
            raise ValueError("grid bounds must be finite")
        if self.grid_min >= self.grid_max:
            raise ValueError(
                f"grid_min must be < grid_max, got [{self.grid_min}, {self.grid_max}]"
            )
        if self.grid_size < 1:
            raise ValueError(f"grid_size must be >= 1, got {self.grid_size}")
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")

    @property
    def num_basis(self) -> int:
        """Number of basis functions: grid_size + degree."""
        return self.grid_size + self.degree

    @property
    def step(self) -> float:
        return (self.grid_max - self.grid_min) / self.grid_size


def build_knots(spec: SplineSpec) -> np.ndarray:
    """Uniform knot vector with ``degree`` extra steps beyond each grid end.

    Length is grid_size + 2*degree + 1; spacing is spec.step throughout.
    """
    d, g = spec.degree, spec.grid_size
    return spec.grid_min + spec.step * np.arange(-d, g + d + 1, dtype=np.float64)


def _check_knots(knots: np.ndarray, degree: int) -> None:
    if knots.ndim != 1 or len(knots) < 2 * degree + 2:
        raise ValueError(
            f"knot vector too short for degree {degree}: {len(knots)} knots"
        )


def _interval_one_hot(knots: np.ndarray, degree: int, x: np.ndarray) -> np.ndarray:
    """Degree-0 indicators for clamped inputs, shape (n, len(knots)-1).

    The containing interval is clipped into [degree, len(knots)-2-degree] so
    that x == grid_max lands in the last in-range interval (right-closed
    convention); elsewhere intervals are half-open [t_i, t_{i+1}).
    """
    span = np.searchsorted(knots, x, side="right") - 1
    span = np.clip(span, degree, len(knots) - 2 - degree)
    out = np.zeros((x.shape[0], len(knots) - 1))
    out[np.arange(x.shape[0]), span] = 1.0
    return out


def _raise_degree(knots: np.ndarray, bases: np.ndarray, x: np.ndarray,
                  up_to: int) -> np.ndarray:
    """Run the two-term recurrence from degree-0 indicators up to ``up_to``."""
    for k in range(1, up_to + 1):
        left = (x[:, None] - knots[None, :-k - 1]) / (knots[k:-1] - knots[:-k - 1])
        right = (knots[None, k + 1:] - x[:, None]) / (knots[k + 1:] - knots[1:-k])
        bases = left * bases[:, :-1] + right * bases[:, 1:]
    return bases


def _clamp(knots: np.ndarray, degree: int, x: np.ndarray) -> np.ndarray:
    return np.clip(x, knots[degree], knots[-degree - 1])


def basis_matrix(knots: np.ndarray, degree: int, x: np.ndarray) -> np.ndarray:
    """All basis values at each point of ``x``; shape (len(x), G + degree).

    Inputs are clamped to the grid range first.  At most degree+1 entries
    per row are nonzero and each row sums to 1.
    """
    _check_knots(knots, degree)
    x = np.asarray(x, dtype=np.float64)
    xc = _clamp(knots, degree, x)
    bases = _interval_one_hot(knots, degree, xc)
    return _raise_degree(knots, bases, xc, degree)


def basis_grad_matrix(knots: np.ndarray, degree: int, x: np.ndarray) -> np.ndarray:
    """Derivative of every basis function at each point of ``x``.

    Standard lowered-degree form: B'_{i,d} = d * (B_{i,d-1}/Δ_i - B_{i+1,d-1}/Δ_{i+1}).
    """
    _check_knots(knots, degree)
    x = np.asarray(x, dtype=np.float64)
    xc = _clamp(knots, degree, x)
    lower = _raise_degree(knots, _interval_one_hot(knots, degree, xc), xc, degree - 1)
    den_left = knots[degree:-1] - knots[:-degree - 1]
    den_right = knots[degree + 1:] - knots[1:-degree]
    return degree * (lower[:, :-1] / den_left - lower[:, 1:] / den_right)


def basis_eval(knots: np.ndarray, degree: int, x: float) -> np.ndarray:
    """Basis values at a single point; vector of length G + degree."""
    return basis_matrix(knots, degree, np.array([x]))[0]


def basis_grad(knots: np.ndarray, degree: int, x: float) -> np.ndarray:
    """Basis derivatives at a single point."""
    return basis_grad_matrix(knots, degree, np.array([x]))[0]


def spline_eval(coeffs: np.ndarray, knots: np.ndarray, degree: int, x: float) -> float:
    """Value of the spline with the given coefficients at one point."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    expected = len(knots) - degree - 1
    if coeffs.shape != (expected,):
        raise ValueError(
            f"expected {expected} coefficients for this knot vector, got {coeffs.shape}"
        )
    return float(coeffs @ basis_eval(knots, degree, x))

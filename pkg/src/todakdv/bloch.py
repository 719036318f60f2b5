"""Floquet/Bloch spectrum machinery for the discrete and continuous operators.

The discrete operator acts on periodic sequences,

    L_{(A,B)} psi(n) = (-psi(n+1) + A(n) psi(n) + B(n) psi(n-1)) N^2,

so the eigenvalue relation propagates by the transfer matrix
[[A(n) - lambda eps^2, B(n)], [1, 0]]; the product over one period is the
monodromy and its trace the Floquet discriminant.  The continuous side is
Hill's operator -psi'' + g psi integrated over one period by an adaptive
high-order scheme.  Real spectral bands are where |trace| <= 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .lattice import LatticeState, Profile, init_from_profile

__all__ = [
    "Monodromy2x2",
    "DiscriminantSample",
    "monodromy_discrete",
    "discrete_traces",
    "monodromy_continuous",
    "continuous_traces",
    "lattice_from_potential",
    "discriminant_scan",
    "BandDistanceResult",
    "band_distance",
]


@dataclass(frozen=True)
class Monodromy2x2:
    m11: float
    m12: float
    m21: float
    m22: float

    def trace(self) -> float:
        return self.m11 + self.m22

    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21


@dataclass(frozen=True)
class DiscriminantSample:
    lam: float
    trace_discrete: float
    trace_continuous: float
    det_discrete: float
    det_continuous: float


def monodromy_discrete(A: np.ndarray, B: np.ndarray, lam: float) -> Monodromy2x2:
    """Transfer-matrix product over one period; det = prod(-B(n)) exactly."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    N = len(A)
    eps2 = 1.0 / N**2
    m11, m12, m21, m22 = 1.0, 0.0, 0.0, 1.0
    for n in range(N):
        t11 = A[n] - lam * eps2
        t12 = B[n]
        m11, m12, m21, m22 = (
            t11 * m11 + t12 * m21,
            t11 * m12 + t12 * m22,
            m11,
            m12,
        )
    return Monodromy2x2(m11, m12, m21, m22)


def discrete_traces(A: np.ndarray, B: np.ndarray, lams: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized monodromy traces and determinants over a lambda grid."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    lams = np.asarray(lams, float)
    N = len(A)
    eps2 = 1.0 / N**2
    ones = np.ones_like(lams)
    m11, m12, m21, m22 = ones.copy(), 0.0 * ones, 0.0 * ones, ones.copy()
    for n in range(N):
        t11 = A[n] - lams * eps2
        t12 = B[n]
        m11, m12, m21, m22 = (
            t11 * m11 + t12 * m21,
            t11 * m12 + t12 * m22,
            m11,
            m12,
        )
    return m11 + m22, m11 * m22 - m12 * m21


def monodromy_continuous(g: Profile, lam: float, tol: float = 1e-10) -> Monodromy2x2:
    """Period map of -psi'' + g psi = lambda psi on [0, 1]."""
    def rhs(x, y):
        pot = g(np.array([x]))[0] - lam
        return [y[1], pot * y[0], y[3], pot * y[2]]

    sol = solve_ivp(
        rhs, (0.0, 1.0), [1.0, 0.0, 0.0, 1.0], method="DOP853", rtol=tol, atol=tol * 1e-2
    )
    if not sol.success:
        raise RuntimeError(f"monodromy integration failed: {sol.message}")
    y = sol.y[:, -1]
    return Monodromy2x2(y[0], y[2], y[1], y[3])


def continuous_traces(g: Profile, lams: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Traces/determinants of the Hill period map for all lambdas at once.

    All eigenvalue problems are stacked into one ODE system so the adaptive
    integrator is called a single time.
    """
    lams = np.asarray(lams, float)
    L = len(lams)

    def rhs(x, y):
        Y = y.reshape(4, L)
        pot = g(np.array([x]))[0] - lams
        out = np.empty_like(Y)
        out[0] = Y[1]
        out[1] = pot * Y[0]
        out[2] = Y[3]
        out[3] = pot * Y[2]
        return out.ravel()

    y0 = np.zeros(4 * L)
    y0[:L] = 1.0  # psi1 = 1, psi1' = 0
    y0[3 * L :] = 1.0  # psi2 = 0, psi2' = 1
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=tol, atol=tol * 1e-2)
    if not sol.success:
        raise RuntimeError(f"monodromy integration failed: {sol.message}")
    Y = sol.y[:, -1].reshape(4, L)
    trace = Y[0] + Y[3]
    det = Y[0] * Y[3] - Y[2] * Y[1]
    return trace, det


def lattice_from_potential(g: Profile, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Ansatz data (A, B) for a Hill potential g, using f = g/2.

    The correction series is applied through its stencil form, matching the
    consistent lattice initialization.
    """
    f_samples = 0.5 * g.samples(N)
    state = init_from_profile(f_samples, N, variant="consistent_R")
    return state.to_AB()


def discriminant_scan(
    g: Profile, N: int, lams: np.ndarray, tol: float = 1e-10
) -> list[DiscriminantSample]:
    """Tabulate discrete vs continuous discriminants over a lambda grid."""
    lams = np.asarray(lams, float)
    if len(lams) == 0:
        return []
    A, B = lattice_from_potential(g, N)
    tr_d, det_d = discrete_traces(A, B, lams)
    tr_c, det_c = continuous_traces(g, lams, tol=tol)
    return [
        DiscriminantSample(float(l), float(td), float(tc), float(dd), float(dc))
        for l, td, tc, dd, dc in zip(lams, tr_d, tr_c, det_d, det_c)
    ]


@dataclass(frozen=True)
class BandDistanceResult:
    distance: float
    grid_warning: bool  # a detected band narrower than 3 grid points


def _directed_hausdorff(xs: np.ndarray, ys: np.ndarray) -> float:
    # sup over xs of distance to ys; both sorted 1-d arrays
    idx = np.searchsorted(ys, xs)
    left = ys[np.clip(idx - 1, 0, len(ys) - 1)]
    right = ys[np.clip(idx, 0, len(ys) - 1)]
    return float(np.max(np.minimum(np.abs(xs - left), np.abs(xs - right))))


def _narrow_band(mask: np.ndarray) -> bool:
    runs = []
    count = 0
    for m in mask:
        if m:
            count += 1
        elif count:
            runs.append(count)
            count = 0
    if count:
        runs.append(count)
    return any(r < 3 for r in runs)


def band_distance(samples: list[DiscriminantSample], K: float) -> BandDistanceResult:
    """Hausdorff distance between discrete and continuous band sets on [-K, K].

    Bands are the grid points with |trace| <= 2.  A band resolved by fewer
    than 3 grid points sets the warning flag; so does an empty side.
    """
    lams = np.array([s.lam for s in samples])
    sel = np.abs(lams) <= K
    lams = lams[sel]
    tr_d = np.array([s.trace_discrete for s in samples])[sel]
    tr_c = np.array([s.trace_continuous for s in samples])[sel]
    mask_d = np.abs(tr_d) <= 2.0
    mask_c = np.abs(tr_c) <= 2.0
    warning = _narrow_band(mask_d) or _narrow_band(mask_c)
    set_d = lams[mask_d]
    set_c = lams[mask_c]
    if len(set_d) == 0 and len(set_c) == 0:
        return BandDistanceResult(0.0, True)
    if len(set_d) == 0 or len(set_c) == 0:
        return BandDistanceResult(float("inf"), True)
    dist = max(_directed_hausdorff(set_d, set_c), _directed_hausdorff(set_c, set_d))
    return BandDistanceResult(dist, warning)

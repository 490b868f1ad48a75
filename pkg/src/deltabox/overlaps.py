"""Closed-form overlap integrals between eigenmodes and the initial state.

Everything the dynamics needs reduces to region-restricted mode overlaps
``O^region_ij = integral over region of psi_i psi_j`` and the projections
``alpha_i`` of the initial interior cosine state onto the modes.  All
integrals here are evaluated analytically through product-to-sum
identities; no spatial grid appears anywhere in the pipeline (quadrature
exists only in the test oracles).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SumRuleViolation
from .spectral import EigenMode, Spectrum, _sinc

__all__ = [
    "OverlapSet",
    "sinusoid_overlap",
    "alpha_coeffs",
    "region_overlap_matrices",
    "build_overlap_set",
]

REGIONS = ("inner", "left", "right")

# Rows are filled in blocks of this many modes to bound temporary memory.
_BLOCK = 512

# Half-width of the momentum window around pi/2 where the direct alpha
# formula loses digits to cancellation and the series form takes over.
_ALPHA_SERIES_WINDOW = 1e-4


@dataclass(frozen=True)
class OverlapSet:
    """Precomputed ingredients for all time-dependent observables.

    Attributes
    ----------
    p : ndarray
        Mode momenta, ascending, shape (N,).
    alpha : ndarray
        Initial-state projections, shape (N,).
    o_in, o_left, o_right : ndarray
        Symmetric region overlap matrices over [-1, 1], [-L, -1], [1, L].
    delta : ndarray
        Transition frequencies ``delta[i, j] = (p_i^2 - p_j^2) / 2``.
    box_half_length : float
        Box half-width L, carried along for reflection-horizon bookkeeping.
    """

    p: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    o_in: np.ndarray = field(repr=False)
    o_left: np.ndarray = field(repr=False)
    o_right: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)
    box_half_length: float = 0.0

    def __len__(self) -> int:
        return self.p.size

    @property
    def energies(self) -> np.ndarray:
        return 0.5 * self.p * self.p

    @property
    def alpha_norm(self) -> float:
        """Norm of the truncated initial state, sum of alpha_i^2."""
        return float(np.dot(self.alpha, self.alpha))

    @property
    def completeness_defect(self) -> float:
        """Weight of the initial state lost to basis truncation."""
        return 1.0 - self.alpha_norm


def _outer_sin_overlap(p: np.ndarray, q: np.ndarray, length: float) -> np.ndarray:
    """integral_0^length sin(p y) sin(q y) dy, valid for any p, q > 0."""
    half = 0.5 * length
    return half * (_sinc((p - q) * length) - _sinc((p + q) * length))


def _inner_overlap_terms(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(sin*sin, cos*cos) integrals over [-1, 1]; sin*cos vanishes by parity."""
    minus = _sinc(p - q)
    plus = _sinc(p + q)
    return minus - plus, minus + plus


def sinusoid_overlap(mode_i: EigenMode, mode_j: EigenMode, region: str) -> float:
    """Exact overlap of two modes over one region of the box.

    Parameters
    ----------
    mode_i, mode_j : EigenMode
        Modes of the same configuration (same box half-length).
    region : str
        One of ``"inner"``, ``"left"``, ``"right"``.
    """
    if region not in REGIONS:
        raise ValueError(f"region must be one of {REGIONS}, got {region!r}")
    if mode_i.box_half_length != mode_j.box_half_length:
        raise ValueError("modes belong to different boxes")
    p = np.asarray(mode_i.p)
    q = np.asarray(mode_j.p)
    if region == "inner":
        ss, cc = _inner_overlap_terms(p, q)
        return float(mode_i.c * mode_j.c * ss + mode_i.d * mode_j.d * cc)
    length = mode_i.box_half_length - 1.0
    outer = _outer_sin_overlap(p, q, length)
    if region == "left":
        return float(mode_i.a * mode_j.a * outer)
    return float(mode_i.b * mode_j.b * outer)


def _alpha_factor(p: np.ndarray) -> np.ndarray:
    """integral_{-1}^{1} cos(p x) cos(pi x / 2) dx.

    Equals ``pi cos(p) / (pi^2/4 - p^2)`` away from the removable
    singularity at p = pi/2; inside a narrow window around it a 4th-order
    series in u = p - pi/2 is used instead.
    """
    p = np.asarray(p, dtype=float)
    u = p - 0.5 * np.pi
    near = np.abs(u) < _ALPHA_SERIES_WINDOW
    safe_denom = np.where(near, 1.0, 0.25 * np.pi**2 - p * p)
    direct = np.pi * np.cos(p) / safe_denom
    series = (1.0 - u * u / 6.0 + u**4 / 120.0) * np.pi / (np.pi + u)
    return np.where(near, series, direct)


def alpha_coeffs(spectrum: Spectrum) -> np.ndarray:
    """Projections of the interior cosine state onto every mode.

    The initial state is ``cos(pi x / 2)`` on [-1, 1] and zero outside, so
    only the interior branch contributes; its sine part drops out by parity
    and the cosine part integrates in closed form.
    """
    p = spectrum.momenta
    _, _, _, d = spectrum.coefficient_arrays()
    return d * _alpha_factor(p)


def region_overlap_matrices(
    spectrum: Spectrum,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense symmetric N x N overlap matrices for the three regions.

    The three matrices must sum to the identity (the modes are orthonormal
    on the full box); that property is checked by the caller rather than
    enforced by construction.
    """
    p = spectrum.momenta
    a, b, c, d = spectrum.coefficient_arrays()
    n = p.size
    length = spectrum.config.box_half_length - 1.0
    o_in = np.empty((n, n))
    o_left = np.empty((n, n))
    o_right = np.empty((n, n))
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        pi_b = p[start:stop, None]
        ss, cc = _inner_overlap_terms(pi_b, p[None, :])
        o_in[start:stop] = (
            c[start:stop, None] * c[None, :] * ss
            + d[start:stop, None] * d[None, :] * cc
        )
        outer = _outer_sin_overlap(pi_b, p[None, :], length)
        o_left[start:stop] = a[start:stop, None] * a[None, :] * outer
        o_right[start:stop] = b[start:stop, None] * b[None, :] * outer
    return o_in, o_left, o_right


def check_sum_rule(
    o_in: np.ndarray, o_left: np.ndarray, o_right: np.ndarray, tol: float = 1e-6
) -> float:
    """Max elementwise deviation of the region split from the identity.

    Raises ``SumRuleViolation`` beyond ``tol``; such a violation signals
    root or normalization errors upstream, not a property of the model.
    """
    total = o_in + o_left + o_right
    defect = np.abs(total - np.eye(total.shape[0]))
    worst = float(defect.max())
    if worst > tol:
        i, j = np.unravel_index(int(defect.argmax()), defect.shape)
        raise SumRuleViolation(
            f"region overlaps sum to identity only within {worst:.3e} "
            f"(worst at modes {i}, {j}); tolerance {tol:.1e}"
        )
    return worst


def orthonormality_defect(spectrum: Spectrum) -> float:
    """Max deviation of the analytic full-box Gram matrix from the identity.

    Streams over row blocks so paper-scale bases do not materialize three
    dense matrices at once.
    """
    p = spectrum.momenta
    a, b, c, d = spectrum.coefficient_arrays()
    n = p.size
    length = spectrum.config.box_half_length - 1.0
    worst = 0.0
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        pi_b = p[start:stop, None]
        ss, cc = _inner_overlap_terms(pi_b, p[None, :])
        outer = _outer_sin_overlap(pi_b, p[None, :], length)
        gram = (
            c[start:stop, None] * c[None, :] * ss
            + d[start:stop, None] * d[None, :] * cc
            + (a[start:stop, None] * a[None, :] + b[start:stop, None] * b[None, :])
            * outer
        )
        gram[np.arange(start, stop) - start, np.arange(start, stop)] -= 1.0
        worst = max(worst, float(np.max(np.abs(gram))))
    return worst


def build_overlap_set(spectrum: Spectrum, sum_rule_tol: float = 1e-6) -> OverlapSet:
    """Assemble alpha vector, region matrices and frequency matrix."""
    p = spectrum.momenta
    o_in, o_left, o_right = region_overlap_matrices(spectrum)
    check_sum_rule(o_in, o_left, o_right, tol=sum_rule_tol)
    energies = 0.5 * p * p
    delta = energies[:, None] - energies[None, :]
    return OverlapSet(
        p=p,
        alpha=alpha_coeffs(spectrum),
        o_in=o_in,
        o_left=o_left,
        o_right=o_right,
        delta=delta,
        box_half_length=spectrum.config.box_half_length,
    )

"""Time series of decay observables from a precomputed overlap set.

With real mode coefficients and real projections the three region
probabilities are bilinear sums

    P_region(t) = sum_ij alpha_i alpha_j cos(delta_ij t) O^region_ij,

and the currents follow by exact term-wise differentiation; no finite
differencing appears anywhere.  Each sum is evaluated as a dense
matrix-vector contraction per time sample, chunked over samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveProbability
from .overlaps import OverlapSet
from .spectral import Spectrum

__all__ = [
    "TimeGrid",
    "ProbabilityTrace",
    "reflection_horizon",
    "probabilities",
    "currents",
    "running_decay_rate",
    "ratios_and_wronskian",
    "compute_trace",
    "wavefunction",
]

# Leading wavefront momentum used for the reflection horizon.
_FRONT_MOMENTUM = 0.5 * np.pi

# Ratio samples with a denominator below this are marked undefined (NaN)
# instead of being emitted as huge numbers.
UNDEFINED_RATIO_FLOOR = 1e-14

# Time samples are processed in chunks of this many columns.
_CHUNK = 512


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid for trace evaluation."""

    t_start: float
    t_end: float
    n_samples: int

    def __post_init__(self) -> None:
        if self.t_start < 0.0:
            raise ValueError(f"t_start must be >= 0, got {self.t_start}")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.n_samples < 2:
            raise ValueError(f"n_samples must be >= 2, got {self.n_samples}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_samples)


def reflection_horizon(box_half_length: float) -> float:
    """Latest time the finite box mimics open space, (L - 1) / (pi/2).

    The leading front of the escaped wave travels at roughly the dominant
    momentum pi/2; after it returns from a wall the trace no longer
    represents decay into open space.
    """
    return (box_half_length - 1.0) / _FRONT_MOMENTUM


@dataclass(frozen=True)
class ProbabilityTrace:
    """Time series of every observable of a single decay run.

    Currents carry the sign convention that makes all three non-negative in
    a decaying regime: ``j0 = -dP0/dt`` while ``j_left/j_right`` are plain
    derivatives.  Ratio samples with vanishing denominators are NaN.
    """

    t: np.ndarray = field(repr=False)
    p0_surv: np.ndarray = field(repr=False)
    p_left: np.ndarray = field(repr=False)
    p_right: np.ndarray = field(repr=False)
    j0: np.ndarray = field(repr=False)
    j_left: np.ndarray = field(repr=False)
    j_right: np.ndarray = field(repr=False)
    ratio_prob: np.ndarray = field(repr=False)
    ratio_curr: np.ndarray = field(repr=False)
    gamma_running: np.ndarray = field(repr=False)
    wronskian: np.ndarray = field(repr=False)
    horizon: float
    alpha_norm: float
    p_max: float

    def __len__(self) -> int:
        return self.t.size

    @property
    def valid_mask(self) -> np.ndarray:
        """Samples unaffected by wall reflections."""
        return self.t <= self.horizon

    @property
    def exceeds_horizon(self) -> bool:
        return bool(self.t[-1] > self.horizon)

    @property
    def uv_return_time(self) -> float:
        """Earliest wall-reflection contamination, 2 (L - 1) / p_max.

        The fastest modes kept in the basis bounce back into the barrier
        region long before the nominal pi/2-front horizon; the currents,
        and above all their ratio, pick that contamination up first.
        """
        return np.pi * self.horizon / self.p_max

    @property
    def conservation_residual(self) -> np.ndarray:
        """Per-sample deviation of P0 + PL + PR from the truncated norm."""
        return self.p0_surv + self.p_left + self.p_right - self.alpha_norm


def _bilinear_series(
    ov: OverlapSet, t: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """P and dP/dt for all three regions on a vector of times.

    Works through the complex amplitudes z_i(t) = alpha_i exp(-i E_i t):
    ``P = Re(z^H O z)`` and ``dP/dt = -2 Im((E z)^H O z)``, one dense
    matmul per region and chunk.
    """
    energies = ov.energies
    probs = [np.empty(t.size) for _ in range(3)]
    derivs = [np.empty(t.size) for _ in range(3)]
    matrices = (ov.o_in, ov.o_left, ov.o_right)
    for start in range(0, t.size, _CHUNK):
        stop = min(start + _CHUNK, t.size)
        z = ov.alpha[:, None] * np.exp(-1j * np.outer(energies, t[start:stop]))
        zc = z.conj()
        ez = energies[:, None] * zc
        for k, mat in enumerate(matrices):
            y = mat @ z
            probs[k][start:stop] = np.sum(zc * y, axis=0).real
            derivs[k][start:stop] = -2.0 * np.sum(ez * y, axis=0).imag
    return probs[0], probs[1], probs[2], derivs[0], derivs[1], derivs[2]


def probabilities(ov: OverlapSet, t: float | np.ndarray) -> tuple[np.ndarray, ...]:
    """Nondecay and partial decay probabilities (P0, PL, PR) at time(s) t."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0.0):
        raise ValueError("probabilities are defined for t >= 0")
    p0, pl, pr = _bilinear_series(ov, t_arr)[:3]
    if np.isscalar(t):
        return float(p0[0]), float(pl[0]), float(pr[0])
    return p0, pl, pr


def currents(ov: OverlapSet, t: float | np.ndarray) -> tuple[np.ndarray, ...]:
    """Probability currents (j0, jL, jR), with j0 = -dP0/dt."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0.0):
        raise ValueError("currents are defined for t >= 0")
    _, _, _, d0, dl, dr = _bilinear_series(ov, t_arr)
    if np.isscalar(t):
        return float(-d0[0]), float(dl[0]), float(dr[0])
    return -d0, dl, dr


def running_decay_rate(t: np.ndarray, p0: np.ndarray) -> np.ndarray:
    """Running decay rate -ln(P0)/t, with the analytic limit 0 at t = 0."""
    if np.any(p0 <= 0.0):
        worst = float(np.min(p0))
        raise NonPositiveProbability(
            f"nondecay probability reached {worst:.3e}; the truncated basis "
            "no longer represents the state"
        )
    out = np.empty_like(p0)
    origin = t == 0.0
    out[origin] = 0.0
    out[~origin] = -np.log(p0[~origin]) / t[~origin]
    return out


def ratios_and_wronskian(
    p_left: np.ndarray,
    p_right: np.ndarray,
    j_left: np.ndarray,
    j_right: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-to-left ratios and the Wronskian W = PL*jR - PR*jL.

    Before any leakage both denominators vanish; such samples become NaN
    markers rather than infinities.
    """
    prob_ok = np.abs(p_left) >= UNDEFINED_RATIO_FLOOR
    curr_ok = np.abs(j_left) >= UNDEFINED_RATIO_FLOOR
    ratio_prob = np.where(prob_ok, p_right / np.where(prob_ok, p_left, 1.0), np.nan)
    ratio_curr = np.where(curr_ok, j_right / np.where(curr_ok, j_left, 1.0), np.nan)
    wronskian = p_left * j_right - p_right * j_left
    return ratio_prob, ratio_curr, wronskian


def compute_trace(ov: OverlapSet, grid: TimeGrid) -> ProbabilityTrace:
    """Evaluate the full observable set on a time grid."""
    t = grid.times
    p0, pl, pr, d0, dl, dr = _bilinear_series(ov, t)
    j0 = -d0
    ratio_prob, ratio_curr, wronskian = ratios_and_wronskian(pl, pr, dl, dr)
    return ProbabilityTrace(
        t=t,
        p0_surv=p0,
        p_left=pl,
        p_right=pr,
        j0=j0,
        j_left=dl,
        j_right=dr,
        ratio_prob=ratio_prob,
        ratio_curr=ratio_curr,
        gamma_running=running_decay_rate(t, p0),
        wronskian=wronskian,
        horizon=reflection_horizon(ov.box_half_length),
        alpha_norm=ov.alpha_norm,
        p_max=float(ov.p[-1]),
    )


def wavefunction(
    spectrum: Spectrum, alpha: np.ndarray, x: np.ndarray, t: float
) -> np.ndarray:
    """Debug utility: complex wave function on arbitrary points at time t."""
    from .spectral import eval_mode

    x = np.atleast_1d(np.asarray(x, dtype=float))
    psi = np.zeros(x.shape, dtype=complex)
    for weight, mode in zip(alpha, spectrum.modes):
        if weight == 0.0:
            continue
        psi += weight * np.exp(-1j * mode.energy * t) * eval_mode(mode, x)
    return psi

"""Pauli-spin-blockade parity readout, SET signal synthesis and heralding.

Blockaded outcomes correspond to even pair parity (both spins equal); the
heralded initialization loop accepts a shot only when both unit cells read
blockaded.  Analog SET signals are single effective Gaussians per outcome
whose separation/width ratio is the calibrated SNR; in simultaneous mode a
linear mean shift proportional to the neighbour DQD's mode offset models
the sensor cross-capacitance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qcore
from .device import DeviceConfig, InitParams, ReadoutParams


class ReadoutError(ValueError):
    pass


class InitAbortError(RuntimeError):
    """Heralded initialization exceeded max_attempts."""


PAIRS = {"q1q2": (0, 1), "q3q4": (2, 3)}


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# parity projection


def measure_parity(rho: np.ndarray, pair: str, seed) -> tuple[str, np.ndarray]:
    """Projective even/odd parity measurement of one unit cell.

    Accepts a 4-qubit state, or a 3-qubit (Q2, Q3, Q4) state where Q1 is
    implicitly held in |1>.  Returns the outcome and the collapsed state.
    """
    if pair not in PAIRS:
        raise ReadoutError(f"unknown pair {pair!r}")
    rho = np.asarray(rho, dtype=complex)
    n = qcore.n_qubits(rho.shape[0])
    if n == 4:
        qa, qb = PAIRS[pair]
    elif n == 3:
        qa, qb = (None, 0) if pair == "q1q2" else (1, 2)
    else:
        raise ReadoutError(f"parity readout needs a 3- or 4-qubit state, got {n}")
    d = rho.shape[0]
    bits = np.array([[(b >> (n - 1 - q)) & 1 for q in range(n)] for b in range(d)])
    if qa is None:
        even_mask = bits[:, qb] == 1  # Q1 fixed in |1>
    else:
        even_mask = bits[:, qa] == bits[:, qb]
    p_even = float(np.real(np.diag(rho)[even_mask].sum()))
    rng = _rng(seed)
    outcome = "even" if rng.uniform() < p_even else "odd"
    mask = even_mask if outcome == "even" else ~even_mask
    proj = np.diag(mask.astype(float))
    p = p_even if outcome == "even" else 1.0 - p_even
    if p <= 0:
        raise ReadoutError("measured an outcome of zero probability")
    collapsed = proj @ rho @ proj / p
    return outcome, collapsed


# ---------------------------------------------------------------------------
# analog signals


def _mu(outcome: int, params: ReadoutParams) -> float:
    return params.mu_blocked if outcome == 0 else params.mu_unblocked


def sample_signal(outcome: int, set_index: int, params: ReadoutParams, seed,
                  neighbor_outcome: int | None = None) -> float:
    """Draw one SET signal; ``outcome`` 0 means blockaded/even."""
    z = float(_rng(seed).normal())
    return signal_value(outcome, set_index, params, z, neighbor_outcome)


def signal_value(outcome: int, set_index: int, params: ReadoutParams, z: float,
                 neighbor_outcome: int | None = None) -> float:
    s = _mu(outcome, params) + params.sigma(set_index) * z
    if params.mode == "simultaneous" and neighbor_outcome is not None:
        xt = params.crosstalk12 if set_index == 1 else params.crosstalk21
        mid = (params.mu_blocked + params.mu_unblocked) / 2.0
        s += xt * (_mu(neighbor_outcome, params) - mid)
    return s


def sample_signal_pair(o1: int, o2: int, params: ReadoutParams,
                       z: tuple[float, float]) -> tuple[float, float]:
    return (
        signal_value(o1, 1, params, z[0], neighbor_outcome=o2),
        signal_value(o2, 2, params, z[1], neighbor_outcome=o1),
    )


def classify(signal: float, set_index: int, params: ReadoutParams) -> int:
    """Threshold a signal into a parity bit (0 = even/blockaded)."""
    thr = params.threshold(set_index)
    if params.mu_blocked >= params.mu_unblocked:
        return 0 if signal >= thr else 1
    return 0 if signal <= thr else 1


# ---------------------------------------------------------------------------
# heralded initialization


def heralded_init_bits(init: InitParams, params: ReadoutParams,
                       rng: np.random.Generator) -> tuple[tuple[int, int, int, int], int]:
    """Run the repeat-until-blockaded loop; returns post-X spin bits.

    Each attempt ramps both cells toward the intended odd product state,
    flips Q2 and Q3, reads both parities and accepts only on double even.
    The returned bits are (Q1, Q2, Q3, Q4) with 1 = spin down.
    """
    for attempt in range(1, init.max_attempts + 1):
        u12, u34, f12, f34 = rng.uniform(size=4)
        z1, z2 = rng.normal(size=2)
        if u12 < init.p_even12:
            pair12 = (1, 1)
        else:
            pair12 = (1, 0) if f12 < 0.5 else (0, 1)
        if u34 < init.p_even34:
            pair34 = (1, 1)
        else:
            pair34 = (1, 0) if f34 < 0.5 else (0, 1)
        o1 = 0 if pair12[0] == pair12[1] else 1
        o2 = 0 if pair34[0] == pair34[1] else 1
        s1, s2 = sample_signal_pair(o1, o2, params, (z1, z2))
        if classify(s1, 1, params) == 0 and classify(s2, 2, params) == 0:
            return (*pair12, *pair34), attempt
    raise InitAbortError(f"no blockaded double outcome within {init.max_attempts} attempts")


def heralded_init(init: InitParams, params: ReadoutParams, seed) -> tuple[np.ndarray, int]:
    """Density-matrix form of the heralding loop (4-qubit register)."""
    bits, attempts = heralded_init_bits(init, params, _rng(seed))
    return qcore.density(qcore.ket(bits)), attempts


# ---------------------------------------------------------------------------
# sequence timing


def _x_gate_time(config: DeviceConfig) -> float:
    # simultaneous pi pulses on Q2 and Q3 during init step 3
    return max(1.0 / (2.0 * config.qubits[1].rabi_hz),
               1.0 / (2.0 * config.qubits[2].rabi_hz))


def readout_block_s(params: ReadoutParams) -> float:
    """One DQD readout: ramp, reference integration, ramp, read integration."""
    return 2.0 * params.t_ramp_s + params.t_reference_s + params.t_read_s


def sequence_duration(mode: str, u_c_s: float, attempts: int, config: DeviceConfig,
                      n_cells: int = 2) -> float:
    """Wall-clock time of a single-shot sequence with ``attempts`` inits.

    Sequential mode reads the unit cells back to back (scaling linearly in
    ``n_cells``); simultaneous mode overlaps them, so its duration does not
    depend on the cell count.
    """
    if u_c_s < 0:
        raise ReadoutError("control time must be non-negative")
    if attempts < 1:
        raise ReadoutError("attempts must be >= 1")
    params = config.readout
    block = readout_block_s(params)
    readout_total = block * (n_cells if mode == "sequential" else 1)
    init_attempt = (config.timing.t_relax_hold_s + config.timing.t_init_ramp_s
                    + _x_gate_time(config) + readout_total)
    return attempts * init_attempt + u_c_s + readout_total


# ---------------------------------------------------------------------------
# parallel readout window calibration


@dataclass(frozen=True)
class PsbWindowModel:
    """Phenomenological blockade-window geometry for both unit cells.

    ``window{1,2}`` are blockade intervals on each cell's own effective
    detuning axis; ``strips{1,2}`` are neighbour-axis intervals where the
    neighbour's charge movement cascades into this cell's sensor; the
    slopes tilt the windows through gate cross-capacitance.
    """

    window1: tuple[float, float]
    window2: tuple[float, float]
    strips1: tuple[tuple[float, float], ...] = ()
    strips2: tuple[tuple[float, float], ...] = ()
    slope1: float = 0.0
    slope2: float = 0.0

    def __post_init__(self):
        for w in (self.window1, self.window2):
            if w[1] <= w[0]:
                raise ReadoutError("blockade windows must be non-empty intervals")

    def blocked_fraction(self, dqd: int, d_own: float, d_other: float) -> float:
        """Expected blockaded fraction of an equal odd/even mixture."""
        strips = self.strips1 if dqd == 1 else self.strips2
        for lo, hi in strips:
            if lo <= d_other <= hi:
                return 1.0  # cascaded readout pins the sensor
        slope = self.slope1 if dqd == 1 else self.slope2
        lo, hi = self.window1 if dqd == 1 else self.window2
        eff = d_own - slope * d_other
        if eff < lo:
            return 0.0  # before the blockade region: charge always moves
        if eff > hi:
            return 1.0  # past the window: tunneling frozen out
        return 0.5

    def in_window(self, d1: float, d2: float) -> bool:
        return (
            self.blocked_fraction(1, d1, d2) == 0.5
            and self.blocked_fraction(2, d2, d1) == 0.5
        )


@dataclass(frozen=True)
class CalibrationResult:
    d1: tuple[float, ...]
    d2: tuple[float, ...]
    map1: np.ndarray
    map2: np.ndarray
    sum_map: np.ndarray
    window_mask: np.ndarray
    read_point: tuple[float, float]


def calibration_scan(model: PsbWindowModel, grid, spec, config: DeviceConfig,
                     tol: float = 0.25) -> CalibrationResult:
    """Scan both detunings with equal-parity mixtures and find the window.

    ``grid`` is a pair of detuning axes.  With a RunSpec the per-point
    blockaded fractions are binomially sampled; with ``spec=None`` the scan
    is deterministic.  The window is where both thresholded maps sit at one
    half (their sum at one).
    """
    d1, d2 = (np.asarray(g, dtype=float) for g in grid)
    if d1.size == 0 or d2.size == 0:
        raise ReadoutError("empty calibration grid")
    map1 = np.zeros((d1.size, d2.size))
    map2 = np.zeros((d1.size, d2.size))
    rng = None if spec is None else np.random.Generator(
        np.random.Philox(key=np.array([spec.seed, 0], dtype=np.uint64)))
    for i, a in enumerate(d1):
        for j, b in enumerate(d2):
            f1 = model.blocked_fraction(1, a, b)
            f2 = model.blocked_fraction(2, b, a)
            if rng is not None:
                f1 = rng.binomial(spec.shots, f1) / spec.shots
                f2 = rng.binomial(spec.shots, f2) / spec.shots
            map1[i, j] = f1
            map2[i, j] = f2
    sum_map = map1 + map2
    window = (
        (np.abs(map1 - 0.5) <= tol / 2)
        & (np.abs(map2 - 0.5) <= tol / 2)
        & (np.abs(sum_map - 1.0) <= tol)
    )
    if not window.any():
        raise ReadoutError("no parallel readout window found; model inconsistent with grid")
    for i, j in zip(*np.nonzero(window)):
        for lo, hi in model.strips1:
            if lo <= d2[j] <= hi:
                raise ReadoutError("window overlaps a cascade strip of DQD1")
        for lo, hi in model.strips2:
            if lo <= d1[i] <= hi:
                raise ReadoutError("window overlaps a cascade strip of DQD2")
    ii, jj = np.nonzero(window)
    centroid = (float(np.mean(d1[ii])), float(np.mean(d2[jj])))
    k = int(np.argmin((d1[ii] - centroid[0]) ** 2 + (d2[jj] - centroid[1]) ** 2))
    read_point = (float(d1[ii[k]]), float(d2[jj[k]]))
    return CalibrationResult(tuple(d1), tuple(d2), map1, map2, sum_map, window, read_point)

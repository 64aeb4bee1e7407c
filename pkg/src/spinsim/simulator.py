"""Monte-Carlo density-matrix evolution of timed circuits.

Noise model: a per-shot quasi-static Larmor detuning (Gaussian, sigma set
by T2*) plus Markovian phase damping at the Hahn rate.  Gates are applied
as instantaneous unitaries at their pulse centres; dephasing accrues over
wall-clock time between those events, which makes the refocusing algebra
of symmetric circuits exact for inserted waits while keeping detuning
accrual during the pulses themselves.

Shot randomness is drawn from counter-based Philox streams keyed by
(seed, setting, shot), so shots are reproducible and independent of each
other and of batch execution order.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import qcore, readout
from .circuits import AXES6, Circuit, PROJECTION_TRIPLETS, build_coherence_circuit, \
    build_state_circuit, enumerate_settings, modify_timing, with_projections
from .device import DeviceConfig


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseRealization:
    """Quasi-static per-qubit detunings (Hz, physical qubit order Q1..Q4)."""

    detuning_hz: tuple[float, float, float, float]
    realization_id: int = 0


@dataclass(frozen=True)
class RunSpec:
    shots: int
    seed: int = 0
    noise_enabled: bool = True
    fast_dephasing_enabled: bool = True

    def __post_init__(self):
        if self.shots < 1:
            raise SimulationError("shots must be >= 1")


@dataclass(frozen=True)
class ShotRecord:
    setting_id: int
    parity12: int
    parity34: int
    signal1: float
    signal2: float
    attempts: int
    shot_seed: int


def detuning_sigma_hz(config: DeviceConfig, qubit: int) -> float:
    """Gaussian sigma reproducing exp(-(t/T2*)^2) Ramsey decay."""
    return math.sqrt(2.0) / config.qubits[qubit].t2_star_s / (2.0 * math.pi)


def shot_rng(seed: int, setting_id: int, shot_index: int) -> np.random.Generator:
    key = np.array(
        [np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
         np.uint64(((setting_id & 0xFFFFFFFF) << 32) | (shot_index & 0xFFFFFFFF))],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def shot_seed_value(setting_id: int, shot_index: int) -> int:
    return ((setting_id & 0xFFFFFFFF) << 32) | (shot_index & 0xFFFFFFFF)


def draw_noise(config: DeviceConfig, seed, enabled: bool = True,
               realization_id: int = 0) -> NoiseRealization:
    """One quasi-static realization; ``seed`` is an int or a Generator."""
    if not enabled:
        return NoiseRealization((0.0, 0.0, 0.0, 0.0), realization_id)
    rng = seed if isinstance(seed, np.random.Generator) else shot_rng(int(seed), 0, realization_id)
    deltas = tuple(
        float(rng.normal(0.0, detuning_sigma_hz(config, q))) for q in range(4)
    )
    return NoiseRealization(deltas, realization_id)


# ---------------------------------------------------------------------------
# circuit compilation


@dataclass
class _Compiled:
    n: int
    physical: tuple[int, ...]
    event_times: list[float]
    event_apply: list[tuple[str, object]]   # ("u", matrix) | ("diag", vector)
    final_time: float
    measures: list[tuple[int, tuple[int, ...]]]
    bits: np.ndarray                        # (d, n) bit table, MSB-first
    gamma: np.ndarray                       # (n,) Hahn rates 1/T2H
    hahn_exponent: float
    diff: list[np.ndarray] = field(default_factory=list)  # per-qubit coherence masks


def compile_circuit(circuit: Circuit, config: DeviceConfig) -> _Compiled:
    n = circuit.n_qubits
    d = 2**n
    bits = np.array([[(b >> (n - 1 - q)) & 1 for q in range(n)] for b in range(d)])
    events: list[tuple[float, int, str, object]] = []
    measures: list[tuple[int, tuple[int, ...]]] = []
    for idx, op in enumerate(circuit.ops):
        center = op.start_s + op.duration_s / 2.0
        if op.kind == "sqrtx":
            u = qcore.embed_unitary(qcore.SQRT_X, op.qubits, n)
            events.append((center, idx, "u", u))
        elif op.kind == "pix":
            u = qcore.embed_unitary(qcore.PI_X, op.qubits, n)
            events.append((center, idx, "u", u))
        elif op.kind == "vz":
            q = op.qubits[0]
            dv = np.exp(1j * op.phase * bits[:, q])
            events.append((center, idx, "diag", dv))
        elif op.kind == "exchange":
            qa, qb = op.qubits
            both = (bits[:, qa] == 1) & (bits[:, qb] == 1)
            dv = np.where(both, np.exp(1j * op.phase), 1.0).astype(complex)
            events.append((center, idx, "diag", dv))
        elif op.kind == "wait":
            continue
        elif op.kind == "measure_parity":
            measures.append((op.pair_id, op.qubits))
        else:
            raise SimulationError(f"unknown op kind {op.kind!r}")
    events.sort(key=lambda e: (e[0], e[1]))
    gamma = np.array([1.0 / config.qubits[p].t2_hahn_s for p in circuit.qubits])
    diff = [np.not_equal.outer(bits[:, q], bits[:, q]).astype(float) for q in range(n)]
    return _Compiled(
        n=n,
        physical=circuit.qubits,
        event_times=[e[0] for e in events],
        event_apply=[(e[2], e[3]) for e in events],
        final_time=circuit.duration_s,
        measures=measures,
        bits=bits,
        gamma=gamma,
        hahn_exponent=config.hahn_exponent,
        diff=diff,
    )


def _damping_matrix(comp: _Compiled, t0: float, t1: float) -> np.ndarray | None:
    p = comp.hahn_exponent
    if p == 1.0:
        seg = comp.gamma * (t1 - t0)
    else:
        seg = (t1 * comp.gamma) ** p - (t0 * comp.gamma) ** p
    acc = None
    for q in range(comp.n):
        if seg[q] <= 0:
            continue
        term = seg[q] * comp.diff[q]
        acc = term if acc is None else acc + term
    if acc is None:
        return None
    return np.exp(-acc)


def _evolve_batch(comp: _Compiled, deltas: np.ndarray, initial: np.ndarray,
                  fast_dephasing: bool) -> np.ndarray:
    """Evolve a (S, n) detuning batch; returns (S, d, d) final states."""
    s = deltas.shape[0]
    d = 2**comp.n
    rho = np.broadcast_to(initial, (s, d, d)).copy()
    # per-shot accumulated phase velocity on each basis state
    omega = 2.0 * math.pi * (deltas @ comp.bits.T)  # (S, d)
    t_prev = 0.0

    def dephase(t0: float, t1: float) -> None:
        nonlocal rho
        if t1 <= t0:
            return
        v = np.exp(1j * omega * (t1 - t0))  # (S, d)
        rho *= v[:, :, None] * v.conj()[:, None, :]
        if fast_dephasing:
            f = _damping_matrix(comp, t0, t1)
            if f is not None:
                rho *= f[None, :, :]

    for t, (kind, payload) in zip(comp.event_times, comp.event_apply):
        dephase(t_prev, t)
        t_prev = max(t_prev, t)
        if kind == "u":
            u = payload
            rho = u @ rho @ u.conj().T
        else:
            dv = payload
            rho *= dv[None, :, None] * dv.conj()[None, None, :]
    dephase(t_prev, comp.final_time)
    return rho


def evolve(circuit: Circuit, realization: NoiseRealization, config: DeviceConfig,
           initial: np.ndarray | None = None, fast_dephasing: bool = True) -> np.ndarray:
    """Final density matrix for one noise realization (measurements skipped)."""
    comp = compile_circuit(circuit, config)
    d = 2**comp.n
    if initial is None:
        initial = qcore.density(qcore.ket([1] * comp.n))
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (d, d):
        raise SimulationError(f"initial state dim {initial.shape} vs register dim {d}")
    deltas = np.array([[realization.detuning_hz[p] for p in circuit.qubits]])
    return _evolve_batch(comp, deltas, initial, fast_dephasing)[0]


# ---------------------------------------------------------------------------
# parity outcome algebra


def _parity_masks(comp: _Compiled, dqd: int, targets: tuple[int, ...], q1_bit: int = 1):
    """Boolean mask over basis states where the DQD parity is even."""
    bits = comp.bits
    if len(targets) == 2:
        return bits[:, targets[0]] == bits[:, targets[1]]
    # three-qubit register: Q1 participates only through its classical bit
    return bits[:, targets[0]] == q1_bit


def outcome_probabilities(diag: np.ndarray, comp: _Compiled, q1_bit: int = 1) -> dict:
    """Joint (parity12, parity34) even/odd probabilities from diag weights."""
    masks = {}
    for dqd, targets in comp.measures:
        masks[dqd] = _parity_masks(comp, dqd, targets, q1_bit)
    if sorted(masks) != [1, 2]:
        raise SimulationError("circuit must measure both DQD parities")
    e1, e2 = masks[1], masks[2]
    return {
        (0, 0): float(diag[e1 & e2].sum()),
        (0, 1): float(diag[e1 & ~e2].sum()),
        (1, 0): float(diag[~e1 & e2].sum()),
        (1, 1): float(diag[~e1 & ~e2].sum()),
    }


def parity_eigenvalues(parity12: int, parity34: int) -> tuple[int, int]:
    """Map parity bits (0=even) to (Z_Q2, ZZ_Q3Q4) eigenvalues.

    Even parity of (Q1, Q2) with Q1 held in |1> means Q2 is |1>, i.e. a -1
    eigenvalue of Z; even pair parity is the +1 eigenvalue of ZZ.
    """
    e12 = +1 if parity12 == 1 else -1
    e34 = +1 if parity34 == 0 else -1
    return e12, e34


# ---------------------------------------------------------------------------
# shot generation


def _draw_shot_inputs(rng: np.random.Generator, config: DeviceConfig, noise: bool):
    init_bits, attempts = readout.heralded_init_bits(config.init, config.readout, rng)
    if noise:
        deltas = np.array([rng.normal(0.0, detuning_sigma_hz(config, q)) for q in range(4)])
    else:
        deltas = np.zeros(4)
    u1, u2 = rng.uniform(size=2)
    z1, z2 = rng.normal(size=2)
    return init_bits, attempts, deltas, (u1, u2), (z1, z2)


def run_shots(circuit: Circuit, spec: RunSpec, config: DeviceConfig) -> list[ShotRecord]:
    """Simulate heralded-init -> evolve -> dual parity readout shot records."""
    comp = compile_circuit(circuit, config)
    if not comp.measures:
        raise SimulationError("circuit does not end in parity measurements")
    setting_id = int(circuit.meta.get("setting_id", 0))

    shots = []
    for i in range(spec.shots):
        rng = shot_rng(spec.seed, setting_id, i)
        shots.append((i, *_draw_shot_inputs(rng, config, spec.noise_enabled)))

    # group by initial register state (init faults are rare, so usually one group)
    groups: dict[tuple, list] = {}
    for rec in shots:
        groups.setdefault(rec[1], []).append(rec)

    records: dict[int, ShotRecord] = {}
    for init_bits, members in groups.items():
        q1_bit = init_bits[0]
        reg_bits = [init_bits[p] for p in circuit.qubits]
        initial = qcore.density(qcore.ket(reg_bits))
        deltas = np.array([[m[3][p] for p in circuit.qubits] for m in members])
        rho = _evolve_batch(comp, deltas, initial, spec.fast_dephasing_enabled)
        diags = np.real(np.einsum("sii->si", rho))
        for m, diag in zip(members, diags):
            i, _, attempts, _, (u1, u2), (z1, z2) = m
            probs = outcome_probabilities(diag, comp, q1_bit)
            p_even12 = probs[(0, 0)] + probs[(0, 1)]
            o1 = 0 if u1 < p_even12 else 1
            row = probs[(o1, 0)] + probs[(o1, 1)]
            p_even34 = probs[(o1, 0)] / row if row > 0 else 0.0
            o2 = 0 if u2 < p_even34 else 1
            s1, s2 = readout.sample_signal_pair(o1, o2, config.readout, (z1, z2))
            c1 = readout.classify(s1, 1, config.readout)
            c2 = readout.classify(s2, 2, config.readout)
            records[i] = ShotRecord(setting_id, c1, c2, s1, s2, attempts,
                                    shot_seed_value(setting_id, i))
    return [records[i] for i in range(spec.shots)]


def exact_setting_expectations(circuit: Circuit, config: DeviceConfig,
                               spec: RunSpec | None = None) -> tuple[float, float, float]:
    """Born-rule (E12, E34, E12*E34) without sampling.

    With a spec supplied, the quasi-static ensemble is Monte-Carlo averaged
    (the average of the diagonal is the diagonal of the averaged state);
    otherwise the evolution is noiseless.
    """
    comp = compile_circuit(circuit, config)
    initial = qcore.density(qcore.ket([1] * comp.n))
    if spec is not None and spec.noise_enabled:
        rng = shot_rng(spec.seed, int(circuit.meta.get("setting_id", 0)), 0)
        sig = np.array([detuning_sigma_hz(config, p) for p in circuit.qubits])
        deltas = rng.normal(0.0, 1.0, size=(spec.shots, comp.n)) * sig
        fast = spec.fast_dephasing_enabled
    else:
        deltas = np.zeros((1, comp.n))
        fast = spec.fast_dephasing_enabled if spec is not None else False
    rho = _evolve_batch(comp, deltas, initial, fast)
    diag = np.real(np.einsum("sii->si", rho)).mean(axis=0)
    probs = outcome_probabilities(diag, comp)
    e12 = e34 = e_joint = 0.0
    for (o1, o2), p in probs.items():
        v1, v2 = parity_eigenvalues(o1, o2)
        e12 += v1 * p
        e34 += v2 * p
        e_joint += v1 * v2 * p
    return e12, e34, e_joint


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepTable:
    columns: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([row[self.columns.index(name)] for row in self.rows])


SWEEP_KINDS = ("rabi", "ramsey", "hahn", "lifetime", "exchange_sweep")

# Cluster-frame settings entering the Mermin witness and its lifetime.
MERMIN_SETTINGS = {
    "XXX": ("+x", "+x", "+x"),
    "XYZ": ("+x", "+y", "+z"),
    "ZXZ": ("+z", "+x", "+z"),
    "ZYX": ("+z", "+y", "+x"),
}


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0:
        raise SimulationError("sweep grid is empty")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise SimulationError("sweep grid must be strictly increasing")
    return grid


def _rabi_sweep(grid, spec: RunSpec, config: DeviceConfig, qubit: int) -> SweepTable:
    # Driven-evolution decay is not integrated; the measured envelope
    # exp(-t/T2Rabi) enters as calibrated profile data.
    qp = config.qubits[qubit]
    rows = []
    for k, t in enumerate(grid):
        env = math.exp(-t / qp.t2_rabi_s) if spec.noise_enabled else 1.0
        p_flip = 0.5 * (1.0 - env * math.cos(2.0 * math.pi * qp.rabi_hz * t))
        rng = shot_rng(spec.seed, k, 0)
        est = rng.binomial(spec.shots, min(1.0, max(0.0, p_flip))) / spec.shots
        rows.append((float(t), float(est), float(spec.shots)))
    return SweepTable(("duration_s", "p_flip", "shots"), tuple(rows))


def _coherence_sweep(kind: str, grid, spec: RunSpec, config: DeviceConfig,
                     qubit: int) -> SweepTable:
    cols = ["t_free_s"] + [f"exp_{a}" for a in AXES6] + ["bloch_length"]
    rows = []
    sigma = detuning_sigma_hz(config, qubit)
    for k, tau in enumerate(grid):
        rng = shot_rng(spec.seed, k, 0)
        if spec.noise_enabled:
            deltas = rng.normal(0.0, sigma, size=(spec.shots, 1))
        else:
            deltas = np.zeros((1, 1))
        exps = []
        for axis in AXES6:
            c = build_coherence_circuit(kind, qubit, tau, config, axis=axis)
            comp = compile_circuit(c, config)
            initial = qcore.density(qcore.ket([1]))
            rho = _evolve_batch(comp, deltas, initial, spec.fast_dephasing_enabled)
            rho_mean = rho.mean(axis=0)
            # +Z outcome probability maps back to the pre-rotation axis
            exps.append(float(np.real(rho_mean[0, 0] - rho_mean[1, 1])))
        x = (exps[0] - exps[1]) / 2.0
        y = (exps[2] - exps[3]) / 2.0
        z = (exps[4] - exps[5]) / 2.0
        t_free = tau if kind == "ramsey" else 2.0 * tau
        rows.append((float(t_free), *exps, math.sqrt(x * x + y * y + z * z)))
    return SweepTable(tuple(cols), tuple(rows))


def _lifetime_sweep(grid, spec: RunSpec, config: DeviceConfig,
                    state_kind: str = "cluster3") -> SweepTable:
    base = build_state_circuit(state_kind, config)
    cols = ["wait_total_s", "exp_XXX", "exp_XYZ", "exp_ZXZ", "exp_ZYX", "mermin_cluster"]
    rows = []
    for tau in grid:
        c = modify_timing(base, wait_s=float(tau))
        exps = {}
        for name, axes in MERMIN_SETTINGS.items():
            setting = _setting_for_axes(axes)
            cc = with_projections(c, setting, config)
            _, _, ej = exact_setting_expectations(cc, config, spec)
            exps[name] = ej
        m = exps["XXX"] + exps["XYZ"] - exps["ZXZ"] + exps["ZYX"]
        rows.append((2.0 * float(tau), exps["XXX"], exps["XYZ"], exps["ZXZ"],
                     exps["ZYX"], m))
    return SweepTable(tuple(cols), tuple(rows))


def _exchange_sweep(grid, spec: RunSpec, config: DeviceConfig) -> SweepTable:
    base = build_state_circuit("cluster3", config)
    cols = ["periods", "exp_XXX", "exp_XYZ", "exp_ZXZ", "exp_ZYX",
            "mermin_cluster", "mermin_cluster_prime"]
    rows = []
    for x in grid:
        # one period of the CZ oscillation = 2*pi of segment phase = scale 4
        scale = 4.0 * float(x)
        c = modify_timing(base, j2_scale=scale, j3_scale=scale)
        exps = {}
        for name, axes in MERMIN_SETTINGS.items():
            cc = with_projections(c, _setting_for_axes(axes), config)
            _, _, ej = exact_setting_expectations(cc, config, spec)
            exps[name] = ej
        m = exps["XXX"] + exps["XYZ"] - exps["ZXZ"] + exps["ZYX"]
        mp = exps["XXX"] - exps["XYZ"] - exps["ZXZ"] - exps["ZYX"]
        rows.append((float(x), exps["XXX"], exps["XYZ"], exps["ZXZ"], exps["ZYX"], m, mp))
    return SweepTable(tuple(cols), tuple(rows))


def _setting_for_axes(axes: tuple[str, str, str]):
    from .circuits import ProjectionSetting
    return ProjectionSetting(0, axes[0], "1q", q3_axis=axes[1], q4_axis=axes[2])


def run_sweep(kind: str, grid, spec: RunSpec, config: DeviceConfig, *,
              qubit: int = 1, state_kind: str = "cluster3") -> SweepTable:
    """Aggregate sweep experiments keyed by the swept parameter."""
    grid = _check_grid(grid)
    if kind == "rabi":
        return _rabi_sweep(grid, spec, config, qubit)
    if kind in ("ramsey", "hahn"):
        return _coherence_sweep(kind, grid, spec, config, qubit)
    if kind == "lifetime":
        return _lifetime_sweep(grid, spec, config, state_kind)
    if kind == "exchange_sweep":
        return _exchange_sweep(grid, spec, config)
    raise SimulationError(f"unknown sweep kind {kind!r}")


def worker_count() -> int:
    """Thread cap from SPINSIM_THREADS (defaults to 1)."""
    raw = os.environ.get("SPINSIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1

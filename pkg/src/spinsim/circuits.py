"""Circuit IR, entangling/tomography circuit builders and echo bookkeeping.

A :class:`Circuit` is an explicitly timed, per-qubit gap-free op list on a
three-qubit register holding physical qubits (Q2, Q3, Q4).  The entangling
block is laddered: both exchange pairs fire in two half-segments mirrored
around one simultaneous refocusing pi pulse per qubit, so every qubit sees
equal free evolution before and after its flip regardless of per-qubit
gate-time differences.

All single-qubit rotations are composites of two sqrt(X) pulses interleaved
with three virtual-Z phases.  The phase triplets below were solved once
against the Bloch-map requirements and are frozen; the test suite re-derives
their defining properties from the matrices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from . import device as dev
from .device import DeviceConfig

PI = math.pi

# Register layout for three-qubit experiments: index 0..2 = Q2, Q3, Q4.
REGISTER_QUBITS = (1, 2, 3)
PAIR_J2 = 1  # config.pairs index for the Q2-Q3 exchange
PAIR_J3 = 2  # config.pairs index for the Q3-Q4 exchange

AXES6 = ("+x", "-x", "+y", "-y", "+z", "-z")

# vZ(p1) -> sqrtX -> vZ(p2) -> sqrtX -> vZ(p3), mapping the named Bloch axis
# onto +Z (its antipode onto -Z).
PROJECTION_TRIPLETS: dict[str, tuple[float, float, float]] = {
    "+x": (0.0, PI / 2, 0.0),
    "-x": (0.0, 3 * PI / 2, 0.0),
    "+y": (3 * PI / 2, PI / 2, 0.0),
    "-y": (PI / 2, PI / 2, 0.0),
    "+z": (0.0, PI, 0.0),
    "-z": (0.0, 0.0, 0.0),
}

# Preparation of |+> from |1> reuses the -x projection composite.
PREP_TRIPLET = PROJECTION_TRIPLETS["-x"]

# Virtual-Z calibration closing the laddered block onto the cluster state.
# Split into +c/2 before and -c/2 after the block to keep echo timing exact.
CLUSTER_CAL_PHASES = (PI, 0.0, PI)

# Base exchange segment phase: two pi/2 segments around the pi pulses net a
# full CZ on the pair, which is the gate that produces the cluster state.
BASE_SEGMENT_PHASE = PI / 2

# Two-qubit projection composites.  First layer selects the measured axis on
# the target qubit (conjugation X -> sign*axis); second layer after the dCZ
# maps Z -> X on the target and Z -> sign*Z on the spectator.
_F_TARGET: dict[tuple[str, int], tuple[float, float, float]] = {
    ("x", +1): (0.0, 0.0, 0.0),
    ("x", -1): (0.0, PI, 0.0),
    ("y", +1): (PI / 2, PI, 0.0),
    ("y", -1): (3 * PI / 2, PI, 0.0),
    ("z", +1): (0.0, PI / 2, 0.0),
    ("z", -1): (0.0, 3 * PI / 2, 0.0),
}
_F_OTHER = (0.0, PI, 0.0)
_S_TARGET = (0.0, PI / 2, 0.0)
_S_OTHER = {+1: (0.0, PI, 0.0), -1: (0.0, 0.0, 0.0)}

STATE_KINDS = ("plus3", "cluster3", "ghz3", "init3")


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class TimedOp:
    kind: str                 # sqrtx | pix | vz | exchange | wait | measure_parity
    qubits: tuple[int, ...]   # register indices
    start_s: float
    duration_s: float
    phase: float = 0.0        # vZ phase, or total CP phase for exchange
    pair_id: int = -1         # config.pairs index (exchange) or DQD index (measure)
    tag: str = ""

    def __post_init__(self):
        if self.duration_s < -1e-15:
            raise CircuitError(f"negative duration on {self.kind}")

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    qubits: tuple[int, ...]   # physical qubit ids per register index
    ops: tuple[TimedOp, ...]
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def duration_s(self) -> float:
        return max((op.end_s for op in self.ops), default=0.0)

    def ops_on(self, q: int) -> list[TimedOp]:
        return [op for op in self.ops if q in op.qubits and op.kind != "measure_parity"]


@dataclass(frozen=True)
class ProjectionSetting:
    """One of the 360 tomographic pre-rotation combinations."""

    setting_id: int
    q2_axis: str
    kind: str                     # "1q" or "2q"
    q3_axis: str = ""
    q4_axis: str = ""
    target: str = ""              # "q3" | "q4" for 2q settings
    axis: str = ""                # measured axis of the target, "x"|"y"|"z"
    sign_c: int = 0
    sign_d: int = 0

    def contributions(self) -> list[tuple[str, int, str]]:
        """(pauli label, sign, source) triples this setting estimates.

        Sources: "p12" uses the Q1-Q2 parity eigenvalue, "p34" the Q3-Q4
        one, "both" their product.
        """
        s2 = +1 if self.q2_axis[0] == "+" else -1
        a2 = self.q2_axis[1].upper()
        out = [(a2 + "II", s2, "p12")]
        if self.kind == "1q":
            s3 = +1 if self.q3_axis[0] == "+" else -1
            s4 = +1 if self.q4_axis[0] == "+" else -1
            a3, a4 = self.q3_axis[1].upper(), self.q4_axis[1].upper()
            out.append(("I" + a3 + a4, s3 * s4, "p34"))
            out.append((a2 + a3 + a4, s2 * s3 * s4, "both"))
        else:
            # The dCZ mapping leaves the measured pair parity equal to
            # -sign_c*sign_d times the chosen single-qubit axis eigenvalue.
            sp = -self.sign_c * self.sign_d
            a = self.axis.upper()
            label = ("I" + a + "I") if self.target == "q3" else ("II" + a)
            out.append((label, sp, "p34"))
            pl = (a2 + a + "I") if self.target == "q3" else (a2 + "I" + a)
            out.append((pl, s2 * sp, "both"))
        return out


class _Builder:
    """Per-qubit cursor assembly with explicit waits (gap-free timelines)."""

    def __init__(self, config: DeviceConfig, physical: Sequence[int], allow_q1_drive: bool = False):
        self.config = config
        self.physical = tuple(physical)
        self.n = len(physical)
        self.cursor = [0.0] * self.n
        self.ops: list[TimedOp] = []
        self.allow_q1_drive = allow_q1_drive

    def durations(self, q: int) -> dict[str, float]:
        return dev.gate_durations(self.config, self.physical[q])

    def _emit(self, kind: str, qubits: tuple[int, ...], duration: float,
              phase: float = 0.0, pair_id: int = -1, tag: str = "") -> None:
        start = self.cursor[qubits[0]]
        for q in qubits[1:]:
            if abs(self.cursor[q] - start) > 1e-15:
                raise CircuitError(f"{kind} on unaligned qubits {qubits}")
        if kind in ("sqrtx", "pix") and self.physical[qubits[0]] == 0 and not self.allow_q1_drive:
            raise CircuitError("Q1 is not drivable at high fidelity; pass allow_q1_drive to override")
        self.ops.append(TimedOp(kind, qubits, start, duration, phase, pair_id, tag))
        for q in qubits:
            self.cursor[q] = start + duration

    def wait(self, q: int, duration: float, tag: str = "wait") -> None:
        if duration < -1e-15:
            raise CircuitError("negative wait")
        if duration > 1e-15:
            self._emit("wait", (q,), duration, tag=tag)

    def wait_all(self, duration: float, tag: str = "wait") -> None:
        for q in range(self.n):
            self.wait(q, duration, tag=tag)

    def align(self, qubits: Sequence[int] | None = None, tag: str = "pad") -> None:
        qs = list(qubits) if qubits is not None else list(range(self.n))
        t = max(self.cursor[q] for q in qs)
        for q in qs:
            self.wait(q, t - self.cursor[q], tag=tag)

    def vz(self, q: int, phase: float, tag: str) -> None:
        self._emit("vz", (q,), dev.VIRTUAL_Z_DURATION_S, phase=phase % (2 * PI), tag=tag)

    def sqrtx(self, q: int, tag: str) -> None:
        self._emit("sqrtx", (q,), self.durations(q)["halfpi_s"], tag=tag)

    def pix(self, q: int, tag: str) -> None:
        self._emit("pix", (q,), self.durations(q)["pi_s"], tag=tag)

    def composite(self, q: int, triplet: tuple[float, float, float], tag: str) -> None:
        p1, p2, p3 = triplet
        self.vz(q, p1, tag)
        self.sqrtx(q, tag)
        self.vz(q, p2, tag)
        self.sqrtx(q, tag)
        self.vz(q, p3, tag)

    def composite_duration(self, q: int) -> float:
        d = self.durations(q)
        return 2 * d["halfpi_s"] + 3 * d["virtualZ_s"]

    def exchange(self, pair_id: int, qubits: tuple[int, int], phase: float, tag: str) -> None:
        j = dev.operating_exchange_hz(self.config.pairs[pair_id])
        duration = phase / (2 * PI * j)
        self._emit("exchange", qubits, duration, phase=phase, pair_id=pair_id, tag=tag)

    def pi_block(self, qubits: Iterable[int], tag: str = "refocus") -> None:
        """Simultaneous pi pulses with centers aligned across qubits."""
        qubits = list(qubits)
        pmax = max(self.durations(q)["pi_s"] for q in qubits)
        for q in qubits:
            pad = (pmax - self.durations(q)["pi_s"]) / 2
            self.wait(q, pad, tag="pad")
        for q in qubits:
            self.pix(q, tag)
        for q in qubits:
            pad = (pmax - self.durations(q)["pi_s"]) / 2
            self.wait(q, pad, tag="pad")
        self.align(qubits)

    def measure(self, dqd: int, targets: tuple[int, ...]) -> None:
        self._emit("measure_parity", targets, 0.0, pair_id=dqd, tag="measure")

    def build(self, meta: dict) -> Circuit:
        ops = tuple(sorted(self.ops, key=lambda op: (op.start_s, op.qubits)))
        _check_no_overlap(ops, self.n)
        return Circuit(self.n, self.physical, ops, meta)


def _check_no_overlap(ops: Sequence[TimedOp], n: int) -> None:
    for q in range(n):
        prev_end = 0.0
        for op in ops:
            if q not in op.qubits or op.kind == "measure_parity":
                continue
            if op.start_s < prev_end - 1e-15:
                raise CircuitError(f"overlapping ops on qubit {q} at t={op.start_s}")
            prev_end = op.end_s


def build_state_circuit(kind: str, config: DeviceConfig, *, wait_s: float = 0.0,
                        j2_scale: float = 1.0, j3_scale: float = 1.0) -> Circuit:
    """Build one of the state-preparation circuits on (Q2, Q3, Q4).

    ``wait_s`` inserts a symmetric idle on each side of the refocusing
    pulses; the exchange scale factors stretch the J2/J3 segment phases
    relative to the sqrt(CZ) calibration (virtual-Z corrections stay at
    the base calibration, as in the swept-exchange experiment).
    """
    if kind not in STATE_KINDS:
        raise CircuitError(f"unknown state circuit kind {kind!r}")
    if wait_s < 0 or j2_scale < 0 or j3_scale < 0:
        raise CircuitError("wait and exchange scales must be non-negative")
    b = _Builder(config, REGISTER_QUBITS)
    meta = {"kind": kind, "config": config, "wait_s": wait_s,
            "j2_scale": j2_scale, "j3_scale": j3_scale}
    if kind == "init3":
        return b.build(meta)

    # State preparation |111> -> |+++>, right-aligned so all composites end
    # together.
    dmax = max(b.composite_duration(q) for q in range(3))
    for q in range(3):
        b.wait(q, dmax - b.composite_duration(q), tag="lead")
    for q in range(3):
        b.composite(q, PREP_TRIPLET, tag="prep")

    # Calibration virtual-Z, half before the block (other half mirrored
    # after it) so the timeline stays symmetric about the pi pulses.
    for q in range(3):
        b.vz(q, CLUSTER_CAL_PHASES[q] / 2, tag="cal")
    b.wait_all(wait_s)

    with_exchange = kind in ("cluster3", "ghz3")
    if with_exchange:
        b.align()
        b.exchange(PAIR_J2, (0, 1), BASE_SEGMENT_PHASE * j2_scale, tag="entangle")
        b.wait(2, b.ops[-1].duration_s)
        b.align()
        b.exchange(PAIR_J3, (1, 2), BASE_SEGMENT_PHASE * j3_scale, tag="entangle")
        b.wait(0, b.ops[-1].duration_s)
        b.align()

    b.pi_block(range(3))

    if with_exchange:
        b.exchange(PAIR_J3, (1, 2), BASE_SEGMENT_PHASE * j3_scale, tag="entangle")
        b.wait(0, b.ops[-1].duration_s)
        b.align()
        b.exchange(PAIR_J2, (0, 1), BASE_SEGMENT_PHASE * j2_scale, tag="entangle")
        b.wait(2, b.ops[-1].duration_s)
        b.align()

    b.wait_all(wait_s)
    for q in range(3):
        b.vz(q, -CLUSTER_CAL_PHASES[q] / 2, tag="cal")

    if kind == "ghz3":
        # Local change of frame sqrtX (x) I (x) sqrtX turning the cluster
        # state into the GHZ state; these two gates break the echo symmetry.
        for q in (0, 2):
            b.sqrtx(q, tag="extra")
        b.align()
    return b.build(meta)


def modify_timing(circuit: Circuit, *, wait_s: float | None = None,
                  j2_scale: float | None = None, j3_scale: float | None = None) -> Circuit:
    """Rebuild a state circuit with adjusted symmetric waits/exchange times."""
    meta = circuit.meta
    if not meta or "kind" not in meta:
        raise CircuitError("circuit was not produced by build_state_circuit")
    return build_state_circuit(
        meta["kind"], meta["config"],
        wait_s=meta["wait_s"] if wait_s is None else wait_s,
        j2_scale=meta["j2_scale"] if j2_scale is None else j2_scale,
        j3_scale=meta["j3_scale"] if j3_scale is None else j3_scale,
    )


def build_coherence_circuit(kind: str, qubit: int, tau_s: float, config: DeviceConfig,
                            axis: str = "+x") -> Circuit:
    """Single-qubit Ramsey or Hahn sequence ending in a projection composite.

    ``qubit`` is the physical qubit id; Q1 is allowed here since coherence
    characterization does not need high-fidelity control.
    """
    if kind not in ("ramsey", "hahn"):
        raise CircuitError(f"unknown coherence sequence {kind!r}")
    if tau_s < 0:
        raise CircuitError("negative free-evolution time")
    if axis not in AXES6:
        raise CircuitError(f"unknown projection axis {axis!r}")
    b = _Builder(config, (qubit,), allow_q1_drive=True)
    b.composite(0, PREP_TRIPLET, tag="prep")
    b.wait(0, tau_s)
    if kind == "hahn":
        b.pix(0, tag="refocus")
        b.wait(0, tau_s)
    b.composite(0, PROJECTION_TRIPLETS[axis], tag="projection")
    return b.build({"kind": kind, "qubit": qubit, "tau_s": tau_s, "axis": axis})


def projection_1q(axis: str, qubit: int, config: DeviceConfig) -> list[TimedOp]:
    """Projection composite for one register qubit, timed from t=0."""
    if axis not in AXES6:
        raise CircuitError(f"unknown projection axis {axis!r}")
    b = _Builder(config, REGISTER_QUBITS)
    b.composite(qubit, PROJECTION_TRIPLETS[axis], tag="projection")
    return [op for op in b.ops]


def projection_2q(target: str, axis: str, sign_c: int, sign_d: int,
                  config: DeviceConfig) -> list[TimedOp]:
    """dCZ-based pair projection on (Q3, Q4), timed from t=0.

    Maps the chosen axis of the target qubit onto the measured pair parity
    (with overall sign ``-sign_c*sign_d``); the spectator drops out.
    """
    if target not in ("q3", "q4") or axis not in ("x", "y", "z"):
        raise CircuitError(f"invalid 2q projection {target!r}/{axis!r}")
    if sign_c not in (-1, +1) or sign_d not in (-1, +1):
        raise CircuitError("projection signs must be +1 or -1")
    b = _Builder(config, REGISTER_QUBITS)
    t = 1 if target == "q3" else 2
    o = 2 if target == "q3" else 1
    b.composite(t, _F_TARGET[(axis, sign_c)], tag="projection")
    b.composite(o, _F_OTHER, tag="projection")
    b.align((1, 2), tag="pad2q")
    # dCZ on the Q3-Q4 pair with its virtual-Z correction folded in front.
    for q in (1, 2):
        b.vz(q, BASE_SEGMENT_PHASE, tag="projection")
    b.exchange(PAIR_J3, (1, 2), BASE_SEGMENT_PHASE, tag="projection")
    b.pi_block((1, 2), tag="proj-refocus")
    b.exchange(PAIR_J3, (1, 2), BASE_SEGMENT_PHASE, tag="projection")
    b.composite(t, _S_TARGET, tag="projection")
    b.composite(o, _S_OTHER[sign_d], tag="projection")
    b.align((1, 2), tag="pad2q")
    return [op for op in b.ops]


def enumerate_settings() -> list[ProjectionSetting]:
    """All 360 projection settings: 216 pure single-qubit plus 144 pair ones."""
    settings: list[ProjectionSetting] = []
    sid = 0
    for a2 in AXES6:
        for a3 in AXES6:
            for a4 in AXES6:
                settings.append(ProjectionSetting(sid, a2, "1q", q3_axis=a3, q4_axis=a4))
                sid += 1
    for a2 in AXES6:
        for target in ("q3", "q4"):
            for axis in ("x", "y", "z"):
                for sc in (+1, -1):
                    for sd in (+1, -1):
                        settings.append(ProjectionSetting(
                            sid, a2, "2q", target=target, axis=axis, sign_c=sc, sign_d=sd))
                        sid += 1
    return settings


def with_projections(circuit: Circuit, setting: ProjectionSetting,
                     config: DeviceConfig) -> Circuit:
    """Append a projection setting plus both parity measurements."""
    b = _Builder(config, circuit.qubits)
    b.ops = list(circuit.ops)
    b.cursor = [0.0] * circuit.n_qubits
    for q in range(circuit.n_qubits):
        ends = [op.end_s for op in circuit.ops if q in op.qubits]
        b.cursor[q] = max(ends, default=0.0)
    b.align()
    b.composite(0, PROJECTION_TRIPLETS[setting.q2_axis], tag="projection")
    if setting.kind == "1q":
        b.composite(1, PROJECTION_TRIPLETS[setting.q3_axis], tag="projection")
        b.composite(2, PROJECTION_TRIPLETS[setting.q4_axis], tag="projection")
    else:
        shift = max(b.cursor[1], b.cursor[2])
        for op in projection_2q(setting.target, setting.axis, setting.sign_c,
                                setting.sign_d, config):
            b.ops.append(replace(op, start_s=op.start_s + shift))
            for q in op.qubits:
                b.cursor[q] = max(b.cursor[q], op.end_s + shift)
    b.align()
    b.measure(1, (0,))
    b.measure(2, (1, 2))
    meta = dict(circuit.meta)
    meta["setting_id"] = setting.setting_id
    return b.build(meta)


def echo_symmetry_check(circuit: Circuit) -> dict[int, dict]:
    """Per-qubit balance of free evolution around the refocusing pulse.

    The dephasing-sensitive window runs from the end of the qubit's
    preparation composite to the start of its projection composite (or the
    end of its timeline when no projection is present), split at the pi
    pulse centre.  Qubits without a pi pulse are vacuously balanced.
    """
    report: dict[int, dict] = {}
    for q in range(circuit.n_qubits):
        ops = circuit.ops_on(q)
        pis = [op for op in ops if op.kind == "pix" and op.tag == "refocus"]
        if len(pis) > 1:
            raise CircuitError(f"qubit {q} has {len(pis)} refocusing pulses; unsupported topology")
        if not pis:
            report[q] = {"balanced": True, "imbalance_s": 0.0}
            continue
        center = pis[0].start_s + pis[0].duration_s / 2
        prep_end = max((op.end_s for op in ops if op.tag == "prep"), default=0.0)
        proj_start = min((op.start_s for op in ops if op.tag.startswith("proj")),
                         default=max(op.end_s for op in ops))
        before = center - prep_end
        after = proj_start - center
        imbalance = after - before
        report[q] = {"balanced": bool(abs(imbalance) < 1e-9), "imbalance_s": imbalance}
    return report


def circuit_to_json(circuit: Circuit) -> str:
    data = {
        "n_qubits": circuit.n_qubits,
        "qubits": list(circuit.qubits),
        "ops": [
            {
                "kind": op.kind,
                "qubits": list(op.qubits),
                "start_s": op.start_s,
                "duration_s": op.duration_s,
                "phase": op.phase,
                "pair_id": op.pair_id,
                "tag": op.tag,
            }
            for op in circuit.ops
        ],
    }
    return json.dumps(data, indent=2, sort_keys=True)

"""Pauli-expectation estimation, linear inversion and Mermin witnesses.

The estimator consumes per-setting parity eigenvalue averages from the 360
projection settings, pools multiply-covered Pauli strings by shot-weighted
mean and reconstructs rho = (1/8) sum <P> P.  Linear inversion can return
non-positive matrices; fidelity and Mermin values are evaluated on the raw
matrix, with an optional eigenvalue-clipping projection available but off
by default.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import qcore
from .circuits import ProjectionSetting
from .simulator import ShotRecord, parity_eigenvalues

LABELS3 = tuple(qcore.all_pauli_labels(3))
DIM3 = 8

MERMIN_TERMS = {
    "GHZ": ((1, "XXX"), (-1, "XYY"), (-1, "YXY"), (-1, "YYX")),
    "Cluster": ((1, "XXX"), (1, "XYZ"), (-1, "ZXZ"), (1, "ZYX")),
    "ClusterPrime": ((1, "XXX"), (-1, "XYZ"), (-1, "ZXZ"), (-1, "ZYX")),
}

# Heisenberg map of sqrtX^dag P sqrtX on the outer qubits, used to re-express
# cluster-frame expectations in the GHZ frame.
_FRAME_MAP = {"I": ("I", 1), "X": ("X", 1), "Y": ("Z", -1), "Z": ("Y", 1)}


class TomographyError(ValueError):
    pass


@dataclass
class ExpectationSet:
    """63 non-trivial Pauli expectations plus <III> = 1, with shot weights."""

    values: dict[str, float] = field(default_factory=dict)
    weights: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.values.setdefault("III", 1.0)
        self.weights.setdefault("III", math.inf)

    def __getitem__(self, label: str) -> float:
        return self.values[label]

    def complete(self) -> bool:
        return all(lbl in self.values for lbl in LABELS3)

    def copy(self) -> "ExpectationSet":
        return ExpectationSet(dict(self.values), dict(self.weights))


@dataclass(frozen=True)
class SettingEstimate:
    """Averaged parity eigenvalues for one projection setting."""

    setting: ProjectionSetting
    shots: float
    e12: float
    e34: float
    e_joint: float

    def source_value(self, source: str) -> float:
        return {"p12": self.e12, "p34": self.e34, "both": self.e_joint}[source]


def records_to_estimates(records: list[ShotRecord],
                         settings: list[ProjectionSetting]) -> list[SettingEstimate]:
    by_id = {s.setting_id: s for s in settings}
    grouped: dict[int, list[ShotRecord]] = {}
    for rec in records:
        grouped.setdefault(rec.setting_id, []).append(rec)
    out = []
    for sid, recs in sorted(grouped.items()):
        if sid not in by_id:
            raise TomographyError(f"records reference unknown setting {sid}")
        eig = [parity_eigenvalues(r.parity12, r.parity34) for r in recs]
        e12 = float(np.mean([e[0] for e in eig]))
        e34 = float(np.mean([e[1] for e in eig]))
        ej = float(np.mean([e[0] * e[1] for e in eig]))
        out.append(SettingEstimate(by_id[sid], len(recs), e12, e34, ej))
    return out


def estimate_expectations(estimates: list[SettingEstimate]) -> ExpectationSet:
    """Pool per-setting eigenvalue averages into Pauli expectations."""
    sums: dict[str, float] = {}
    weights: dict[str, float] = {}
    for est in estimates:
        for label, sign, source in est.setting.contributions():
            sums[label] = sums.get(label, 0.0) + est.shots * sign * est.source_value(source)
            weights[label] = weights.get(label, 0.0) + est.shots
    values = {lbl: sums[lbl] / weights[lbl] for lbl in sums}
    eset = ExpectationSet(values, weights)
    missing = [lbl for lbl in LABELS3 if lbl not in eset.values]
    if missing:
        raise TomographyError(f"uncovered Pauli strings: {missing[:5]} ...")
    return eset


def linear_inversion(eset: ExpectationSet) -> np.ndarray:
    """rho = (1/8) sum_P <P> P over all 64 strings."""
    if not eset.complete():
        raise TomographyError("expectation set is incomplete")
    rho = np.zeros((DIM3, DIM3), dtype=complex)
    for lbl in LABELS3:
        rho += eset.values[lbl] * qcore.pauli_matrix(lbl)
    return rho / DIM3


def exact_expectations(rho: np.ndarray) -> ExpectationSet:
    """Born-rule expectation set of a known 3-qubit state."""
    values = {lbl: qcore.pauli_expectation(rho, lbl) for lbl in LABELS3}
    return ExpectationSet(values, {lbl: math.inf for lbl in LABELS3})


def ghz_frame_rho(rho: np.ndarray) -> np.ndarray:
    """Conjugate by sqrtX (x) I (x) sqrtX, mapping the cluster state to GHZ."""
    if rho.shape[0] != DIM3:
        raise TomographyError("frame transform is defined on 3-qubit states")
    rho = qcore.embed_and_apply(rho, qcore.SQRT_X, [0])
    return qcore.embed_and_apply(rho, qcore.SQRT_X, [2])


def ghz_frame_label(label: str) -> tuple[str, int]:
    """Source label and sign with <P>_transformed = sign * <source>_raw."""
    out = []
    sign = 1
    for pos, c in enumerate(label):
        if pos in (0, 2):
            m, s = _FRAME_MAP[c]
            out.append(m)
            sign *= s
        else:
            out.append(c)
    return "".join(out), sign


def ghz_frame_expectations(eset: ExpectationSet) -> ExpectationSet:
    values = {}
    weights = {}
    for lbl in LABELS3:
        src, sign = ghz_frame_label(lbl)
        if src in eset.values:
            values[lbl] = sign * eset.values[src]
            weights[lbl] = eset.weights.get(src, 0.0)
    return ExpectationSet(values, weights)


def mermin(eset: ExpectationSet, variant: str) -> float:
    if variant not in MERMIN_TERMS:
        raise TomographyError(f"unknown Mermin variant {variant!r}")
    total = 0.0
    for sign, lbl in MERMIN_TERMS[variant]:
        if lbl not in eset.values:
            raise TomographyError(f"missing expectation {lbl} for Mermin variant {variant}")
        total += sign * eset.values[lbl]
    return total


def lhv_bound(variant: str) -> float:
    """Brute-force deterministic local-assignment maximum (512 cases)."""
    if variant not in MERMIN_TERMS:
        raise TomographyError(f"unknown Mermin variant {variant!r}")
    axis_idx = {"X": 0, "Y": 1, "Z": 2}
    terms = [(sign, tuple(axis_idx[c] for c in lbl)) for sign, lbl in MERMIN_TERMS[variant]]
    best = -math.inf
    for assign in itertools.product((-1, 1), repeat=9):
        a = (assign[0:3], assign[3:6], assign[6:9])
        val = sum(sign * a[0][i] * a[1][j] * a[2][k] for sign, (i, j, k) in terms)
        best = max(best, val)
    return float(best)


def spam_contraction(rho0: np.ndarray) -> float:
    """Bloch contraction lambda inferred from the reference-state purity."""
    d = rho0.shape[0]
    inner = (qcore.purity(rho0) - 1.0 / d) / (1.0 - 1.0 / d)
    if inner < 0:
        raise TomographyError(f"reference purity below 1/d (inner={inner:.3e})")
    lam = math.sqrt(inner)
    if lam <= 0.0:
        raise TomographyError("contraction lambda is zero; reference carries no signal")
    if lam > 1.0 + 1e-6:
        raise TomographyError(f"unphysical contraction lambda={lam:.6f} > 1")
    return lam


def spam_correct(eset: ExpectationSet, rho0: np.ndarray) -> tuple[float, ExpectationSet, bool]:
    """Divide non-identity expectations by lambda derived from ``rho0``.

    Corrected magnitudes may exceed one; they are reported unclamped (the
    returned flag marks when that happens) since clamping would bias the
    Mermin combinations.
    """
    lam = spam_contraction(rho0)
    corrected = eset.copy()
    exceeded = False
    for lbl in list(corrected.values):
        if lbl == "III":
            continue
        corrected.values[lbl] = corrected.values[lbl] / lam
        if abs(corrected.values[lbl]) > 1.0:
            exceeded = True
    return lam, corrected, exceeded


def nearest_psd(rho: np.ndarray) -> np.ndarray:
    """Eigenvalue clipping with trace renormalization (optional, not default)."""
    evals, evecs = np.linalg.eigh(rho)
    clipped = np.clip(evals, 0.0, None)
    if clipped.sum() <= 0:
        raise TomographyError("state has no positive weight after clipping")
    clipped /= clipped.sum()
    return (evecs * clipped) @ evecs.conj().T


def fidelity_coefficients(target: np.ndarray) -> dict[str, float]:
    """<psi|P|psi> per label, giving fidelity = (1/8) sum c_P <P>."""
    rho_t = qcore.density(target)
    return {lbl: float(np.real(np.trace(rho_t @ qcore.pauli_matrix(lbl))))
            for lbl in LABELS3}


def fidelity_from_expectations(eset: ExpectationSet, coeffs: dict[str, float]) -> float:
    return sum(coeffs[lbl] * eset.values[lbl] for lbl in LABELS3) / DIM3


@dataclass
class TomographyResult:
    expectations: ExpectationSet
    raw_rho: np.ndarray
    fidelity: float
    mermin_value: float
    mermin_variant: str
    spam_lambda: float = 1.0
    spam_corrected: bool = False
    corrected_exceeds_unit: bool = False
    fidelity_sigma: float = 0.0
    mermin_sigma: float = 0.0

    def to_json(self) -> dict:
        return {
            "expectations": {lbl: self.expectations.values[lbl] for lbl in LABELS3},
            "raw_rho": qcore.rho_to_json(self.raw_rho),
            "fidelity": self.fidelity,
            "fidelity_sigma": self.fidelity_sigma,
            "mermin": self.mermin_value,
            "mermin_sigma": self.mermin_sigma,
            "mermin_variant": self.mermin_variant,
            "spam_lambda": self.spam_lambda,
            "spam_corrected": self.spam_corrected,
            "corrected_exceeds_unit": self.corrected_exceeds_unit,
        }


def bootstrap_errors(records: list[ShotRecord], settings: list[ProjectionSetting],
                     target: np.ndarray, mermin_variant: str, *,
                     resamples: int = 1000, seed: int = 0,
                     spam_rho0: np.ndarray | None = None) -> tuple[float, float]:
    """Nonparametric bootstrap (1 sigma) of fidelity and Mermin value.

    Per-setting outcome counts are multinomially resampled; both metrics
    are linear in the pooled expectations, so each resample reduces to a
    weighted sum over the sufficient statistics.
    """
    by_id = {s.setting_id: s for s in settings}
    grouped: dict[int, np.ndarray] = {}
    for rec in records:
        c = grouped.setdefault(rec.setting_id, np.zeros(4))
        c[2 * rec.parity12 + rec.parity34] += 1
    sids = sorted(grouped)
    counts = np.array([grouped[sid] for sid in sids])
    shots = counts.sum(axis=1)
    # eigenvalue products per outcome cell (even12,even34),(even12,odd34),...
    eig = np.array([[v1, v2, v1 * v2] for p1 in (0, 1) for p2 in (0, 1)
                    for v1, v2 in [parity_eigenvalues(p1, p2)]])
    lam = 1.0 if spam_rho0 is None else spam_contraction(spam_rho0)

    # Both metrics are linear in the per-setting eigenvalue means, so build
    # the pooled-expectation map once and reduce each resample to dot products.
    src_idx = {"p12": 0, "p34": 1, "both": 2}
    lbl_idx = {lbl: k for k, lbl in enumerate(LABELS3)}
    amap = np.zeros((len(LABELS3), len(sids), 3))
    weight = np.zeros(len(LABELS3))
    for col, sid in enumerate(sids):
        for label, sign, source in by_id[sid].contributions():
            amap[lbl_idx[label], col, src_idx[source]] += shots[col] * sign
            weight[lbl_idx[label]] += shots[col]
    weight[lbl_idx["III"]] = 1.0
    amap /= weight[:, None, None]
    scale = np.array([1.0 if lbl == "III" else 1.0 / lam for lbl in LABELS3])
    coeffs = fidelity_coefficients(target)
    cvec = np.array([coeffs[lbl] for lbl in LABELS3]) * scale
    mvec = np.zeros(len(LABELS3))
    for sign, lbl in MERMIN_TERMS[mermin_variant]:
        mvec[lbl_idx[lbl]] = sign
    mvec *= scale
    fid_w = np.einsum("l,lsk->sk", cvec, amap) / DIM3
    merm_w = np.einsum("l,lsk->sk", mvec, amap)
    fid_const = coeffs["III"] / DIM3  # <III> term is exact, not resampled

    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0xB00], dtype=np.uint64)))
    probs = counts / shots[:, None]
    fids, merms = [], []
    for _ in range(resamples):
        re_counts = rng.multinomial(shots.astype(np.int64), probs)
        means = (re_counts @ eig) / shots[:, None]
        fids.append(fid_const + float((fid_w * means).sum()))
        merms.append(float((merm_w * means).sum()))
    return float(np.std(fids)), float(np.std(merms))

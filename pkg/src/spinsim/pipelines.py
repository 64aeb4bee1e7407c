"""Experiment orchestration: figure-level pipelines over the core modules.

Each experiment produces a dict of output files (CSV shot/sweep tables and
a JSON summary) as in-memory text, so the CLI, the HTTP service and tests
share byte-identical artifacts.  Every file carries a one-line JSON
provenance header that reconstructs the exact experiment spec.
"""

from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np

from . import device as dev
from . import fitting, qcore, readout, tomography
from .circuits import build_state_circuit, enumerate_settings, with_projections
from .device import DeviceConfig
from .simulator import (RunSpec, ShotRecord, SweepTable, exact_setting_expectations,
                        run_shots, run_sweep, worker_count)
from .tomography import (SettingEstimate, TomographyResult,
                         estimate_expectations, fidelity_coefficients,
                         fidelity_from_expectations, ghz_frame_expectations,
                         ghz_frame_rho, lhv_bound, linear_inversion, mermin,
                         records_to_estimates, spam_correct)

EXPERIMENTS = (
    "tomo-cluster", "tomo-ghz", "tomo-init", "lifetime", "exchange-sweep",
    "coherence-rabi", "coherence-ramsey", "coherence-hahn", "readout-cal",
    "spam-bench",
)

SHOT_COLUMNS = ("setting_id", "parity12", "parity34", "signal1", "signal2",
                "attempts", "shot_seed")

_TOMO_KINDS = {
    "tomo-cluster": ("cluster3", "Cluster"),
    "tomo-ghz": ("ghz3", "GHZ"),
    "tomo-init": ("init3", ""),
}


class PipelineError(ValueError):
    pass


class SchemaError(PipelineError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully serialized run description; embedded in every output header."""

    experiment: str
    seed: int = 0
    shots: int = 1000
    mode: str = "sequential"
    config_path: str = ""
    out_dir: str = ""
    qubit: int = 1
    periods: float = 10.0
    tau_max_s: float = 60e-6
    tau_points: int = 13
    noise: bool = True
    fast_dephasing: bool = True
    spam_reference: str = ""
    bootstrap_resamples: int = 1000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise PipelineError(f"unknown experiment {self.experiment!r}")
        if self.shots < 0:
            raise PipelineError("shots must be >= 0 (0 selects the exact Born mode)")

    def run_spec(self) -> RunSpec:
        return RunSpec(max(self.shots, 1), self.seed, self.noise, self.fast_dephasing)

    def provenance(self) -> dict:
        return asdict(self)


def resolve_config(spec: ExperimentSpec, config_text: str | None = None) -> DeviceConfig:
    if config_text is not None:
        config = dev.parse_config(config_text, base=dev.paper_default_config(spec.mode))
    elif spec.config_path:
        config = dev.load_config(spec.config_path, base=dev.paper_default_config(spec.mode))
    else:
        config = dev.paper_default_config(spec.mode)
    return dev.with_mode(config, spec.mode)


# ---------------------------------------------------------------------------
# deterministic text artifacts


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_text(columns, rows, spec: ExperimentSpec) -> str:
    buf = io.StringIO()
    buf.write("# spinsim " + json.dumps(spec.provenance(), sort_keys=True) + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def parse_csv(text: str) -> tuple[dict, list[str], list[list[float]]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaError("empty CSV input")
    header = {}
    while lines and lines[0].startswith("#"):
        raw = lines.pop(0)[1:].strip()
        if raw.startswith("spinsim "):
            header = json.loads(raw[len("spinsim "):])
    if not lines:
        raise SchemaError("CSV has no column row")
    columns = lines.pop(0).split(",")
    rows = []
    for ln in lines:
        parts = ln.split(",")
        if len(parts) != len(columns):
            raise SchemaError(f"row width {len(parts)} != {len(columns)} columns")
        rows.append([float(p) for p in parts])
    return header, columns, rows


def sweep_csv(table: SweepTable, spec: ExperimentSpec) -> str:
    return csv_text(table.columns, table.rows, spec)


def records_csv(records: list[ShotRecord], spec: ExperimentSpec) -> str:
    rows = [(r.setting_id, r.parity12, r.parity34, r.signal1, r.signal2,
             r.attempts, r.shot_seed) for r in records]
    return csv_text(SHOT_COLUMNS, rows, spec)


def records_from_csv(text: str) -> tuple[dict, list[ShotRecord]]:
    header, columns, rows = parse_csv(text)
    if list(columns) != list(SHOT_COLUMNS):
        raise SchemaError(f"expected shot columns {SHOT_COLUMNS}, got {columns}")
    records = [
        ShotRecord(int(r[0]), int(r[1]), int(r[2]), r[3], r[4], int(r[5]), int(r[6]))
        for r in rows
    ]
    return header, records


# ---------------------------------------------------------------------------
# tomography experiments


def _tomo_target(experiment: str) -> np.ndarray:
    if experiment == "tomo-cluster":
        return qcore.cluster_state()
    if experiment == "tomo-ghz":
        return qcore.ghz_state()
    return qcore.ket([1, 1, 1])


def simulate_tomography(spec: ExperimentSpec, config: DeviceConfig):
    """Run all 360 settings; returns (records, estimates)."""
    kind, _ = _TOMO_KINDS[spec.experiment]
    state = build_state_circuit(kind, config)
    settings = enumerate_settings()

    if spec.shots == 0:
        estimates = []
        for setting in settings:
            circ = with_projections(state, setting, config)
            e12, e34, ej = exact_setting_expectations(circ, config, None)
            estimates.append(SettingEstimate(setting, 1.0, e12, e34, ej))
        return [], estimates

    rs = spec.run_spec()

    def one(setting):
        circ = with_projections(state, setting, config)
        return run_shots(circ, rs, config)

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(one, settings))
    else:
        chunks = [one(s) for s in settings]
    records = [r for chunk in chunks for r in chunk]
    return records, records_to_estimates(records, settings)


def analyze_tomography(experiment: str, estimates, records, spec: ExperimentSpec,
                       spam_rho0: np.ndarray | None = None) -> dict:
    target = _tomo_target(experiment)
    variant = _TOMO_KINDS[experiment][1]
    eset = estimate_expectations(estimates)
    rho = linear_inversion(eset)
    coeffs = fidelity_coefficients(target)
    fid = fidelity_from_expectations(eset, coeffs)
    result = TomographyResult(
        expectations=eset,
        raw_rho=rho,
        fidelity=fid,
        mermin_value=mermin(eset, variant) if variant else 0.0,
        mermin_variant=variant,
    )
    summary = {
        "experiment": experiment,
        "spec": spec.provenance(),
        "result": result.to_json(),
        "lhv_bounds": {v: lhv_bound(v) for v in ("GHZ", "Cluster", "ClusterPrime")},
        "purity": qcore.purity(rho),
    }
    if experiment == "tomo-cluster":
        ghz_eset = ghz_frame_expectations(eset)
        summary["ghz_frame"] = {
            "fidelity": fidelity_from_expectations(
                ghz_eset, fidelity_coefficients(qcore.ghz_state())),
            "mermin": mermin(ghz_eset, "GHZ"),
            "rho": qcore.rho_to_json(ghz_frame_rho(rho)),
        }
    if spam_rho0 is not None and variant:
        lam, corrected, exceeded = spam_correct(eset, spam_rho0)
        corr_rho = linear_inversion(corrected)
        summary["spam_corrected"] = {
            "lambda": lam,
            "fidelity": fidelity_from_expectations(corrected, coeffs),
            "mermin": mermin(corrected, variant),
            "exceeds_unit": exceeded,
            "rho": qcore.rho_to_json(corr_rho),
        }
    if records and spec.bootstrap_resamples > 0:
        fsig, msig = tomography.bootstrap_errors(
            records, enumerate_settings(), target,
            variant or "Cluster", resamples=spec.bootstrap_resamples,
            seed=spec.seed, spam_rho0=spam_rho0)
        summary["result"]["fidelity_sigma"] = fsig
        summary["result"]["mermin_sigma"] = msig
    return summary


def _load_spam_reference(text: str) -> np.ndarray:
    """Accept an init-state summary JSON or a raw shot CSV."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        summary = json.loads(text)
        try:
            return qcore.rho_from_json(summary["result"]["raw_rho"])
        except KeyError as exc:
            raise SchemaError("summary lacks result.raw_rho") from exc
    header, records = records_from_csv(text)
    estimates = records_to_estimates(records, enumerate_settings())
    return linear_inversion(estimate_expectations(estimates))


# ---------------------------------------------------------------------------
# sweep experiments


def _fit_lifetime(table: SweepTable) -> dict:
    t = table.column("wait_total_s")
    fits = {}
    # ideal cluster-frame signs make every term start near +1
    signs = {"XXX": 1.0, "XYZ": 1.0, "ZXZ": -1.0, "ZYX": 1.0}
    for name, sign in signs.items():
        res = fitting.fit_hahn(t, sign * table.column(f"exp_{name}"), exponent=1.0)
        fits[f"t2_{name.lower()}"] = res.params["t2_hahn"]
    res_m = fitting.fit_hahn(t, table.column("mermin_cluster") / 4.0, exponent=1.0)
    fits["t2_mermin"] = res_m.params["t2_hahn"]
    four = [fits[f"t2_{n.lower()}"] for n in signs]
    fits["t2_pauli_mean"] = float(np.mean(four))
    fits["mermin_over_xxx"] = fits["t2_mermin"] / fits["t2_xxx"]
    fits["mermin_over_pauli_mean"] = fits["t2_mermin"] / fits["t2_pauli_mean"]
    return fits


def _exchange_metrics(table: SweepTable) -> dict:
    x = table.column("periods")
    m = table.column("mermin_cluster")
    mp = table.column("mermin_cluster_prime")
    first = x <= 1.0
    out = {
        "argmax_mermin_first_period": float(x[first][np.argmax(m[first])]),
        "argmax_mermin_prime_first_period": float(x[first][np.argmax(mp[first])]),
        "grid_step": float(x[1] - x[0]) if x.size > 1 else 0.0,
    }
    if x.max() >= 5.0:
        early = (x >= 0.0) & (x <= 1.0)
        late = (x >= 4.0) & (x <= 5.0)
        out["envelope_first_period"] = float(np.max(np.abs(m[early])))
        out["envelope_fifth_period"] = float(np.max(np.abs(m[late])))
        out["envelope_ratio_p5_p1"] = out["envelope_fifth_period"] / max(
            out["envelope_first_period"], 1e-12)
    return out


# ---------------------------------------------------------------------------
# readout experiments


_CAL_MODEL = readout.PsbWindowModel(
    window1=(0.30, 0.70),
    window2=(0.35, 0.75),
    strips1=((0.55, 0.62),),
    strips2=((0.10, 0.18),),
    slope1=0.05,
    slope2=0.05,
)


def _cal_grid():
    return (tuple(np.round(np.linspace(0.0, 1.0, 41), 6)),
            tuple(np.round(np.linspace(0.0, 1.0, 41), 6)))


def _calibration_summary(spec: ExperimentSpec, config: DeviceConfig):
    grid = _cal_grid()
    res = readout.calibration_scan(_CAL_MODEL, grid, None, config)
    oracle = np.zeros_like(res.window_mask)
    for i, a in enumerate(grid[0]):
        for j, b in enumerate(grid[1]):
            oracle[i, j] = _CAL_MODEL.in_window(a, b)
    rows = []
    for i, a in enumerate(grid[0]):
        for j, b in enumerate(grid[1]):
            rows.append((a, b, res.map1[i, j], res.map2[i, j], res.sum_map[i, j]))
    csv = csv_text(("detuning1", "detuning2", "thresholded1", "thresholded2", "sum"),
                   rows, spec)

    # independent Rabi verification at the chosen read point
    rabi_fits = {}
    for q in range(4):
        f = config.qubits[q].rabi_hz
        grid_t = np.linspace(0.0, 12.0 / f, 181)
        table = run_sweep("rabi", grid_t, spec.run_spec(), config, qubit=q)
        fit = fitting.fit_rabi(table.column("duration_s"), table.column("p_flip"))
        rabi_fits[f"q{q + 1}"] = {
            "fitted_hz": fit.params["f_rabi"],
            "expected_hz": f,
            "rel_error": abs(fit.params["f_rabi"] - f) / f,
        }
    summary = {
        "experiment": spec.experiment,
        "spec": spec.provenance(),
        "window_points": int(res.window_mask.sum()),
        "window_equals_oracle": bool(np.array_equal(res.window_mask, oracle)),
        "read_point": list(res.read_point),
        "rabi_verification": rabi_fits,
        "rabi_max_rel_error": max(v["rel_error"] for v in rabi_fits.values()),
    }
    return summary, {"cal_map.csv": csv}


def _signal_samples(config: DeviceConfig, n: int, seed: int):
    """Terminal-readout signal pairs over an equal parity mixture."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0x51], dtype=np.uint64)))
    o1 = rng.integers(0, 2, size=n)
    o2 = rng.integers(0, 2, size=n)
    z = rng.normal(size=(n, 2))
    params = config.readout
    s1 = np.array([readout.signal_value(int(a), 1, params, z[i, 0], int(b))
                   for i, (a, b) in enumerate(zip(o1, o2))])
    s2 = np.array([readout.signal_value(int(b), 2, params, z[i, 1], int(a))
                   for i, (a, b) in enumerate(zip(o1, o2))])
    return s1, s2


def _spam_bench_summary(spec: ExperimentSpec, config: DeviceConfig):
    trials = spec.shots if spec.shots > 0 else 100000
    out: dict = {"experiment": spec.experiment, "spec": spec.provenance()}
    files: dict[str, str] = {}
    for mode in ("sequential", "simultaneous"):
        cfg = dev.with_mode(config, mode)
        rng = np.random.Generator(
            np.random.Philox(key=np.array([spec.seed, 0xA77 + (mode == "simultaneous")],
                                          dtype=np.uint64)))
        attempts = [readout.heralded_init_bits(cfg.init, cfg.readout, rng)[1]
                    for _ in range(trials)]
        n_signals = max(trials, 400000)
        s1, s2 = _signal_samples(cfg, n_signals, spec.seed)
        fit1 = fitting.fit_bimodal(s1)
        fit2 = fitting.fit_bimodal(s2)
        corr = float(np.corrcoef(s1, s2)[0, 1])
        dur = readout.sequence_duration(mode, 10e-6, 1, cfg)
        out[mode] = {
            "mean_attempts": float(np.mean(attempts)),
            "joint_success": cfg.init.p_even12 * cfg.init.p_even34,
            "snr1": fit1.extra["snr"],
            "snr2": fit2.extra["snr"],
            "charge_fidelity1": fit1.extra["charge_fidelity"],
            "charge_fidelity2": fit2.extra["charge_fidelity"],
            "charge_fidelity_mean": (fit1.extra["charge_fidelity"]
                                     + fit2.extra["charge_fidelity"]) / 2.0,
            "signal_correlation": corr,
            "sequence_duration_s": dur,
        }
        for idx, s in ((1, s1), (2, s2)):
            files[f"signals_{mode}_set{idx}.csv"] = csv_text(
                ("signal",), [(v,) for v in s[:50000]], spec)
    out["attempts_increase"] = (out["simultaneous"]["mean_attempts"]
                                - out["sequential"]["mean_attempts"])
    out["simultaneous_cellcount_invariant"] = (
        readout.sequence_duration("simultaneous", 10e-6, 1, config, n_cells=1)
        == readout.sequence_duration("simultaneous", 10e-6, 1, config, n_cells=2))
    out["sequential_scales_with_cells"] = (
        readout.sequence_duration("sequential", 10e-6, 1, config, n_cells=2)
        > readout.sequence_duration("sequential", 10e-6, 1, config, n_cells=1))
    return out, files


# ---------------------------------------------------------------------------
# top-level entry points


def run_experiment(spec: ExperimentSpec, *, config_text: str | None = None,
                   spam_reference_text: str | None = None) -> tuple[dict, dict[str, str]]:
    """Execute one experiment; returns (summary, {filename: content}).

    ``config_text``/``spam_reference_text`` allow passing file contents in
    place of the paths named by the spec (used by the HTTP transport);
    outputs depend only on the spec plus those contents.
    """
    config = resolve_config(spec, config_text)
    files: dict[str, str] = {}

    if spec.experiment in _TOMO_KINDS:
        records, estimates = simulate_tomography(spec, config)
        spam_rho0 = None
        if spam_reference_text is not None:
            spam_rho0 = _load_spam_reference(spam_reference_text)
        elif spec.spam_reference:
            with open(spec.spam_reference, "r", encoding="utf-8") as fh:
                spam_rho0 = _load_spam_reference(fh.read())
        summary = analyze_tomography(spec.experiment, estimates, records, spec, spam_rho0)
        if records:
            files["shots.csv"] = records_csv(records, spec)

    elif spec.experiment == "lifetime":
        taus = np.linspace(0.0, spec.tau_max_s, spec.tau_points)
        table = run_sweep("lifetime", taus, spec.run_spec(), config)
        files["sweep.csv"] = sweep_csv(table, spec)
        summary = {
            "experiment": spec.experiment,
            "spec": spec.provenance(),
            "fits": _fit_lifetime(table),
        }

    elif spec.experiment == "exchange-sweep":
        step = 1.0 / 12.0
        grid = np.round(np.arange(0.0, spec.periods + step / 2, step), 9)
        table = run_sweep("exchange_sweep", grid, spec.run_spec(), config)
        files["sweep.csv"] = sweep_csv(table, spec)
        summary = {
            "experiment": spec.experiment,
            "spec": spec.provenance(),
            "metrics": _exchange_metrics(table),
        }

    elif spec.experiment.startswith("coherence-"):
        kind = spec.experiment.split("-", 1)[1]
        qp = config.qubits[spec.qubit]
        if kind == "rabi":
            grid = np.linspace(0.0, 12.0 / qp.rabi_hz, 181)
        elif kind == "ramsey":
            grid = np.linspace(0.0, 2.5 * qp.t2_star_s, 41)
        else:
            grid = np.linspace(0.0, qp.t2_hahn_s, 31)
        table = run_sweep(kind, grid, spec.run_spec(), config, qubit=spec.qubit)
        files["sweep.csv"] = sweep_csv(table, spec)
        summary = {
            "experiment": spec.experiment,
            "spec": spec.provenance(),
            "fit": _fit_coherence(kind, table, config, spec.qubit),
        }

    elif spec.experiment == "readout-cal":
        summary, files = _calibration_summary(spec, config)

    elif spec.experiment == "spam-bench":
        summary, files = _spam_bench_summary(spec, config)

    else:  # pragma: no cover - guarded by ExperimentSpec
        raise PipelineError(spec.experiment)

    files["summary.json"] = json_text(summary)
    return summary, files


def _fit_coherence(kind: str, table: SweepTable, config: DeviceConfig, qubit: int) -> dict:
    qp = config.qubits[qubit]
    if kind == "rabi":
        fit = fitting.fit_rabi(table.column("duration_s"), table.column("p_flip"))
        return {
            "f_rabi_hz": fit.params["f_rabi"],
            "t2_rabi_s": fit.params["t2_rabi"],
            "expected_f_rabi_hz": qp.rabi_hz,
            "expected_t2_rabi_s": qp.t2_rabi_s,
            "f_rel_error": abs(fit.params["f_rabi"] - qp.rabi_hz) / qp.rabi_hz,
            "t2_rel_error": abs(fit.params["t2_rabi"] - qp.t2_rabi_s) / qp.t2_rabi_s,
            "rabi_q_factor": fit.params["t2_rabi"] * fit.params["f_rabi"],
        }
    t = table.column("t_free_s")
    bloch = table.column("bloch_length")
    if kind == "ramsey":
        fit = fitting.fit_ramsey(t, bloch)
        return {
            "t2_star_s": fit.params["t2_star"],
            "expected_t2_star_s": qp.t2_star_s,
            "t2_rel_error": abs(fit.params["t2_star"] - qp.t2_star_s) / qp.t2_star_s,
        }
    fit = fitting.fit_hahn(t, bloch, exponent=config.hahn_exponent)
    return {
        "t2_hahn_s": fit.params["t2_hahn"],
        "expected_t2_hahn_s": qp.t2_hahn_s,
        "t2_rel_error": abs(fit.params["t2_hahn"] - qp.t2_hahn_s) / qp.t2_hahn_s,
    }


# ---------------------------------------------------------------------------
# analyze: re-run estimation on stored artifacts


def analyze(kind: str, inputs: dict[str, str], *, spam_reference: str | None = None,
            resamples: int = 1000) -> dict:
    """Re-run tomography/fitting on stored CSVs without re-simulation."""
    if kind == "tomo":
        text = _single_input(inputs)
        header, records = records_from_csv(text)
        if not header:
            raise SchemaError("shot CSV lacks a provenance header")
        spec = ExperimentSpec(**{**header, "bootstrap_resamples": resamples})
        estimates = records_to_estimates(records, enumerate_settings())
        spam_rho0 = _load_spam_reference(spam_reference) if spam_reference else None
        return analyze_tomography(spec.experiment, estimates, records, spec, spam_rho0)
    if kind == "lifetime-fits":
        header, columns, rows = parse_csv(_single_input(inputs))
        table = SweepTable(tuple(columns), tuple(tuple(r) for r in rows))
        return {"experiment": "lifetime", "fits": _fit_lifetime(table)}
    if kind.startswith("fit-"):
        return fit_csv(kind[4:], _single_input(inputs))
    raise PipelineError(f"unknown analyze kind {kind!r}")


def _single_input(inputs: dict[str, str]) -> str:
    if len(inputs) != 1:
        raise SchemaError(f"expected exactly one input file, got {sorted(inputs)}")
    return next(iter(inputs.values()))


def fit_csv(model: str, text: str) -> dict:
    """Generic `fit <model> <csv>` entry: two columns x,y (or one signal col)."""
    header, columns, rows = parse_csv(text)
    data = np.array(rows, dtype=float)
    if model == "bimodal":
        res = fitting.fit_bimodal(data[:, 0])
    else:
        if data.shape[1] < 2:
            raise SchemaError(f"{model} fit needs two CSV columns")
        x, y = data[:, 0], data[:, 1]
        if model == "rabi":
            res = fitting.fit_rabi(x, y)
        elif model == "ramsey":
            res = fitting.fit_ramsey(x, y)
        elif model == "hahn":
            res = fitting.fit_hahn(x, y)
        elif model == "exchange":
            res = fitting.fit_exchange(x, y)
        else:
            raise PipelineError(f"unknown fit model {model!r}")
    return res.to_json()


# ---------------------------------------------------------------------------
# report: compare summaries against the reference-values data file


def load_reference_values() -> dict:
    with resources.files("spinsim.data").joinpath("reference_values.json").open() as fh:
        return json.load(fh)


def _dig(obj, path: str):
    cur = obj
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur


def _matches(entry: dict, summary: dict) -> bool:
    if summary.get("experiment") != entry["experiment"]:
        return False
    spec = summary.get("spec", {})
    for key, want in entry.get("spec_match", {}).items():
        if spec.get(key) != want:
            return False
    return True


def _check(entry: dict, value) -> bool:
    cmp = entry.get("cmp", "approx")
    expect = entry.get("expect")
    if value is None:
        return False
    if cmp == "approx":
        tol = entry.get("atol", abs(expect) * entry.get("rtol", 0.0))
        return abs(value - expect) <= tol
    if cmp == "ge":
        return value >= expect
    if cmp == "le":
        return value <= expect
    if cmp == "true":
        return bool(value)
    raise PipelineError(f"unknown comparison {cmp!r}")


def report(summaries: list[dict]) -> tuple[list[str], int]:
    """Pass/fail lines for every reference entry matching a summary."""
    ref = load_reference_values()
    lines = []
    failures = 0
    for entry in ref["checks"]:
        matched = [s for s in summaries if _matches(entry, s)]
        if not matched:
            continue
        for summary in matched:
            value = _dig(summary, entry["metric"])
            if entry.get("level", "bind") == "info":
                lines.append(f"INFO {entry['name']}: computed={value} reference={entry.get('expect')}")
                continue
            ok = _check(entry, value)
            status = "PASS" if ok else "FAIL"
            if not ok:
                failures += 1
            lines.append(
                f"{status} {entry['name']}: computed={value} expected "
                f"{entry.get('cmp', 'approx')} {entry.get('expect')}")
    # reproducibility: identical specs must have produced identical summaries
    seen: dict[str, dict] = {}
    for summary in summaries:
        key = json.dumps(summary.get("spec", {}), sort_keys=True)
        if key in seen:
            same = json_text(seen[key]) == json_text(summary)
            status = "PASS" if same else "FAIL"
            if not same:
                failures += 1
            lines.append(f"{status} reproducibility: "
                         f"{summary.get('experiment')} duplicate-spec summaries "
                         f"{'match' if same else 'differ'}")
        else:
            seen[key] = summary
    if not lines:
        lines.append("no reference checks matched the provided summaries")
    return lines, failures

"""Command-line client for the simulation pipelines.

Runs experiments in-process by default; with ``--server URL`` the same
subcommands proxy through a running spinsim HTTP service and write the
returned artifacts locally, producing byte-identical files either way.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import pipelines
from .circuits import STATE_KINDS, build_state_circuit, circuit_to_json
from .device import paper_default_config, load_config
from .pipelines import ExperimentSpec


def _write_files(out_dir: str, files: dict[str, str]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name in sorted(files):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(files[name])
        print(f"wrote {path}")


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _post(server: str, route: str, payload: dict) -> dict:
    import httpx

    resp = httpx.post(server.rstrip("/") + route, json=payload, timeout=3600.0)
    if resp.status_code != 200:
        raise SystemExit(f"server error {resp.status_code}: {resp.text}")
    return resp.json()


def _cmd_run(args) -> int:
    out_dir = args.out or os.path.join("out", args.experiment)
    if args.server:
        payload = {
            "experiment": args.experiment, "seed": args.seed, "shots": args.shots,
            "mode": args.mode, "qubit": args.qubit, "periods": args.periods,
            "tau_max_s": args.tau_max, "tau_points": args.tau_points,
            "noise": not args.noiseless, "fast_dephasing": not args.no_fast_dephasing,
            "bootstrap_resamples": args.bootstrap,
            "config_path": args.config or "",
            "config_text": _read(args.config) if args.config else None,
            "spam_reference": args.spam_reference or "",
            "spam_reference_text": _read(args.spam_reference) if args.spam_reference else None,
        }
        data = _post(args.server, "/experiments/run", payload)
        files = data["files"]
    else:
        spec = ExperimentSpec(
            experiment=args.experiment, seed=args.seed, shots=args.shots,
            mode=args.mode, config_path=args.config or "", out_dir=out_dir,
            qubit=args.qubit, periods=args.periods, tau_max_s=args.tau_max,
            tau_points=args.tau_points, noise=not args.noiseless,
            fast_dephasing=not args.no_fast_dephasing,
            spam_reference=args.spam_reference or "",
            bootstrap_resamples=args.bootstrap,
        )
        _, files = pipelines.run_experiment(spec)
    _write_files(out_dir, files)
    return 0


def _cmd_analyze(args) -> int:
    inputs = {os.path.basename(p): _read(p) for p in args.inputs}
    spam_text = _read(args.spam_reference) if args.spam_reference else None
    if args.server:
        data = _post(args.server, "/analyze", {
            "kind": args.kind, "inputs": inputs,
            "spam_reference_text": spam_text, "resamples": args.resamples,
        })
        summary = data["summary"]
    else:
        summary = pipelines.analyze(args.kind, inputs, spam_reference=spam_text,
                                    resamples=args.resamples)
    text = pipelines.json_text(summary)
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_report(args) -> int:
    summaries = [json.loads(_read(p)) for p in args.summaries]
    if args.server:
        data = _post(args.server, "/report", {"summaries": summaries})
        lines, failures = data["lines"], data["failures"]
    else:
        lines, failures = pipelines.report(summaries)
    for line in lines:
        print(line)
    return 1 if failures else 0


def _cmd_circuit(args) -> int:
    if args.action != "dump":
        raise SystemExit(f"unknown circuit action {args.action!r}")
    config = (load_config(args.config) if args.config
              else paper_default_config(args.mode))
    circ = build_state_circuit(args.kind, config, wait_s=args.wait,
                               j2_scale=args.j2_scale, j3_scale=args.j3_scale)
    print(circuit_to_json(circ))
    return 0


def _cmd_fit(args) -> int:
    text = _read(args.csv)
    if args.server:
        data = _post(args.server, "/fit", {"model": args.model, "csv_text": text})
        result = data["result"]
    else:
        result = pipelines.fit_csv(args.model, text)
    print(pipelines.json_text(result), end="")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("spinsim.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinsim")
    p.add_argument("--server", default=os.environ.get("SPINSIM_SERVER", ""),
                   help="proxy through a running spinsim service at this URL")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write its artifacts")
    run.add_argument("experiment", choices=pipelines.EXPERIMENTS)
    run.add_argument("--config", help="device config file (flat key = value)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--shots", type=int, default=1000,
                     help="shots per setting / realizations per point (0 = exact Born)")
    run.add_argument("--mode", choices=("sequential", "simultaneous"), default="sequential")
    run.add_argument("--out", help="output directory (default out/<experiment>)")
    run.add_argument("--qubit", type=int, default=1, help="physical qubit index 0..3")
    run.add_argument("--periods", type=float, default=10.0)
    run.add_argument("--tau-max", type=float, default=60e-6)
    run.add_argument("--tau-points", type=int, default=13)
    run.add_argument("--noiseless", action="store_true")
    run.add_argument("--no-fast-dephasing", action="store_true")
    run.add_argument("--spam-reference", help="init-state shots.csv or summary.json")
    run.add_argument("--bootstrap", type=int, default=1000,
                     help="bootstrap resamples for error bars (0 disables)")
    run.set_defaults(func=_cmd_run)

    an = sub.add_parser("analyze", help="re-analyze stored shot/sweep files")
    an.add_argument("kind", help="tomo | lifetime-fits | fit-<model>")
    an.add_argument("inputs", nargs="+")
    an.add_argument("--spam-reference")
    an.add_argument("--resamples", type=int, default=1000)
    an.add_argument("--out")
    an.set_defaults(func=_cmd_analyze)

    rep = sub.add_parser("report", help="check summaries against reference values")
    rep.add_argument("summaries", nargs="+")
    rep.set_defaults(func=_cmd_report)

    circ = sub.add_parser("circuit", help="circuit utilities")
    circ.add_argument("action", choices=("dump",))
    circ.add_argument("kind", choices=STATE_KINDS)
    circ.add_argument("--config")
    circ.add_argument("--mode", default="sequential")
    circ.add_argument("--wait", type=float, default=0.0)
    circ.add_argument("--j2-scale", type=float, default=1.0)
    circ.add_argument("--j3-scale", type=float, default=1.0)
    circ.set_defaults(func=_cmd_circuit)

    fit = sub.add_parser("fit", help="fit a named model to a CSV file")
    fit.add_argument("model", choices=("rabi", "ramsey", "hahn", "exchange", "bimodal"))
    fit.add_argument("csv")
    fit.set_defaults(func=_cmd_fit)

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(func=_cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (pipelines.PipelineError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

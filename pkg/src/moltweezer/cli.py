"""Command-line front end.

Commands: spectrum-separation, spectrum-field, quench, pulse, gate-optimize
and validate. Exit codes: 0 success, 1 invalid input, 2 numerical failure
(a ``diagnostics.json`` is written to the output directory), 3 I/O failure.
Outputs are written only once a command has finished, so failures leave no
partial tables behind.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_override
from .dynamics import PulseSpec, dominant_branch, propagate
from .errors import DimensionError, MolTweezerError, NumericalError, ValidationError
from .gate import GateTarget, build_qubit_basis, fidelities, optimize, pulse_waveform, simulate
from .hamiltonian import (
    build,
    classify_states,
    diagonalize,
    find_anticrossings,
    internal_block,
    reference_internal,
    reference_vector,
    scan_field,
    scan_separation,
)
from .output import OutputSet, format_json, format_table
from .spatial import SpatialBasis, cached_spatial_coupling

log = logging.getLogger("moltweezer")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
ENV_OUTPUT = "MOLTWEEZER_OUTPUT"
ENV_CACHE = "MOLTWEEZER_CACHE"
DEFAULT_OUTPUT = "moltweezer-output"
COMMANDS = ("spectrum-separation", "spectrum-field", "quench", "pulse", "gate-optimize", "validate")
E_UNIT = "[hbar_omega]"


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation errors (exit 1), not argparse's exit 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError("arguments", message)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="TOML run configuration (defaults to the shipped one)")
    common.add_argument("--output", "-o", help=f"output directory (default ${ENV_OUTPUT} or ./{DEFAULT_OUTPUT})")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config key")
    common.add_argument("--preset", help="molecule preset name")
    common.add_argument("--M", type=int, help="total projection m1 + m2")
    common.add_argument("--parity", help="exchange parity block: auto, none, 1 or -1")
    common.add_argument("--beta", type=float, help="static field (spectra) or quench field (quench)")
    common.add_argument("--beta0", type=float, help="pulse amplitude")
    common.add_argument("--tau", help="pulse duration, e.g. 150ns, 2us, 1ms")
    common.add_argument("--separation", type=float, help="trap separation in a_ho")
    common.add_argument("--n-max", type=int, dest="n_max")
    common.add_argument("--j-max", type=int, dest="j_max")
    common.add_argument("--seed", type=int)
    common.add_argument("--max-iters", type=int, dest="max_iters")
    common.add_argument("--cache-dir", dest="cache_dir", help=f"spatial-coupling cache (default ${ENV_CACHE})")
    common.add_argument("--workers", type=int, default=1, help="threads for spectrum scans")
    common.add_argument("--verbose", "-v", action="store_true")
    parser = _Parser(prog="moltweezer", description="Polar molecules in optical tweezers.")
    parser.add_argument("--version", action="version", version=f"moltweezer {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "spectrum-separation": "levels versus trap separation",
        "spectrum-field": "levels versus electric field",
        "quench": "amplitudes after a sudden field quench",
        "pulse": "logical-state dynamics under a shaped pulse",
        "gate-optimize": "CRAB search for a controlled-phase gate",
        "validate": "check a configuration and report basis sizes",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _overrides(args) -> list[tuple[str, str, object]]:
    out = [parse_override(text) for text in args.set]
    flags = {
        "preset": ("molecule", "preset"),
        "M": ("block", "M"),
        "beta0": ("pulse", "beta0"),
        "tau": ("pulse", "tau"),
        "separation": ("trap", "separation"),
        "n_max": ("numerics", "n_max"),
        "j_max": ("numerics", "j_max"),
        "seed": ("gate", "seed"),
        "max_iters": ("gate", "max_iters"),
    }
    for attr, (section, key) in flags.items():
        value = getattr(args, attr)
        if value is not None:
            out.append((section, key, value))
    if args.parity is not None:
        p = args.parity
        out.append(("block", "parity", int(p) if p in ("1", "-1", "+1") else p))
    if args.beta is not None:
        if args.command == "quench":
            out.append(("pulse", "beta0", args.beta))
        else:
            out.append(("field", "beta", args.beta))
    if args.command == "quench":
        out.append(("pulse", "kind", "quench"))
        out.append(("pulse", "fourier", []))
    return out


# ---------------------------------------------------------------------------
# helpers


def _coupling(cfg: RunConfig, cache_dir):
    p = cfg.params()
    n_max = cfg["numerics"]["n_max"]
    return cached_spatial_coupling(
        SpatialBasis(n_max), p.lperp_over_aho, cfg["numerics"]["quadrature_tolerance"], cache_dir=cache_dir
    )


def _block_parity(cfg: RunConfig, M: int, dynamics: bool) -> int | None:
    """'auto' picks the lowest trap state's block for spectra and |+> for M = 1 dynamics."""
    p = cfg["block"]["parity"]
    if p == "auto":
        return 1 if (dynamics or M != 1) else -1
    return None if p == "none" else p


def _sidecar(cfg: RunConfig, command: str, argv, results: dict, files) -> str:
    return format_json(
        {
            "command": command,
            "argv": list(argv),
            "version": __version__,
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "config": cfg.data,
            "files": sorted(files),
            "results": results,
        }
    )


def _dim_report(cfg: RunConfig, M: int, parity) -> dict:
    internal, _, transform = internal_block(cfg["numerics"]["j_max"], M, parity)
    n_int = transform.shape[1]
    dim = (cfg["numerics"]["n_max"] + 1) * n_int
    # h0, w, eigenvectors and the eigensolver workspace, float64
    mem = 4 * dim * dim * 8
    return {"M": M, "parity": parity, "internal_dim": n_int, "dim": dim, "memory_bytes": mem}


def _check_cap(cfg: RunConfig, report: dict):
    cap = cfg["numerics"]["dim_cap"]
    if report["dim"] > cap:
        raise DimensionError(
            "numerics.n_max",
            f"basis dimension {report['dim']} = {cfg['numerics']['n_max'] + 1} x {report['internal_dim']} exceeds "
            f"dim_cap {cap}; lower n_max or override with --set numerics.dim_cap={report['dim']}",
        )


# ---------------------------------------------------------------------------
# commands


def _spectrum(cfg: RunConfig, command: str, out: OutputSet, cache_dir, workers) -> tuple[str, dict]:
    num = cfg["numerics"]
    M = cfg["block"]["M"]
    parity = _block_parity(cfg, M, dynamics=False)
    _check_cap(cfg, _dim_report(cfg, M, parity))
    params = cfg.params()
    coupling = _coupling(cfg, cache_dir)
    kw = dict(
        j_max=num["j_max"], n_max=num["n_max"], parity=parity, floor=num["floor"], coupling=coupling, workers=workers
    )
    if command == "spectrum-separation":
        scan = scan_separation(params, M, cfg.grid("a"), num["k"], **kw)
        pname = "a[a_ho]"
    else:
        scan = scan_field(params, M, cfg.grid("beta"), num["k"], **kw)
        pname = "beta[1]"
    offset = scan.metadata["branch_offset"]
    k = scan.k
    stem = f"{command.replace('-', '_')}_M{M}"
    delim = cfg["output"]["delimiter"]

    cols = [pname] + [f"E{i + 1}{E_UNIT}" for i in range(k)] + [f"char{i + 1}" for i in range(k)]
    cols += ["trap_index", "trap_overlap", f"E_trap{E_UNIT}"]
    rows = []
    for i, x in enumerate(scan.grid):
        e = scan.energies[i] - offset
        rows.append([x, *e, *scan.characters[i], int(scan.trap_index[i]) + 1, scan.trap_overlap[i], e[scan.trap_index[i]]])
    out.add(f"{stem}.tsv", format_table(cols, rows, delim))

    cols = [pname] + [f"branch{i + 1}{E_UNIT}" for i in range(k)] + [f"branch{i + 1}_char" for i in range(k)]
    rows = [[x, *(scan.tracked[i] - offset), *scan.tracked_characters[i]] for i, x in enumerate(scan.grid)]
    out.add(f"{stem}_tracked.tsv", format_table(cols, rows, delim))

    crossings = find_anticrossings(scan, num["gap_max"], track="trap") if k >= 2 else []
    cols = [pname, f"gap{E_UNIT}", "level_lo", "level_hi", "warning"]
    rows = [[c.parameter, c.gap, c.branches[0] + 1, c.branches[1] + 1, c.warning or ""] for c in crossings]
    out.add(f"{stem}_anticrossings.tsv", format_table(cols, rows, delim))
    results = {
        "M": M,
        "parity": parity,
        "energy_offset": offset,
        "anticrossing_count": len(crossings),
        "anticrossings": [{"parameter": c.parameter, "gap": c.gap, "warning": c.warning} for c in crossings],
        "scan": {key: v for key, v in scan.metadata.items() if key != "params"},
    }
    log.info("%s: %d trap-state anticrossings", stem, len(crossings))
    return stem, results


def _amplitude_columns(amps: np.ndarray, initial: int, n_report: int) -> list[int]:
    """The initial state followed by the most populated others (max over time), in index order."""
    peak = np.max(np.abs(amps) ** 2, axis=0)
    peak[initial] = -1.0
    order = np.argsort(-peak, kind="stable")[: max(n_report - 1, 0)]
    return [initial] + sorted(int(i) for i in order)


def _dynamics_table(res, idx0, bound, higher, character, n_report, delim) -> tuple[str, dict]:
    P = np.abs(res.amplitudes) ** 2
    states = _amplitude_columns(res.amplitudes, idx0, n_report)
    cols = ["t[s]", "P_initial[1]", "P_bound[1]", "P_higher_branch[1]"]
    data = [res.times, P[:, idx0], P[:, bound].sum(axis=1), P[:, higher].sum(axis=1)]
    if character is not None:
        cols.append("P_internal[1]")
        data.append(P[:, character].sum(axis=1))
    cols.append("norm[1]")
    data.append(P.sum(axis=1))
    for k in states:
        cols += [f"Re_c{k}[1]", f"Im_c{k}[1]"]
        data += [res.amplitudes[:, k].real, res.amplitudes[:, k].imag]
    table = format_table(cols, np.column_stack(data), delim)
    summary = {
        "initial_index": idx0,
        "min_initial_population": float(P[:, idx0].min()),
        "max_bound_population": float(P[:, bound].sum(axis=1).max()),
        "max_higher_branch_population": float(P[:, higher].sum(axis=1).max()),
        "reported_states": states,
        "method": res.meta["method"],
        "subspace_dim": res.meta["subspace_dim"],
        "steps": res.meta.get("steps", 0),
        "norm_drift": res.meta["norm_drift"],
    }
    return table, summary


def _quench(cfg: RunConfig, out: OutputSet, cache_dir) -> tuple[str, dict]:
    num = cfg["numerics"]
    M = cfg["block"]["M"]
    parity = _block_parity(cfg, M, dynamics=True)
    _check_cap(cfg, _dim_report(cfg, M, parity))
    params = cfg.params().replace(beta=0.0)
    basis, hp = build(params, M, num["j_max"], num["n_max"], parity=parity, coupling=_coupling(cfg, cache_dir),
                      dim_cap=num["dim_cap"])
    eig = diagonalize(hp.h0, basis=basis)
    ref = reference_vector(basis, params.a_over_aho, reference_internal(basis.internal, M, parity))
    overlap = np.abs(eig.vectors.T @ ref) ** 2
    idx0 = int(np.argmax(overlap))
    pc = cfg["pulse"]
    pulse = PulseSpec("quench", pc["beta0"], pc["tau"])
    times = np.linspace(0.0, pulse.tau, num["samples"])
    res = propagate(eig, hp.w, pulse, idx0, times, omega=params.omega, method="exact")
    bound = np.array(classify_states(eig.vectors, basis, params)) == "bound"
    dom = dominant_branch(eig)
    higher = np.nan_to_num(dom, nan=-np.inf) > dom[idx0]
    table, summary = _dynamics_table(res, idx0, bound, higher, None, num["report_states"], cfg["output"]["delimiter"])
    stem = f"quench_M{M}"
    out.add(f"{stem}.tsv", table)
    summary.update(M=M, parity=parity, beta0=pulse.beta0, tau=pulse.tau, initial_overlap=float(overlap[idx0]),
                   initial_energy=float(eig.energies[idx0]))
    return stem, summary


def _pulse_spec(cfg: RunConfig) -> PulseSpec:
    pc = cfg["pulse"]
    return PulseSpec(pc["kind"], pc["beta0"], pc["tau"], tuple(tuple(f) for f in pc["fourier"]), pc["normalization"])


def _qubits(cfg: RunConfig, cache_dir):
    num = cfg["numerics"]
    for M, parity in _QUBIT_BLOCKS.values():
        _check_cap(cfg, _dim_report(cfg, M, parity))
    return build_qubit_basis(cfg.params(), num["j_max"], num["n_max"], coupling=_coupling(cfg, cache_dir))


def _prop_kwargs(cfg: RunConfig) -> dict:
    num = cfg["numerics"]
    return {"window": num["window"], "reach": num["reach"], "tol": num["propagation_tolerance"]}


_QUBIT_BLOCKS = {"00": (0, 1), "+": (1, 1), "-": (1, -1), "11": (2, 1)}
_FILE_LABEL = {"00": "00", "+": "plus", "-": "minus", "11": "11"}


def _waveform_table(pulse: PulseSpec, dt: float, delim: str) -> str:
    t, beta = pulse_waveform(pulse, dt)
    return format_table(["t[s]", "beta[1]"], np.column_stack([t, beta]), delim)


def _pulse(cfg: RunConfig, out: OutputSet, cache_dir) -> tuple[str, dict]:
    num = cfg["numerics"]
    delim = cfg["output"]["delimiter"]
    qubits = _qubits(cfg, cache_dir)
    pulse = _pulse_spec(cfg)
    omega = qubits.params.omega
    results = simulate(qubits, pulse, omega=omega, samples=num["samples"], **_prop_kwargs(cfg))
    per_state = {}
    for s, res in zip(qubits.systems, results):
        bound = np.array(classify_states(s.eig.vectors, s.eig.basis, qubits.params)) == "bound"
        dom = dominant_branch(s.eig)
        higher = np.nan_to_num(dom, nan=-np.inf) > dom[s.index]
        table, summary = _dynamics_table(res, s.index, bound, higher, s.character, num["report_states"], delim)
        out.add(f"pulse_{_FILE_LABEL[s.label]}.tsv", table)
        c = res.final[s.index]
        summary.update(M=s.M, parity=s.parity, final_phase=float(np.angle(c)), final_population=float(abs(c) ** 2))
        per_state[s.label] = summary
    internal, full = fidelities(results, GateTarget(), qubits)
    out.add("pulse_waveform.tsv", _waveform_table(pulse, cfg["gate"]["waveform_dt"], delim))
    return "pulse", {"pulse": pulse.to_dict(), "internal_fidelity": internal, "full_fidelity": full, "states": per_state}


def _gate(cfg: RunConfig, out: OutputSet, cache_dir) -> tuple[str, dict]:
    g = cfg["gate"]
    delim = cfg["output"]["delimiter"]
    qubits = _qubits(cfg, cache_dir)
    start = _pulse_spec(cfg)

    def progress(row):
        log.info("iteration %d: objective %.6f (internal %.6f, full %.6f)", row["iteration"], row["objective"],
                 row["internal"], row["full"])

    result = optimize(qubits, start, g["objective"], g["max_iters"], omega=qubits.params.omega, n_fourier=g["n_fourier"],
                      seed=g["seed"], fd_step=g["fd_step"], callback=progress, **_prop_kwargs(cfg))
    report = result.report()
    report["states"] = {
        s.label: {"final_phase": float(np.angle(r.final[s.index])), "final_population": float(abs(r.final[s.index]) ** 2)}
        for s, r in zip(qubits.systems, result.results)
    }
    report["target_phases"] = list(GateTarget().phases)
    out.add("gate_report.json", format_json(report))
    cols = ["iteration", "objective[1]", "best[1]", "internal[1]", "full[1]", "step[1]"]
    rows = [[r["iteration"], r["objective"], r["best"], r["internal"], r["full"], r["step"]] for r in result.trace]
    out.add("gate_trace.tsv", format_table(cols, rows, delim))
    out.add("gate_waveform.tsv", _waveform_table(result.pulse, g["waveform_dt"], delim))
    return "gate", {"internal_fidelity": result.internal_fidelity, "full_fidelity": result.full_fidelity,
                    "iterations": len(result.trace) - 1, "pulse": result.pulse.to_dict()}


def _validate(cfg: RunConfig) -> dict:
    M = cfg["block"]["M"]
    blocks = {}
    for name, dynamics in (("spectra", False), ("dynamics", True)):
        report = _dim_report(cfg, M, _block_parity(cfg, M, dynamics))
        _check_cap(cfg, report)
        blocks[name] = report
    for label, (Mq, parity) in _QUBIT_BLOCKS.items():
        report = _dim_report(cfg, Mq, parity)
        _check_cap(cfg, report)
        blocks[f"gate[{label}]"] = report
    full = _dim_report(cfg, M, None)
    params = cfg.params()
    return {
        "valid": True,
        "blocks": blocks,
        "unsymmetrised_dim": full["dim"],
        "dim_cap": cfg["numerics"]["dim_cap"],
        "a_ho_m": params.aho_meters,
        "b": params.b,
        "dip_strength": params.dip_strength,
        "r_B_over_aho": params.r_B_over_aho,
    }


# ---------------------------------------------------------------------------
# entry point


def _resolve_dirs(cfg: RunConfig, args) -> tuple[Path, str | None]:
    output = args.output or cfg["output"]["directory"] or os.environ.get(ENV_OUTPUT) or DEFAULT_OUTPUT
    cache = args.cache_dir or cfg["output"]["cache_dir"] or os.environ.get(ENV_CACHE) or None
    return Path(output), cache


def run(argv=None) -> int:
    """Parse ``argv``, run one command and return its exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    out_dir = None
    try:
        args = _parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if args.config is not None and not Path(args.config).is_file():
            raise FileNotFoundError(f"config file not found: {args.config}")
        cfg = RunConfig.load(args.config, _overrides(args))
        out_dir, cache_dir = _resolve_dirs(cfg, args)
        if args.command == "validate":
            sys.stdout.write(format_json(_validate(cfg)))
            return EXIT_OK
        out = OutputSet()
        if args.command in ("spectrum-separation", "spectrum-field"):
            stem, results = _spectrum(cfg, args.command, out, cache_dir, args.workers)
        elif args.command == "quench":
            stem, results = _quench(cfg, out, cache_dir)
        elif args.command == "pulse":
            stem, results = _pulse(cfg, out, cache_dir)
        else:
            stem, results = _gate(cfg, out, cache_dir)
        sidecar = f"{stem}.meta.json"
        out.add(sidecar, _sidecar(cfg, args.command, argv, results, list(out.files) + [sidecar]))
        for path in out.commit(out_dir):
            print(path)
        return EXIT_OK
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if out_dir is not None:
            try:
                diag = OutputSet()
                diag.add("diagnostics.json", format_json({"error": str(exc), "type": type(exc).__name__,
                                                          "diagnostics": exc.diagnostics, "argv": argv,
                                                          "version": __version__}))
                diag.commit(out_dir)
            except OSError as io_exc:
                print(f"could not write diagnostics: {io_exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MolTweezerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

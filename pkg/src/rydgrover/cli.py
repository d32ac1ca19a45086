"""Command-line entry point: grover runs, verification suites, sweeps and the table report.

Every successful run writes its outputs into ``--out`` and finishes with
``manifest.json`` listing each file with a sha256 checksum. Invalid input
exits with status 2 before anything is written.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics, errorbudget, interactions, protocols
from .hilbert import basis_state, fidelity_mod_phase
from .protocols import ProtocolConfig, ProtocolError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

SWEEP_PARAMS = ("B", "tau", "Omega", "d", "n", "k")


class UsageError(Exception):
    """Bad user input; reported on stderr with exit status 2."""


def fmt(x: float) -> str:
    return f"{x:.12g}"


def round12(obj):
    """Recursively round floats to 12 significant digits for JSON output."""
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round12(v) for v in obj]
    if isinstance(obj, np.generic):
        return round12(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(round12(obj), indent=2) + "\n"


# --- output handling ----------------------------------------------------------------------


@dataclass
class RunManifest:
    subcommand: str
    seed: int
    inputs: list[str] = field(default_factory=list)
    outputs: dict[str, str] = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "seed": self.seed,
            "config_paths": self.inputs,
            "parameters": self.parameters,
            "outputs": [{"path": name, "sha256": digest} for name, digest in sorted(self.outputs.items())],
        }


class OutputDir:
    """Atomic file writer that records checksums for the manifest."""

    def __init__(self, path: Path, manifest: RunManifest):
        self.path = path
        self.manifest = manifest

    def write(self, name: str, text: str) -> Path:
        self.path.mkdir(parents=True, exist_ok=True)
        data = text.encode()
        fd, tmp = tempfile.mkstemp(dir=self.path, prefix=f".{name}.")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        target = self.path / name
        os.replace(tmp, target)
        self.manifest.outputs[name] = hashlib.sha256(data).hexdigest()
        return target

    def finish(self) -> Path:
        self.path.mkdir(parents=True, exist_ok=True)
        target = self.path / "manifest.json"
        fd, tmp = tempfile.mkstemp(dir=self.path, prefix=".manifest.")
        with os.fdopen(fd, "w") as fh:
            fh.write(json.dumps(self.manifest.to_dict(), indent=2) + "\n")
        os.replace(tmp, target)
        return target


def wants(fmt_flag: str, kind: str) -> bool:
    return fmt_flag in (kind, "both")


def rows_to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def read_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"{path} must hold a JSON object")
    return data


# --- grover -----------------------------------------------------------------------------------


def load_config(path: str) -> ProtocolConfig:
    data = read_json(path)
    if data.get("lifetime") is None:
        data.pop("lifetime", None)
    try:
        return ProtocolConfig.from_dict(data)
    except (ProtocolError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid config {path}: {exc}") from exc


def parse_iterations(value: str) -> int | str:
    if value == "auto":
        return value
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"--iterations must be an integer or 'auto', got {value!r}") from None
    if n < 0:
        raise UsageError("--iterations must be >= 0")
    return n


def cmd_grover(args, out: OutputDir) -> int:
    config = load_config(args.config)
    iterations = parse_iterations(args.iterations)
    out.manifest.inputs.append(str(args.config))
    out.manifest.parameters = {"config": config.to_dict(), "iterations": iterations}
    trace = protocols.grover_search(config, iterations)
    if wants(args.format, "csv"):
        out.write("trace.csv", trace.to_csv())
    if wants(args.format, "json"):
        out.write("trace.json", dumps(trace.to_dict()))
    print(f"{config.architecture} k={config.k}: {trace.iterations} iterations, final success {fmt(trace.success[-1])}")
    return EXIT_OK


# --- verify -----------------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    detail: str = ""


def _marked_list(k: int, rng: np.random.Generator, exhaustive_limit: int, samples: int) -> list[tuple[int, ...]]:
    if k <= exhaustive_limit:
        xs = range(2**k)
    else:
        xs = rng.choice(2**k, size=min(samples, 2**k), replace=False)
    return [tuple(int(b) for b in format(int(x), f"0{k}b")) for x in xs]


def _oracle_check(k: int, marked_list, deexcite_phase: float = 0.0) -> Check:
    worst = 0.0
    for marked in marked_list:
        layers = protocols.sequential_oracle_layers(marked, deexcite_phase=deexcite_phase)
        m = protocols.qubit_block_matrix(protocols.register_atoms(protocols.SEQUENTIAL, k), layers, range(k))
        worst = max(worst, protocols.max_phase_aligned_diff(m, protocols.oracle_matrix(marked)))
    return Check(f"oracle k={k}", worst < 1e-10, worst, f"{len(marked_list)} marked elements")


def _diffusion_check(k: int) -> Check:
    atoms = protocols.register_atoms(protocols.SEQUENTIAL, k)
    m = protocols.qubit_block_matrix(atoms, protocols.sequential_diffusion_layers(k), range(k))
    diff = protocols.max_phase_aligned_diff(m, protocols.diffusion_matrix(k))
    return Check(f"diffusion k={k}", diff < 1e-10, diff)


def _architecture_check(config: ProtocolConfig) -> Check:
    worst = 0.0
    seq = ProtocolConfig(protocols.SEQUENTIAL, config.k, config.marked)
    for variant in (protocols.ORACLE, protocols.DIFFUSION):
        a = protocols.qubit_block_matrix(config, protocols.step_layers(config, variant), config.register, config.ancillas)
        b = protocols.qubit_block_matrix(seq, protocols.step_layers(seq, variant), seq.register)
        worst = max(worst, protocols.max_phase_aligned_diff(a, b))
    label = config.architecture if config.n_s is None else f"{config.architecture} n_s={config.n_s}"
    return Check(f"{label} k={config.k} x0={''.join(map(str, config.marked))}", worst < 1e-10, worst)


def _and_pair_check() -> Check:
    atoms = protocols.register_atoms(protocols.SUBREGISTER, 0, 2)
    truth = {(0, 0): (0, 0), (0, 1): (0, 1), (1, 0): (0, 2), (1, 1): (1, 1)}
    layers = protocols.and_pair_layers(0, 1)
    worst = 0.0
    for src, dst in truth.items():
        out = dynamics.execute_ideal(basis_state(atoms, src), layers)
        worst = max(worst, 1 - fidelity_mod_phase(out, basis_state(atoms, dst)))
        back = dynamics.execute_ideal(out, protocols.inverse_layers(layers))
        worst = max(worst, 1 - fidelity_mod_phase(back, basis_state(atoms, src)))
    return Check("and-pair truth table", worst < 1e-12, worst)


def _formula_checks() -> list[Check]:
    checks = []
    shenvi = [errorbudget.display(errorbudget.shenvi_threshold(row.N)) for row in errorbudget.ERROR_TABLE]
    want = [row.shenvi for row in errorbudget.ERROR_TABLE]
    checks.append(Check("shenvi thresholds", shenvi == want, None, " ".join(shenvi)))
    report = errorbudget.table_report(interactions.load_species("cs_like"))
    sub = [c for c in report.cells if c.column == protocols.SUBREGISTER and c.kind != "blank"]
    checks.append(Check("sub-register compositions", all(c.match == "exact" for c in sub), None, " ".join(c.display for c in sub)))
    b, tau = 1e4, 1.0
    om = dynamics.optimal_rabi(b, tau)
    rel = abs(dynamics.min_error_formula(b, tau) - dynamics.ERROR_PREFACTOR * (b * tau) ** (-2 / 3))
    checks.append(Check("error formula", rel < 1e-15 and om > 0, rel))
    checks.append(Check("grover N=4", abs(protocols.analytic_success(2, 1) - 1) < 1e-12, protocols.analytic_success(2, 1)))
    return checks


def _mutation_check() -> Check:
    """A pi error on the de-excitation phase must break the oracle check."""
    bad = _oracle_check(2, _marked_list(2, np.random.default_rng(0), 4, 0), deexcite_phase=math.pi)
    return Check("mutation detected", not bad.passed, bad.value, "de-excitation phase + pi")


def _slope_check(points: int = 15, nodes: int = 16) -> list[Check]:
    btaus = [1e3, 1e4, 1e5]
    scans = [dynamics.scan_rabi(1.0, bt, points=points, fringe_nodes=nodes) for bt in btaus]
    slope = dynamics.loglog_slope(btaus, [s.error_min for s in scans])
    out = [Check("error slope vs B tau", -0.75 <= slope <= -0.58, slope, "fitted exponent")]
    for bt, s in zip(btaus, scans):
        out.append(Check(f"optimal Omega B tau={bt:g}", abs(s.omega_ratio - 1) <= 0.1, s.omega_ratio))
        out.append(Check(f"minimum error B tau={bt:g}", 0.5 <= s.error_ratio <= 2.0, s.error_ratio))
    return out


def _enhancement_checks() -> list[Check]:
    out = []
    for m in (1, 2, 3):
        ratio = dynamics.collective_enhancement(m)
        out.append(Check(f"collective enhancement m={m}", abs(ratio / math.sqrt(m) - 1) < 0.01, ratio))
    return out


def run_verify(level: str, seed: int, inject_fault: bool = False) -> list[Check]:
    rng = np.random.default_rng(seed)
    kmax = 3 if level == "fast" else 6
    phase = math.pi if inject_fault else 0.0
    checks = [_oracle_check(k, _marked_list(k, rng, 4, 8), phase) for k in range(1, kmax + 1)]
    checks += [_diffusion_check(k) for k in range(1, kmax + 1)]
    sim_k = 3 if level == "fast" else 4
    for k in range(1, sim_k + 1):
        for marked in _marked_list(k, rng, 2, 2):
            checks.append(_architecture_check(ProtocolConfig(protocols.SIMULTANEOUS, k, marked)))
    sub_marked = _marked_list(4, rng, 4 if level == "full" else 0, 2)
    for marked in sub_marked:
        checks.append(_architecture_check(ProtocolConfig(protocols.SUBREGISTER, 4, marked, n_s=2, k_s=2)))
    checks.append(_and_pair_check())
    checks += _formula_checks()
    checks.append(_mutation_check())
    if level == "full":
        checks += _enhancement_checks()
        checks += _slope_check()
    return checks


def cmd_verify(args, out: OutputDir) -> int:
    out.manifest.parameters = {"level": args.level, "inject_fault": args.inject_fault}
    t0 = time.perf_counter()
    checks = run_verify(args.level, args.seed, args.inject_fault)
    elapsed = time.perf_counter() - t0
    for c in checks:
        value = "" if c.value is None else f" value={fmt(c.value)}"
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}{value}{'  ' + c.detail if c.detail else ''}")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed in {elapsed:.1f} s")
    rows = [[c.name, c.passed, c.value if c.value is not None else "", c.detail] for c in checks]
    if wants(args.format, "csv"):
        out.write("verify.csv", rows_to_csv(["check", "passed", "value", "detail"], rows))
    if wants(args.format, "json"):
        payload = {"level": args.level, "passed": failed == 0, "checks": [c.__dict__ for c in checks]}
        out.write("verify.json", dumps(payload))
    return EXIT_OK if failed == 0 else EXIT_FAIL


# --- sweep ------------------------------------------------------------------------------------


def sweep_values(args) -> list[float]:
    if args.values:
        vals = [float(v) for v in args.values]
    elif args.range:
        start, stop, num = float(args.range[0]), float(args.range[1]), int(float(args.range[2]))
        if num < 1:
            raise UsageError("empty sweep range")
        if args.log:
            if start <= 0 or stop <= 0:
                raise UsageError("log sweeps need positive bounds")
            vals = list(np.geomspace(start, stop, num))
        else:
            vals = list(np.linspace(start, stop, num))
    else:
        raise UsageError("sweep needs --range START STOP NUM or --values")
    if not vals:
        raise UsageError("empty sweep range")
    return [float(v) for v in vals]


def _sweep_gate(args, values) -> tuple[list[str], list[list]]:
    header = ["B", "tau", "Omega", "Omega_opt", "error", "formula_error"]
    rows = []
    for v in values:
        b = v if args.param == "B" else args.B
        tau = v if args.param == "tau" else args.tau
        if args.param == "Omega":
            om = v
            graph = dynamics.controlled_phase_graph(b, tau)
            err = dynamics.gate_error(
                dynamics.controlled_phase_layers(),
                graph,
                om,
                dynamics.computational_inputs(dynamics.controlled_phase_atoms()),
                fringe_nodes=args.fringe_nodes,
            )
        else:
            scan = dynamics.scan_rabi(b, tau, fringe_nodes=args.fringe_nodes)
            om, err = scan.omega_min, scan.error_min
        rows.append([b, tau, om, dynamics.optimal_rabi(b, tau), err, dynamics.min_error_formula(b, tau)])
    return header, rows


def _sweep_lattice(args, values) -> tuple[list[str], list[list]]:
    model = _species(args.species)
    header = ["d", "n", "k", "max_shift", "error", "error_mean_shift"]
    rows = []
    for v in values:
        d = v if args.param == "d" else args.d
        n = v if args.param == "n" else args.n
        k = int(round(v)) if args.param == "k" else args.k
        if args.param == "d":
            # single nearest-neighbour pair
            shift = interactions.pair_shift(model, n, d)
            err = dynamics.min_error_formula(shift, model.lifetime(n))
            rows.append([d, n, 2, shift, err, err])
            continue
        try:
            spec = interactions.LatticeSpec.for_register(k, d, center_ancilla=args.mode == interactions.TWO_SPECIES)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        avg = interactions.lattice_average(model, n, spec, args.mode)
        rows.append([d, n, k, avg.max_shift, avg.error, avg.error_mean_shift])
    return header, rows


def cmd_sweep(args, out: OutputDir) -> int:
    values = sweep_values(args)
    if args.param in ("B", "tau", "Omega"):
        if any(v <= 0 for v in values):
            raise UsageError(f"{args.param} values must be positive")
        header, rows = _sweep_gate(args, values)
    else:
        if args.param == "k" and any(v < 2 for v in values):
            raise UsageError("k values must be >= 2")
        header, rows = _sweep_lattice(args, values)
    col = header.index(args.param if args.param in header else "Omega")
    x = [r[col] for r in rows]
    y = [r[header.index("error")] for r in rows]
    slope = dynamics.loglog_slope(x, y) if len(rows) > 1 and len(set(x)) > 1 else float("nan")
    header = ["param", "value"] + header + ["fit_slope"]
    rows = [[args.param, v] + r + [slope] for v, r in zip(values, rows)]
    fixed = {name: getattr(args, name) for name in ("B", "tau", "fringe_nodes", "species", "d", "n", "k", "mode")}
    out.manifest.parameters = {"param": args.param, "values": values, "fixed": fixed}
    if wants(args.format, "csv"):
        out.write("sweep.csv", rows_to_csv(header, rows))
    if wants(args.format, "json"):
        out.write("sweep.json", dumps({"columns": header, "rows": rows, "fit_slope": slope}))
    print(f"swept {args.param} over {len(values)} values, log-log slope {fmt(slope)}")
    return EXIT_OK


# --- table ------------------------------------------------------------------------------------


def _species(name_or_path: str) -> interactions.PairModel:
    try:
        return interactions.load_species(name_or_path)
    except FileNotFoundError as exc:
        raise UsageError(f"species file not found: {name_or_path}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid species file {name_or_path}: {exc}") from exc


def cmd_table(args, out: OutputDir) -> int:
    model = _species(args.species)
    if not args.d > 0:
        raise UsageError("--d must be positive")
    out.manifest.inputs.append(str(args.species))
    report = errorbudget.table_report(model, d=args.d, e_a=args.e_a)
    out.manifest.parameters = report.parameters
    out.write("table.txt", report.to_text())
    if wants(args.format, "json"):
        out.write("table.json", dumps(report.to_dict()))
    if wants(args.format, "csv"):
        cols = ["N", "column", "printed", "value", "display", "kind", "match", "note"]
        rows = [[c.to_dict()[k] for k in cols] for c in report.cells]
        out.write("table.csv", rows_to_csv(cols, [["" if v is None else v for v in r] for r in rows]))
    print(report.to_text(), end="")
    return EXIT_OK


# --- parser -----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for random marked-element sampling")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--format", choices=("csv", "json", "both"), default="both")

    p = argparse.ArgumentParser(prog="rydgrover", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grover", parents=[common], help="run a Grover search from a JSON config")
    g.add_argument("config", help="ProtocolConfig JSON file")
    g.add_argument("--iterations", default="auto")
    g.set_defaults(func=cmd_grover)

    v = sub.add_parser("verify", parents=[common], help="run the invariant suites")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    v.add_argument("--inject-fault", action="store_true", help="flip the de-excitation phase (should fail)")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", parents=[common], help="one-parameter grid sweep")
    s.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    s.add_argument("--range", nargs=3, metavar=("START", "STOP", "NUM"))
    s.add_argument("--values", nargs="+", type=float)
    s.add_argument("--log", action="store_true", help="geometric spacing for --range")
    s.add_argument("--B", type=float, default=1.0, help="blockade shift for B/tau/Omega sweeps")
    s.add_argument("--tau", type=float, default=1e4, help="lifetime for B/tau/Omega sweeps")
    s.add_argument("--fringe-nodes", type=int, default=16)
    s.add_argument("--species", default="cs_like")
    s.add_argument("--d", type=float, default=3.0, help="lattice period in um")
    s.add_argument("--n", type=float, default=75.0, help="principal quantum number")
    s.add_argument("--k", type=int, default=9, help="register size (perfect square)")
    s.add_argument(
        "--mode",
        choices=(interactions.SINGLE_SPECIES, interactions.TWO_SPECIES),
        default=interactions.SINGLE_SPECIES,
        help="two-species puts the ancilla on the central site; k counts all sites",
    )
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("table", parents=[common], help="rebuild the error-budget table")
    t.add_argument("--species", default="cs_like", help="species JSON file or preset name")
    t.add_argument("--d", type=float, default=3.0)
    t.add_argument("--e-a", type=float, default=0.0, help="ancilla-gate error for sub-register cells")
    t.set_defaults(func=cmd_table)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    manifest = RunManifest(args.command, args.seed)
    out = OutputDir(args.out, manifest)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            status = args.func(args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out.finish()
    return status


if __name__ == "__main__":
    sys.exit(main())

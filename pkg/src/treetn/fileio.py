"""Configuration parsing and output artifacts.

Configs are YAML with ``system``/``numerics``/``output`` sections for the
ground-state search and ``target``/``numerics``/``output`` for the
factorization command. Data tables arrive as whitespace-separated ``.dat``
files. Outputs: ``basic.csv`` (per-bond quantities), ``graph.dat`` (the
bond-label triples), optional ``single_site.csv`` / ``two_site.csv``, and an
optional tensor bundle (``isometry{i}.npy``, ``singular_values.npy``,
``norm.npy``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from .errors import LoadError
from .factorize import FactorizeConfig
from .gss import CORRELATION_ORDER, GssConfig, Observables, StageResult
from .spinmodel import SpinModel, parse_spin_size
from .state import TTNState
from .sweeps import SweepReport
from .topology import Topology

__all__ = [
    "OutputFlags",
    "RunManifest",
    "TargetSpec",
    "parse_gss_config",
    "parse_ft_config",
    "write_gss_outputs",
    "write_ft_outputs",
    "save_tensor_bundle",
    "load_tensor_bundle",
]

GSS_DEFAULT_THRESHOLD = 1e-8


@dataclass
class OutputFlags:
    directory: Path
    single_site: bool = False
    two_site: bool = False
    tensors: bool = False


@dataclass
class RunManifest:
    command: str
    config_path: Path
    out_dir: Path
    n_stages: int

    def stage_dir(self, m: int) -> Path:
        return self.out_dir / f"run{m}"


@dataclass
class TargetSpec:
    kind: str  # "tensor" or "ttn"
    path: Path


def _load_yaml(path: Path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise LoadError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise LoadError(f"malformed YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise LoadError(f"config {path} must be a mapping")
    return data


def _warn_unknown(section: dict, known: set[str], where: str):
    for key in section:
        if key not in known:
            warnings.warn(f"unknown key {key!r} in {where}", stacklevel=3)


def _read_rows(path: Path, n_cols: int, kinds, what: str):
    rows = []
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise LoadError(f"cannot read {what} file {path}: {exc}") from exc
    for ln, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != n_cols:
            raise LoadError(
                f"{what} {path}:{ln}: expected {n_cols} columns, got {len(parts)}"
            )
        try:
            rows.append(tuple(kind(p) for kind, p in zip(kinds, parts)))
        except ValueError as exc:
            raise LoadError(f"{what} {path}:{ln}: {exc}") from exc
    return rows


def _scalar_or_table(value, n: int, base: Path, what: str) -> dict[int, float]:
    """A uniform scalar or a 2-column (site, value) file."""
    if isinstance(value, (int, float)):
        return {i: float(value) for i in range(n)}
    path = base / str(value)
    rows = _read_rows(path, 2, (int, float), what)
    return {i: v for i, v in rows}


def _spin_sizes(value, n: int, base: Path) -> list[float]:
    if isinstance(value, (int, float)):
        return [parse_spin_size(value)] * n
    text = str(value)
    try:
        Fraction(text)
    except (ValueError, ZeroDivisionError):
        path = base / text
        rows = _read_rows(path, 2, (int, str), "spin sizes")
        table = {i: parse_spin_size(s) for i, s in rows}
        missing = set(range(n)) - table.keys()
        if missing:
            raise LoadError(f"spin sizes missing for sites {sorted(missing)}")
        return [table[i] for i in range(n)]
    return [parse_spin_size(text)] * n


def _opt_structure(section: dict, where: str):
    known = {"type", "temperature", "tau", "seed", "active"}
    _warn_unknown(section, known, where)
    mode = int(section.get("type", 0))
    if mode not in (0, 1, 2):
        raise LoadError(f"{where}.type must be 0, 1, or 2, got {mode}")
    return {
        "mode": mode,
        "t0": float(section.get("temperature", 0.0)),
        "n_tau": int(section["tau"]) if "tau" in section else None,
        "seed": int(section.get("seed", 0)),
    }


def parse_gss_config(path) -> tuple[SpinModel, GssConfig, OutputFlags]:
    """Load a ground-state-search configuration and its model tables."""
    path = Path(path)
    base = path.parent
    data = _load_yaml(path)
    _warn_unknown(data, {"system", "numerics", "output"}, str(path))
    try:
        system = data["system"]
        numerics = data["numerics"]
    except KeyError as exc:
        raise LoadError(f"missing section {exc} in {path}") from exc
    output = data.get("output", {})

    known_system = {
        "N", "spin_size", "model",
        "MF_X", "MF_Y", "MF_Z", "SIA",
        "DM_X", "DM_Y", "DM_Z", "SOD_X", "SOD_Y", "SOD_Z",
    }
    if "total_magnetization" in system or "total_magnetization" in numerics:
        raise LoadError(
            "magnetization-sector targeting is not supported by this package"
        )
    _warn_unknown(system, known_system, "system")

    try:
        n = int(system["N"])
        spins = _spin_sizes(system["spin_size"], n, base)
        model_sec = system["model"]
        exchange_type = str(model_sec["type"]).upper()
        model_file = base / str(model_sec["file"])
    except KeyError as exc:
        raise LoadError(f"missing required system key {exc}") from exc

    n_cols = 4 if exchange_type == "XXZ" else 5
    kinds = (int, int) + (float,) * (n_cols - 2)
    exchange_rows = _read_rows(model_file, n_cols, kinds, "exchange couplings")

    field_tables = {}
    for axis in "xyz":
        key = f"MF_{axis.upper()}"
        if key in system:
            field_tables[axis] = _scalar_or_table(system[key], n, base, key)
    sia = _scalar_or_table(system["SIA"], n, base, "SIA") if "SIA" in system else {}
    dm_tables = {}
    sod_tables = {}
    for axis in "xyz":
        key = f"DM_{axis.upper()}"
        if key in system:
            dm_tables[axis] = _read_rows(base / str(system[key]), 3, (int, int, float), key)
        key = f"SOD_{axis.upper()}"
        if key in system:
            sod_tables[axis] = _read_rows(base / str(system[key]), 3, (int, int, float), key)

    model = SpinModel(
        n_sites=n,
        spin_sizes=spins,
        exchange_type=exchange_type,
        exchange_rows=exchange_rows,
        field_tables=field_tables,
        sia_table=sia,
        dm_tables=dm_tables,
        sod_tables=sod_tables,
    )

    known_numerics = {
        "init_tree", "initial_bond_dimension", "opt_structure",
        "max_bond_dimensions", "max_num_sweeps",
        "energy_convergence_threshold", "entanglement_convergence_threshold",
        "energy_degeneracy_threshold", "entanglement_degeneracy_threshold",
    }
    _warn_unknown(numerics, known_numerics, "numerics")
    try:
        chi_schedule = [int(c) for c in numerics["max_bond_dimensions"]]
        sweep_limits = [int(c) for c in numerics["max_num_sweeps"]]
        chi_init = int(numerics["initial_bond_dimension"])
    except KeyError as exc:
        raise LoadError(f"missing required numerics key {exc}") from exc
    opt = _opt_structure(numerics.get("opt_structure", {}) or {}, "opt_structure")

    try:
        config = GssConfig(
            chi_init=chi_init,
            chi_schedule=chi_schedule,
            sweep_limits=sweep_limits,
            init_tree="pbt" if int(numerics.get("init_tree", 0)) == 1 else "mpn",
            opt_mode=opt["mode"],
            t0=opt["t0"],
            n_tau=opt["n_tau"],
            seed=opt["seed"],
            eps_e=float(numerics.get("energy_convergence_threshold", GSS_DEFAULT_THRESHOLD)),
            eps_s=float(numerics.get("entanglement_convergence_threshold", GSS_DEFAULT_THRESHOLD)),
            delta_e=float(numerics.get("energy_degeneracy_threshold", GSS_DEFAULT_THRESHOLD)),
            delta_s=float(numerics.get("entanglement_degeneracy_threshold", GSS_DEFAULT_THRESHOLD)),
        )
    except ValueError as exc:
        raise LoadError(str(exc)) from exc

    _warn_unknown(output, {"dir", "single_site", "two_site"}, "output")
    flags = OutputFlags(
        directory=base / str(output.get("dir", "output")),
        single_site=bool(int(output.get("single_site", 0))),
        two_site=bool(int(output.get("two_site", 0))),
    )
    return model, config, flags


def parse_ft_config(path) -> tuple[TargetSpec, FactorizeConfig, OutputFlags]:
    """Load a factorization / reconstruction configuration."""
    path = Path(path)
    base = path.parent
    data = _load_yaml(path)
    _warn_unknown(data, {"target", "numerics", "output"}, str(path))
    try:
        target_sec = data["target"]
        numerics = data["numerics"]
    except KeyError as exc:
        raise LoadError(f"missing section {exc} in {path}") from exc
    output = data.get("output", {})

    _warn_unknown(target_sec, {"tensor", "tensors"}, "target")
    if ("tensor" in target_sec) == ("tensors" in target_sec):
        raise LoadError("specify exactly one of target.tensor and target.tensors")
    if "tensor" in target_sec:
        target = TargetSpec(kind="tensor", path=base / str(target_sec["tensor"]))
    else:
        target = TargetSpec(kind="ttn", path=base / str(target_sec["tensors"]))

    known_numerics = {
        "initial_bond_dimension", "opt_structure", "max_sweep_num",
        "entanglement_convergence_threshold", "entanglement_degeneracy_threshold",
        "max_truncated_singularvalue", "fidelity",
    }
    _warn_unknown(numerics, known_numerics, "numerics")
    opt = _opt_structure(numerics.get("opt_structure", {}) or {}, "opt_structure")

    fid = numerics.get("fidelity") or {}
    fid_known = {"opt_structure", "max_bond_dimensions", "max_num_sweeps", "convergence_threshold"}
    _warn_unknown(fid, fid_known, "fidelity")
    fid_opt = _opt_structure(fid.get("opt_structure", {}) or {}, "fidelity.opt_structure")

    try:
        config = FactorizeConfig(
            chi_init=int(numerics["initial_bond_dimension"]),
            opt_mode=opt["mode"],
            t0=opt["t0"],
            n_tau=opt["n_tau"],
            seed=opt["seed"],
            n_max=int(numerics.get("max_sweep_num", 10)),
            eps_s=float(numerics.get("entanglement_convergence_threshold", GSS_DEFAULT_THRESHOLD)),
            sigma=float(numerics.get("max_truncated_singularvalue", 0.0)),
            delta_s=float(numerics.get("entanglement_degeneracy_threshold", GSS_DEFAULT_THRESHOLD)),
            fidelity_enabled=bool(fid),
            fidelity_opt_mode=fid_opt["mode"],
            fidelity_t0=fid_opt["t0"],
            fidelity_n_tau=fid_opt["n_tau"],
            fidelity_seed=fid_opt["seed"],
            fidelity_chi_schedule=[int(c) for c in fid.get("max_bond_dimensions", [])],
            fidelity_n_max=[int(c) for c in fid.get("max_num_sweeps", [])],
            eps_f=float(fid.get("convergence_threshold", 1e-10)),
        )
    except KeyError as exc:
        raise LoadError(f"missing required numerics key {exc}") from exc
    except ValueError as exc:
        raise LoadError(str(exc)) from exc

    _warn_unknown(output, {"dir", "tensors"}, "output")
    flags = OutputFlags(
        directory=base / str(output.get("dir", "output")),
        tensors=bool(int(output.get("tensors", 0))),
    )
    return target, config, flags


def _bond_nodes(topology: Topology, bond: int) -> tuple[int, int]:
    owners = [topology.n_sites + t for t in topology.tensors_of_bond(bond)]
    if topology.is_physical(bond):
        return bond, owners[0]
    return min(owners), max(owners)


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.12e}"


def write_basic_csv(
    path: Path,
    topology: Topology,
    report: SweepReport,
    with_energy: bool,
    with_fidelity: bool,
) -> None:
    header = ["node1", "node2", "entanglement_entropy"]
    if with_energy:
        header.append("energy")
    header.append("truncation_error")
    if with_fidelity:
        header.append("fidelity")
    lines = [",".join(header)]
    for bond in topology.bonds:
        n1, n2 = _bond_nodes(topology, bond)
        row = [str(n1), str(n2), _fmt(report.entropies.get(bond))]
        if with_energy:
            row.append(_fmt(report.energies.get(bond)))
        row.append(_fmt(report.truncation_errors.get(bond)))
        if with_fidelity:
            row.append(_fmt(report.fidelities.get(bond)))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def write_observable_csvs(directory: Path, obs: Observables, flags: OutputFlags):
    if flags.single_site:
        lines = ["i,sx,sy,sz"]
        for i in sorted(obs.single):
            sx, sy, sz = obs.single[i]
            lines.append(f"{i},{_fmt(sx)},{_fmt(sy)},{_fmt(sz)}")
        (directory / "single_site.csv").write_text("\n".join(lines) + "\n")
    if flags.two_site:
        lines = ["i,j," + ",".join(CORRELATION_ORDER)]
        for i, j in sorted(obs.pairs):
            comps = obs.pairs[(i, j)]
            vals = ",".join(_fmt(comps[c]) for c in CORRELATION_ORDER)
            lines.append(f"{i},{j},{vals}")
        (directory / "two_site.csv").write_text("\n".join(lines) + "\n")


def write_gss_outputs(
    manifest: RunManifest,
    state: TTNState,
    stages: list[StageResult],
    flags: OutputFlags,
) -> None:
    """Per-stage subdirectories run{m} with basic.csv, graph.dat, and any
    requested observable tables."""
    manifest.out_dir.mkdir(parents=True, exist_ok=True)
    for m, stage in enumerate(stages, 1):
        stage_dir = manifest.stage_dir(m)
        stage_dir.mkdir(parents=True, exist_ok=True)
        topo_snapshot = stage.final_report.structure_snapshot
        topo = Topology(
            n_sites=state.topology.n_sites,
            edges=[list(e) for e in topo_snapshot],
            center=state.topology.center,
            origin=state.topology.origin,
        )
        write_basic_csv(
            stage_dir / "basic.csv",
            topo,
            stage.final_report,
            with_energy=True,
            with_fidelity=False,
        )
        (stage_dir / "graph.dat").write_text(topo.to_graph_lines())
        if stage.observables is not None:
            write_observable_csvs(stage_dir, stage.observables, flags)


def write_ft_outputs(
    out_dir: Path,
    state: TTNState,
    report: SweepReport,
    flags: OutputFlags,
    with_fidelity: bool,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_basic_csv(
        out_dir / "basic.csv",
        state.topology,
        report,
        with_energy=False,
        with_fidelity=with_fidelity,
    )
    (out_dir / "graph.dat").write_text(state.topology.to_graph_lines())
    if flags.tensors:
        save_tensor_bundle(out_dir, state)


def save_tensor_bundle(directory: Path, state: TTNState) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, tensor in enumerate(state.tensors):
        np.save(directory / f"isometry{i}.npy", tensor)
    np.save(directory / "singular_values.npy", state.center_weights)
    np.save(directory / "norm.npy", np.array(state.norm_scale))
    (directory / "graph.dat").write_text(state.topology.to_graph_lines())


def load_tensor_bundle(directory: Path) -> TTNState:
    """Reload a saved network; the site count is implied by the tensor count."""
    directory = Path(directory)
    graph_path = directory / "graph.dat"
    if not graph_path.exists():
        raise LoadError(f"tensor bundle {directory} lacks graph.dat")
    lines = graph_path.read_text()
    n_tensors = len([ln for ln in lines.splitlines() if ln.strip()])
    topo = Topology.from_graph_lines(lines, n_sites=n_tensors + 2)
    tensors = []
    for i in range(n_tensors):
        path = directory / f"isometry{i}.npy"
        if not path.exists():
            raise LoadError(f"tensor bundle {directory} lacks {path.name}")
        tensors.append(np.load(path))
    weights = np.load(directory / "singular_values.npy")
    norm = float(np.load(directory / "norm.npy"))
    return TTNState(
        topology=topo, tensors=tensors, center_weights=weights, norm_scale=norm
    )

"""Parameter sweeps over sampling time, distinguishability and detector.

A sweep is described by a :class:`SweepConfig`, usually loaded from a YAML
file (see ``demos/fig3_l3.yaml``).  :func:`run_sweep` first scans every
detector for resonant sampling times, inserts them into the tau grid and
then evaluates one job per tau value.  Each job covers all detectors and
all initial states, so the propagator and its no-detection blocks are
built once per tau.  Rows come back in (tau, overlap, detector) order no
matter how many worker processes were used, and the CSV is written only
after every job has finished.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import tolerances as tol
from .detection import DetectionSpec, projectors
from .errors import ConfigError
from .lattice import Geometry, LatticeModel, check_dimension, many_body_hamiltonian
from .linalg import hermitian_eig, unitary_from_hamiltonian
from .manybody import InternalGram, Species, initial_state
from .resonance import ResonanceScan, degenerate_times, scan_hamiltonian, snap_to_degenerate
from .strobe import (
    Flag,
    StrobeProblem,
    Truncation,
    compress,
    detectable_weight,
    mean_first_detection_times,
    trapped_projector,
    trapped_survival,
)

log = logging.getLogger(__name__)

CSV_HEADER = (
    "tau_J_per_hbar", "overlap_signed", "detector", "S_inf", "t_first", "t_first_flag",
    "k_truncated", "truncation_reason", "max_modulus", "is_resonant",
)
DEFAULT_OVERLAPS = tuple(float(x) for x in np.linspace(-1.0, 1.0, 9))
DEFAULT_DETECTORS = (">=1", "=1", "=2")
RESONANCE_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class StateSpec:
    """One initial state of the sweep.

    ``overlap_signed`` is the value written to the CSV.  For two particles it
    is ``+-|<phi_1|phi_2>|^2``; for an explicit Gram matrix it is the species
    sign times the mean pairwise ``|G_ab|^2``.
    """

    overlap_signed: float
    species: Species
    gram: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SweepConfig:
    sites: int
    particles: int = 2
    J: float = 1.0
    geometry: Geometry = Geometry.CHAIN
    states: tuple = ()
    tau_min: float = 0.0
    tau_max: float = 10.0
    tau_points: int = 501
    tau_insert: tuple = ()
    insert_resonances: bool = True
    detectors: tuple = DEFAULT_DETECTORS
    target_site: int | None = None
    eps: float = tol.TRUNCATION_EPS
    k_cap: int = tol.TRUNCATION_KCAP
    csv_path: Path | None = None
    svg: bool = False
    workers: int = 1

    @property
    def target(self) -> int:
        return self.sites if self.target_site is None else self.target_site

    def detector_specs(self) -> list[DetectionSpec]:
        return [DetectionSpec.parse(d, self.particles, self.sites, self.target) for d in self.detectors]

    def tau_grid(self) -> np.ndarray:
        return np.linspace(self.tau_min, self.tau_max, self.tau_points)


# ----------------------------------------------------------------------------
# configuration


def overlap_state(overlap_signed: float, N: int) -> StateSpec:
    """All pairwise ``|<phi_a|phi_b>|^2`` equal to ``|overlap_signed|``; sign picks the species."""
    x = math.sqrt(abs(overlap_signed))
    species = Species.BOSON if overlap_signed >= 0 else Species.FERMION
    return StateSpec(float(overlap_signed), species, InternalGram.uniform(N, x).G)


def gram_state(gram, species) -> StateSpec:
    g = InternalGram(np.asarray(gram, dtype=np.complex128)).G
    species = Species(species)
    N = g.shape[0]
    iu = np.triu_indices(N, 1)
    mean = float(np.mean(np.abs(g[iu]) ** 2)) if N > 1 else 1.0
    sign = 1.0 if species is Species.BOSON else -1.0
    return StateSpec(sign * mean, species, g)


def _num(raw, name: str, errors: dict, kind=float):
    # YAML 1.1 reads "1e-4" as a string, so numbers are coerced here
    try:
        if isinstance(raw, bool):
            raise TypeError
        value = kind(float(raw)) if kind is int else kind(raw)
        if kind is int and float(raw) != value:
            raise ValueError
        if not math.isfinite(value):
            raise ValueError
        return value
    except (TypeError, ValueError):
        errors[name] = f"expected a {'integer' if kind is int else 'number'}, got {raw!r}"
        return None


def config_from_dict(data: dict, base_dir: Path | None = None) -> SweepConfig:
    """Validate a nested mapping and build a :class:`SweepConfig`.

    Raises :class:`ConfigError` listing every offending field.
    """
    if not isinstance(data, dict):
        raise ConfigError({"<root>": "configuration must be a mapping"})
    errors: dict[str, str] = {}
    known = {"lattice", "particles", "overlaps", "states", "tau", "detectors", "target_site",
             "truncation", "output", "workers"}
    for key in data:
        if key not in known:
            errors[str(key)] = "unknown key"

    lat = data.get("lattice")
    if not isinstance(lat, dict) or "sites" not in lat:
        errors["lattice.sites"] = "required"
        lat = lat if isinstance(lat, dict) else {}
    sites = _num(lat.get("sites", 0), "lattice.sites", errors, int) if "sites" in lat else None
    J = _num(lat.get("J", 1.0), "lattice.J", errors)
    if J is not None and not J > 0:
        errors["lattice.J"] = "must be positive"
    try:
        geometry = Geometry(lat.get("geometry", "chain"))
    except ValueError:
        errors["lattice.geometry"] = f"must be one of {[g.value for g in Geometry]}"
        geometry = Geometry.CHAIN
    if sites is not None:
        minimum = 3 if geometry is Geometry.RING else 2
        if sites < minimum:
            errors["lattice.sites"] = f"must be >= {minimum} for a {geometry.value}"

    N = _num(data.get("particles", 2), "particles", errors, int)
    if N is not None and N < 1:
        errors["particles"] = "must be >= 1"

    states: list[StateSpec] = []
    if "overlaps" in data and "states" in data:
        errors["states"] = "give either 'overlaps' or 'states', not both"
    elif "states" in data:
        raw = data["states"]
        if not isinstance(raw, list) or not raw:
            errors["states"] = "must be a non-empty list"
        else:
            for i, st in enumerate(raw):
                try:
                    spec = gram_state(st["gram"], st.get("species", "boson"))
                    if N is not None and spec.gram.shape[0] != N:
                        raise ValueError(f"Gram matrix must be {N}x{N}")
                    states.append(spec)
                except Exception as exc:  # noqa: BLE001 - reported per field
                    errors[f"states[{i}]"] = str(exc) or type(exc).__name__
    else:
        raw = data.get("overlaps", list(DEFAULT_OVERLAPS))
        if not isinstance(raw, list) or not raw:
            errors["overlaps"] = "must be a non-empty list"
        else:
            for i, v in enumerate(raw):
                x = _num(v, f"overlaps[{i}]", errors)
                if x is None:
                    continue
                if not -1.0 <= x <= 1.0:
                    errors[f"overlaps[{i}]"] = "must lie in [-1, 1]"
                elif N is not None and N >= 1:
                    states.append(overlap_state(x, N))

    t = data.get("tau", {})
    if not isinstance(t, dict):
        errors["tau"] = "must be a mapping"
        t = {}
    tau_min = _num(t.get("min", 0.0), "tau.min", errors)
    tau_max = _num(t.get("max", 10.0), "tau.max", errors)
    points = _num(t.get("points", 501), "tau.points", errors, int)
    if tau_min is not None and tau_min < 0:
        errors["tau.min"] = "must be >= 0"
    if points is not None and points < 2:
        errors["tau.points"] = "must be >= 2"
    if tau_min is not None and tau_max is not None and not tau_max > tau_min:
        errors["tau.max"] = "must exceed tau.min"
    insert = []
    for i, v in enumerate(t.get("insert", []) or []):
        x = _num(v, f"tau.insert[{i}]", errors)
        if x is not None and x < 0:
            errors[f"tau.insert[{i}]"] = "must be >= 0"
        elif x is not None:
            insert.append(x)
    resonances = t.get("resonances", True)
    if not isinstance(resonances, bool):
        errors["tau.resonances"] = "must be true or false"

    detectors = data.get("detectors", list(DEFAULT_DETECTORS))
    if not isinstance(detectors, list) or not detectors:
        errors["detectors"] = "must be a non-empty list"
        detectors = []
    target = data.get("target_site")
    if target is not None:
        target = _num(target, "target_site", errors, int)
    if sites is not None and N is not None and N >= 1:
        for i, d in enumerate(detectors):
            try:
                DetectionSpec.parse(str(d), N, sites, target)
            except ValueError as exc:
                errors[f"detectors[{i}]"] = str(exc)
        tgt = sites if target is None else target
        if tgt is not None and 1 <= tgt <= N:
            errors["target_site"] = f"site {tgt} is occupied initially (particles start on sites 1..{N})"
        if N > sites:
            errors["particles"] = "need at least as many sites as particles"
        else:
            try:
                check_dimension(sites, N)
            except Exception as exc:  # noqa: BLE001
                errors["particles"] = str(exc)

    tr = data.get("truncation", {})
    if not isinstance(tr, dict):
        errors["truncation"] = "must be a mapping"
        tr = {}
    eps = _num(tr.get("eps", tol.TRUNCATION_EPS), "truncation.eps", errors)
    k_cap = _num(tr.get("k_cap", tol.TRUNCATION_KCAP), "truncation.k_cap", errors, int)
    if eps is not None and not eps > 0:
        errors["truncation.eps"] = "must be positive"
    if k_cap is not None and k_cap < 1:
        errors["truncation.k_cap"] = "must be >= 1"

    out = data.get("output", {})
    if not isinstance(out, dict):
        errors["output"] = "must be a mapping"
        out = {}
    csv_path = out.get("csv")
    if csv_path is not None:
        csv_path = Path(csv_path)
        if base_dir is not None and not csv_path.is_absolute():
            csv_path = base_dir / csv_path
    svg = out.get("svg", False)
    if not isinstance(svg, bool):
        errors["output.svg"] = "must be true or false"
    if svg and csv_path is None:
        errors["output.svg"] = "SVG output needs output.csv to name the files"

    workers = _num(data.get("workers", 1), "workers", errors, int)
    if workers is not None and workers < 1:
        errors["workers"] = "must be >= 1"

    if errors:
        raise ConfigError(errors)
    return SweepConfig(
        sites=sites, particles=N, J=J, geometry=geometry, states=tuple(states),
        tau_min=tau_min, tau_max=tau_max, tau_points=points, tau_insert=tuple(insert),
        insert_resonances=resonances, detectors=tuple(str(d) for d in detectors),
        target_site=target, eps=eps, k_cap=k_cap, csv_path=csv_path, svg=svg, workers=workers,
    )


def load_config(path) -> SweepConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError({"<file>": f"cannot read {path}: {exc}"}) from exc
    except yaml.YAMLError as exc:
        raise ConfigError({"<file>": f"invalid YAML: {exc}"}) from exc
    return config_from_dict(data, base_dir=path.parent)


# ----------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class SweepRow:
    tau: float                 # tau J / hbar
    overlap_signed: float
    detector: str
    S_inf: float
    t_first: float | None      # tau J / hbar units
    flag: Flag | None
    k_truncated: int
    truncation_reason: Truncation
    max_modulus: float
    is_resonant: bool

    def cells(self) -> list[str]:
        return [
            repr(float(self.tau)), repr(float(self.overlap_signed)), self.detector,
            repr(float(self.S_inf)),
            "" if self.t_first is None else repr(float(self.t_first)),
            "" if self.flag is None else self.flag.value,
            str(int(self.k_truncated)), self.truncation_reason.value,
            repr(float(self.max_modulus)), "true" if self.is_resonant else "false",
        ]


@dataclass
class SweepResult:
    config: SweepConfig
    taus: np.ndarray
    rows: list
    resonances: dict          # detector label -> sorted resonant tau J / hbar
    scans: dict               # detector label -> ResonanceScan (tau in physical units)

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


@dataclass
class _Context:
    energies: np.ndarray
    vectors: np.ndarray
    labels: list
    pairs: list
    states: list               # full-space rho per StateSpec
    overlaps: list
    never: np.ndarray          # (n_states, n_detectors) bool
    resonances: list           # per detector, sorted tau J / hbar
    J: float
    eps: float
    k_cap: int
    hamiltonian: np.ndarray | None = None


_CTX: _Context | None = None


def _init_worker(ctx: _Context) -> None:
    global _CTX
    _CTX = ctx


def _is_resonant(tau: float, res: list) -> bool:
    return any(abs(tau - r) <= RESONANCE_MATCH_TOL for r in res)


def _tau_job(tau_value: float) -> list[SweepRow]:
    ctx = _CTX
    tau = tau_value / ctx.J
    u = (ctx.vectors * np.exp(-1j * ctx.energies * tau)) @ ctx.vectors.conj().T
    per_det = []
    for d, pair in enumerate(ctx.pairs):
        path = compress(StrobeProblem(u, pair, ctx.states[0], tau))
        p_t = trapped_projector(path)
        if tau > 0:
            s_inf = [trapped_survival(path.with_state(r), p_t) for r in ctx.states]
        else:
            # nothing evolves and the target starts empty
            s_inf = [1.0] * len(ctx.states)
        never = ctx.never[:, d]
        if tau > 0:
            times = mean_first_detection_times(path, ctx.states, s_inf, tau, ctx.eps, ctx.k_cap,
                                               never_detectable=never)
        else:
            times = None
        per_det.append((path, s_inf, times))

    rows = []
    for i, ov in enumerate(ctx.overlaps):
        for d, label in enumerate(ctx.labels):
            path, s_inf, times = per_det[d]
            if times is None:
                flag = Flag.UNDEFINED_ZERO_DETECTION if ctx.never[i, d] else Flag.UNDEFINED_TRAPPED
                value, k_tr, reason = None, 0, Truncation.UNDEFINED
            else:
                ft = times[i]
                flag, k_tr, reason = ft.flag, ft.k_truncated, ft.reason
                value = None if ft.value is None else ft.value * ctx.J
            rows.append(SweepRow(
                tau=tau_value, overlap_signed=ov, detector=label, S_inf=s_inf[i],
                t_first=value, flag=flag, k_truncated=k_tr, truncation_reason=reason,
                max_modulus=float(np.max(path.eig.moduli)),
                is_resonant=_is_resonant(tau_value, ctx.resonances[d]),
            ))
    return rows


def _scan_job(d: int, grid_phys: np.ndarray) -> ResonanceScan:
    ctx = _CTX
    return scan_hamiltonian(ctx.hamiltonian, ctx.pairs[d], grid_phys)


def merge_taus(grid, extra, tol_tau: float = 1e-12) -> np.ndarray:
    """Sorted union of ``grid`` and ``extra``; near-duplicates keep the grid value."""
    taus = [float(t) for t in grid]
    for t in sorted(float(x) for x in extra):
        if not any(abs(t - s) <= tol_tau for s in taus):
            taus.append(t)
    return np.array(sorted(taus))


def _map(pool, fn, items):
    if pool is None:
        return [fn(x) for x in items]
    return list(pool.map(fn, items))


def run_sweep(config: SweepConfig, *, write: bool = True) -> SweepResult:
    """Evaluate the sweep; write the CSV (and SVGs) only after full success."""
    if not config.states:
        raise ConfigError({"overlaps": "no initial states given"})
    model = LatticeModel(config.sites, config.J, config.geometry)
    N = config.particles
    h = many_body_hamiltonian(model.hamiltonian(), N)
    eig = hermitian_eig(h)
    specs = config.detector_specs()
    pairs = [projectors(s) for s in specs]
    labels = list(config.detectors)
    modes = tuple(range(1, N + 1))
    rhos = [initial_state(InternalGram(s.gram), s.species, config.sites, modes).rho for s in config.states]
    never = np.array([[detectable_weight(h, p.P_perp, r) < tol.DENOMINATOR_TOL for p in pairs] for r in rhos])

    ctx = _Context(
        energies=eig.energies, vectors=eig.eigenvectors, labels=labels, pairs=pairs, states=rhos,
        overlaps=[s.overlap_signed for s in config.states], never=never,
        resonances=[[] for _ in labels], J=config.J, eps=config.eps, k_cap=config.k_cap,
        hamiltonian=h,
    )
    grid = config.tau_grid()
    pool = None
    if config.workers > 1:
        pool = ProcessPoolExecutor(max_workers=config.workers, initializer=_init_worker, initargs=(ctx,))
    else:
        _init_worker(ctx)
    try:
        scans: dict = {}
        if config.insert_resonances:
            grid_phys = grid / config.J
            cands = degenerate_times(eig.energies, (config.tau_max + 1.0) / config.J)
            found = _map(pool, _ScanCall(grid_phys), range(len(labels)))
            for d, sc in enumerate(found):
                scans[labels[d]] = sc
                phys = snap_to_degenerate(sc.resonant_taus(), cands)
                ctx.resonances[d] = sorted({t * config.J for t in phys})
                if sc.skipped:
                    log.warning("%s: %d grid points skipped as defective", labels[d], len(sc.skipped))
            if pool is not None:
                # workers hold the context from start-up; restart them with the resonances
                pool.shutdown()
                pool = ProcessPoolExecutor(max_workers=config.workers, initializer=_init_worker,
                                           initargs=(ctx,))
        inserted = [t for res in ctx.resonances for t in res] + list(config.tau_insert)
        taus = merge_taus(grid, inserted)
        chunks = _map(pool, _tau_job, [float(t) for t in taus])
    finally:
        if pool is not None:
            pool.shutdown()
        _init_worker(None)

    rows = [r for chunk in chunks for r in chunk]
    result = SweepResult(config, taus, rows, dict(zip(labels, ctx.resonances)), scans)
    if write and config.csv_path is not None:
        outputs = {Path(config.csv_path): result.to_csv()}
        if config.svg:
            from .plots import sweep_svgs
            outputs.update(sweep_svgs(result, Path(config.csv_path)))
        write_files(outputs)
    return result


class _ScanCall:
    """Picklable callable for the scan stage."""

    def __init__(self, grid_phys):
        self.grid_phys = np.asarray(grid_phys)

    def __call__(self, d: int) -> ResonanceScan:
        return _scan_job(d, self.grid_phys)


def write_files(outputs: dict) -> None:
    """Write all files through temporaries, then move them into place."""
    staged = []
    try:
        for path, text in outputs.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def moduli_csv(scan: ResonanceScan, J: float = 1.0) -> str:
    """``tau_J_per_hbar`` followed by the sorted moduli at each grid point."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = scan.moduli.shape[1]
    w.writerow(["tau_J_per_hbar"] + [f"modulus_{j + 1}" for j in range(d)])
    for t, row in zip(scan.tau_grid, scan.moduli):
        w.writerow([repr(float(t * J))] + ["" if np.isnan(m) else repr(float(m)) for m in row])
    return buf.getvalue()


def _detector_slug(label: str) -> str:
    return label.replace(">=", "ge").replace("=", "eq")


def fig3_config(l: int, out_dir=".", *, workers: int = 1, svg: bool = True,
                tau_points: int = 501, k_cap: int = tol.TRUNCATION_KCAP) -> SweepConfig:
    if l not in (3, 5, 7, 10):
        raise ConfigError({"l": "must be one of 3, 5, 7, 10"})
    out = Path(out_dir)
    return SweepConfig(
        sites=l, particles=2, states=tuple(overlap_state(x, 2) for x in DEFAULT_OVERLAPS),
        tau_points=tau_points, k_cap=k_cap, csv_path=out / f"fig3_l{l}.csv", svg=svg,
        workers=workers,
    )


def reproduce_fig3(l: int, out_dir=".", *, workers: int = 1, svg: bool = True,
                   tau_points: int = 501, k_cap: int = tol.TRUNCATION_KCAP) -> SweepResult:
    """Two particles on an ``l``-site chain, the campaign behind Fig. 3.

    Writes ``fig3_l{l}.csv`` with the sweep rows, one moduli table per
    detector and, with ``svg``, one SVG per detector and panel.
    """
    config = fig3_config(l, out_dir, workers=workers, svg=svg, tau_points=tau_points, k_cap=k_cap)
    result = run_sweep(config, write=False)
    base = Path(config.csv_path)
    outputs = {base: result.to_csv()}
    for label, scan in result.scans.items():
        outputs[base.with_name(f"{base.stem}_moduli_{_detector_slug(label)}.csv")] = moduli_csv(scan, config.J)
    if svg:
        from .plots import sweep_svgs
        outputs.update(sweep_svgs(result, base))
    write_files(outputs)
    return result

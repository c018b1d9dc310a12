"""Configuration, figure pipelines and CSV tables."""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, units
from .continuum import bulk_spectrum, hydro_spd_zz, local_spd_zz
from .errors import ConfigError, ConvergenceError
from .jellium import ScfSolution, SlabSpec, load_solution, save_solution, scf_solve
from .physical import MaterialParams, planck_density
from .response import FilmResponse, ResponseGrid, default_q_range, subband_set

log = logging.getLogger(__name__)

H_NOTE = (
    "hydro/local/bulk: h measured from the edge of the positive background; "
    "film models: h measured from the wall of the SCF box (vacuum extension beyond the jellium edge)"
)

DEFAULTS: dict = {
    "material": {
        "plasma_frequency_rad_s": 2.3e16,
        "collision_rate_per_s": 1.3e14,
        "fermi_velocity_cm_s": 2.03e8,
        "wigner_seitz_radius_bohr": 2.07,
        "temperature_k": 300.0,
    },
    "slab": {
        "thickness_nm": 4.0,
        "vacuum_extension_bohr": None,
        "n_basis": 64,
        "n_grid": 257,
        "mixing": 0.2,
        "preconditioner": "kerker",
        "tolerance_au": 1e-9,
        "max_iterations": 500,
    },
    "response": {
        "n_grid": 257,
        "broadening_per_s": None,
        "cutoff_fermi_energies": 4.0,
        "coulomb": "product",
        "rtol": 1e-5,
    },
    "sweep": {
        "h_min_nm": 0.01,
        "h_max_nm": 50.0,
        "h_points": 60,
        "omega_fractions_of_wp": None,
        "omega_rad_s": None,
    },
    "output": {"directory": "."},
}

_TYPES = {
    ("slab", "n_basis"): int,
    ("slab", "n_grid"): int,
    ("slab", "max_iterations"): int,
    ("slab", "preconditioner"): str,
    ("response", "n_grid"): int,
    ("response", "coulomb"): str,
    ("sweep", "h_points"): int,
    ("sweep", "omega_fractions_of_wp"): list,
    ("sweep", "omega_rad_s"): list,
    ("output", "directory"): str,
}


@dataclass
class ExperimentConfig:
    """Validated nested configuration; every dimensional key names its unit."""

    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        data = copy.deepcopy(DEFAULTS)
        for block, values in raw.items():
            if block not in DEFAULTS:
                raise ConfigError(f"unknown configuration block {block!r}")
            if not isinstance(values, dict):
                raise ConfigError(f"block {block!r} must be a mapping")
            for key, val in values.items():
                if key not in DEFAULTS[block]:
                    raise ConfigError(f"unknown key {block}.{key}")
                data[block][key] = _coerce(block, key, val)
        cfg = cls(data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def updated(self, block: str, **values) -> "ExperimentConfig":
        raw = copy.deepcopy(self.data)
        raw[block].update(values)
        return ExperimentConfig.from_dict(raw)

    def validate(self):
        try:
            self.material()
            self.slab_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        sw = self.data["sweep"]
        if not 0 < sw["h_min_nm"] < sw["h_max_nm"]:
            raise ConfigError("sweep needs 0 < h_min_nm < h_max_nm")
        if sw["h_points"] < 2:
            raise ConfigError("sweep.h_points must be at least 2")
        if sw["omega_fractions_of_wp"] is not None and sw["omega_rad_s"] is not None:
            raise ConfigError("give omega either as fractions of wp or in rad/s, not both")
        for key in ("omega_fractions_of_wp", "omega_rad_s"):
            vals = sw[key]
            if vals is not None and (not vals or any(v <= 0 for v in vals)):
                raise ConfigError(f"sweep.{key} must be a non-empty list of positive numbers")
        rs = self.data["response"]
        if rs["coulomb"] not in ("product", "nystrom"):
            raise ConfigError("response.coulomb must be 'product' or 'nystrom'")
        if rs["n_grid"] < 5 or rs["rtol"] <= 0 or rs["cutoff_fermi_energies"] <= 0:
            raise ConfigError("invalid response block")
        if rs["broadening_per_s"] is not None and rs["broadening_per_s"] <= 0:
            raise ConfigError("response.broadening_per_s must be positive")

    def material(self) -> MaterialParams:
        m = self.data["material"]
        return MaterialParams(
            plasma_frequency=m["plasma_frequency_rad_s"],
            collision_rate=m["collision_rate_per_s"],
            fermi_velocity=m["fermi_velocity_cm_s"],
            wigner_seitz_radius=m["wigner_seitz_radius_bohr"],
            temperature=m["temperature_k"],
        )

    def slab_spec(self) -> SlabSpec:
        s = self.data["slab"]
        kw = dict(
            n_basis=s["n_basis"],
            n_grid=s["n_grid"],
            mixing=s["mixing"],
            tol=s["tolerance_au"],
            max_iter=s["max_iterations"],
            preconditioner=s["preconditioner"],
        )
        d = units.nm_to_bohr(s["thickness_nm"])
        if s["vacuum_extension_bohr"] is not None:
            kw["delta_left"] = kw["delta_right"] = s["vacuum_extension_bohr"]
        return SlabSpec.for_material(self.material(), d, **kw)

    def omegas(self, default_fractions) -> list[float]:
        """Sweep frequencies in atomic units."""
        sw = self.data["sweep"]
        if sw["omega_rad_s"] is not None:
            return [units.rad_s_to_au(w) for w in sw["omega_rad_s"]]
        fr = sw["omega_fractions_of_wp"] or default_fractions
        wp = self.material().wp
        return [f * wp for f in fr]

    def heights_nm(self) -> np.ndarray:
        sw = self.data["sweep"]
        return np.geomspace(sw["h_min_nm"], sw["h_max_nm"], sw["h_points"])

    def response_grid(self, sol: ScfSolution) -> ResponseGrid:
        r = self.data["response"]
        eta = self.material().nu if r["broadening_per_s"] is None else units.rad_s_to_au(
            r["broadening_per_s"]
        )
        return ResponseGrid.uniform(sol.box_length, r["n_grid"], eta)

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))


def _coerce(block, key, val):
    want = _TYPES.get((block, key), float)
    if val is None:
        if DEFAULTS[block][key] is None:
            return None
        raise ConfigError(f"{block}.{key} may not be null")
    if want is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{block}.{key} must be an integer")
        return val
    if want is str:
        if not isinstance(val, str):
            raise ConfigError(f"{block}.{key} must be a string")
        return val
    if want is list:
        if not isinstance(val, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in val
        ):
            raise ConfigError(f"{block}.{key} must be a list of numbers")
        return [float(v) for v in val]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{block}.{key} must be a number")
    return float(val)


# ---------------------------------------------------------------------------
# tables

COLUMNS = ("model", "omega_rad_s", "h_nm", "g_zz", "g_xx", "value", "normalized", "norm_constant")


@dataclass
class SpectrumTable:
    """Rows of SPD values with a provenance header.

    ``value`` is the plotted quantity: ``g_zz / norm_constant`` for
    normalized rows, otherwise ``g_zz``.  Rows are kept sorted by
    (model, omega, h).
    """

    name: str
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, model, omega_rad_s, h_nm, g_zz, g_xx, norm=None):
        normalized = norm is not None
        if normalized and not norm > 0:
            raise ValueError("normalization constant must be positive")
        value = g_zz / norm if normalized else g_zz
        self.rows.append(
            (model, float(omega_rad_s), float(h_nm), float(g_zz), float(g_xx), float(value),
             normalized, float(norm) if normalized else 0.0)
        )

    def sort(self):
        self.rows.sort(key=lambda r: (r[0], r[1], r[2]))
        return self

    def select(self, model, omega_rad_s=None):
        return [r for r in self.rows if r[0] == model and (omega_rad_s is None or r[1] == omega_rad_s)]

    def to_csv(self) -> str:
        self.sort()
        buf = io.StringIO()
        buf.write(f"# table: {self.name}\n")
        for key in sorted(self.meta):
            buf.write(f"# {key}: {json.dumps(self.meta[key], sort_keys=True)}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(COLUMNS)
        for r in self.rows:
            wr.writerow([r[0], repr(r[1]), repr(r[2]), repr(r[3]), repr(r[4]), repr(r[5]),
                         int(r[6]), repr(r[7])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SpectrumTable":
        meta = {}
        name = ""
        body = []
        for line in text.splitlines():
            if line.startswith("# "):
                key, _, rest = line[2:].partition(": ")
                if key == "table":
                    name = rest
                else:
                    meta[key] = json.loads(rest)
            elif line:
                body.append(line)
        reader = csv.reader(body)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected CSV columns {header}")
        rows = [
            (r[0], float(r[1]), float(r[2]), float(r[3]), float(r[4]), float(r[5]),
             bool(int(r[6])), float(r[7]))
            for r in reader
        ]
        return cls(name=name, rows=rows, meta=meta)

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        return path

    @classmethod
    def read(cls, path) -> "SpectrumTable":
        return cls.from_csv(Path(path).read_text())

    def __eq__(self, other):
        if not isinstance(other, SpectrumTable):
            return NotImplemented
        return (self.name, sorted(self.rows), self.meta) == (other.name, sorted(other.rows), other.meta)


def _meta(cfg: ExperimentConfig, **extra):
    meta = {"artifact_version": __version__, "config": cfg.data, "h_definition": H_NOTE}
    meta.update(extra)
    return meta


def _pmap(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# pipelines


def run_fig1(cfg: ExperimentConfig, threads: int = 1) -> SpectrumTable:
    """Hydrodynamic and local g_zz(h) normalized by the hydrodynamic value at h = 0."""
    mat = cfg.material()
    omega = cfg.omegas([0.1])[0]
    hs = cfg.heights_nm()
    h0 = hydro_spd_zz(0.0, omega, mat).zz
    hyd = _pmap(lambda h: hydro_spd_zz(units.nm_to_bohr(h), omega, mat), hs, threads)
    w_si = units.au_to_rad_s(omega)
    table = SpectrumTable("fig1", meta=_meta(cfg, omega_au=omega, hydro_gzz_h0=h0))
    table.add("hydro", w_si, 0.0, h0, 0.5 * h0, norm=h0)
    for h, v in zip(hs, hyd):
        table.add("hydro", w_si, h, v.zz, v.xx, norm=h0)
        loc = local_spd_zz(units.nm_to_bohr(h), omega, mat)
        table.add("local", w_si, h, loc.zz, loc.xx, norm=h0)
    return table.sort()


def run_fig2(cfg: ExperimentConfig, threads: int = 1, probe_nm: float = 0.01) -> SpectrumTable:
    """Bulk plateau g_EE/u_BB and vacuum 2 g_zz(h)/u_BB at several frequencies."""
    mat = cfg.material()
    omegas = cfg.omegas([0.01, 0.05, 0.1])
    hs = cfg.heights_nm()
    ratios = {}
    table = SpectrumTable("fig2")
    for omega in omegas:
        u = float(planck_density(omega, mat.temperature))
        w_si = units.au_to_rad_s(omega)
        bulk = bulk_spectrum(omega, mat)
        # bulk rows: plateau inside the metal, reported at h = -1 nm
        table.add("bulk", w_si, -1.0, bulk.g_ee, bulk.g_ee / 3.0, norm=u)
        vac = _pmap(lambda h: hydro_spd_zz(units.nm_to_bohr(h), omega, mat), hs, threads)
        for h, v in zip(hs, vac):
            table.add("vacuum", w_si, h, 2.0 * v.zz, v.zz, norm=u)
        probe = hydro_spd_zz(units.nm_to_bohr(probe_nm), omega, mat).zz
        ratios[f"{w_si:.6g}"] = float(2.0 * probe / bulk.g_ee)
    table.meta = _meta(
        cfg,
        interface_probe_nm=probe_nm,
        interface_ratio=ratios,
        note="vacuum g_zz column holds 2 g_zz; bulk g_zz column holds the trace g_EE; bulk rows at h = -1 nm",
    )
    return table.sort()


def obtain_solution(cfg: ExperimentConfig, scf_file=None) -> ScfSolution:
    if scf_file is not None:
        sol = load_solution(scf_file)
    else:
        sol = scf_solve(cfg.slab_spec(), cfg.material())
    if not sol.converged:
        raise ConvergenceError("SCF solution is not converged")
    return sol


def run_fig3(
    cfg: ExperimentConfig,
    scf_file=None,
    solution: ScfSolution | None = None,
    threads: int = 1,
    heights_nm=None,
):
    """IBM (bare), RPA (screened) and local g_zz(h) normalized by RPA at h = 0.

    Returns ``(table, responses)`` where ``responses`` maps the film model
    tag to its :class:`FilmResponse` (for diagnostics and residuals).
    """
    mat = cfg.material()
    sol = solution if solution is not None else obtain_solution(cfg, scf_file)
    if not sol.converged:
        raise ConvergenceError("SCF solution is not converged")
    omega = cfg.omegas([0.1])[0]
    if heights_nm is None:
        heights_nm = np.concatenate([[0.0], cfg.heights_nm()])
    hs = np.asarray(heights_nm, dtype=float)
    grid = cfg.response_grid(sol)
    r = cfg.data["response"]
    responses = {}
    values = {}
    for tag, flavor, mode in (("film-ibm", "ibm", "zero"), ("film-rpa", "self_consistent", "full")):
        sb = subband_set(sol, flavor, cutoff=r["cutoff_fermi_energies"])
        fr = FilmResponse(sb, grid, omega, mode=mode, coulomb=r["coulomb"], threads=threads)
        qr = default_q_range(units.nm_to_bohr(hs), sb)
        values[tag] = [fr.spd(units.nm_to_bohr(h), mat.temperature, q_range=qr, rtol=r["rtol"]) for h in hs]
        responses[tag] = fr
    i0 = int(np.argmin(hs))
    norm = values["film-rpa"][i0][1]
    w_si = units.au_to_rad_s(omega)
    table = SpectrumTable(
        "fig3",
        meta=_meta(
            cfg,
            omega_au=omega,
            rpa_gzz_h0=norm,
            normalization_height_nm=float(hs[i0]),
            mu_hartree=sol.mu,
            occupied_subbands=sol.n_occupied,
            max_dyson_residual=responses["film-rpa"].max_residual,
        ),
    )
    for tag in values:
        for h, (gxx, gzz) in zip(hs, values[tag]):
            table.add(tag, w_si, h, gzz, gxx, norm=norm)
    for h in hs[hs > 0]:
        loc = local_spd_zz(units.nm_to_bohr(h), omega, mat)
        table.add("local", w_si, h, loc.zz, loc.xx, norm=norm)
    return table.sort(), responses


def run_scf(cfg: ExperimentConfig, path=None) -> ScfSolution:
    """Solve the slab and optionally write the versioned solution file.

    The file is written even when the iteration did not converge (the
    ``converged`` flag is stored); callers decide on the exit status.
    """
    sol = scf_solve(cfg.slab_spec(), cfg.material())
    if path is not None:
        save_solution(sol, path, config=cfg.data)
    return sol


def summarize(tables: dict) -> dict:
    """Machine-readable summary of a set of tables (one entry per table)."""
    out = {}
    for name, t in tables.items():
        entry = {"rows": len(t.rows), "models": sorted({r[0] for r in t.rows})}
        for key in ("interface_ratio", "rpa_gzz_h0", "hydro_gzz_h0", "max_dyson_residual"):
            if key in t.meta:
                entry[key] = t.meta[key]
        out[name] = entry
    return out


def interpolate_value(table: SpectrumTable, model, h_nm, omega_rad_s=None, column=5):
    """Log-log interpolation of a table column in h (for quick lookups)."""
    rows = sorted((r for r in table.select(model, omega_rad_s) if r[2] > 0), key=lambda r: r[2])
    h = np.array([r[2] for r in rows])
    v = np.array([r[column] for r in rows])
    return float(np.exp(np.interp(math.log(h_nm), np.log(h), np.log(v))))

"""Command-line entry point: ``fluctspd {scf,fig1,fig2,fig3,spd}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import units
from .continuum import bulk_spectrum, hydro_spd_zz, local_spd_zz
from .errors import ConfigError, ConvergenceError, QuadratureError, SingularKernelError
from .experiments import (
    ExperimentConfig,
    SpectrumTable,
    obtain_solution,
    run_fig1,
    run_fig2,
    run_fig3,
    run_scf,
    summarize,
)
from .response import FilmResponse, default_q_range, subband_set

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4

MODELS = ("local", "hydro", "bulk", "film-ibm", "film-rpa")


def parse_omega(text: str, wp_rad_s: float) -> float:
    """Frequency in rad/s from ``"2.3e15"`` (rad/s) or ``"0.1wp"`` (fraction of wp)."""
    t = text.strip().lower()
    try:
        if t.endswith("wp"):
            val = float(t[:-2]) * wp_rad_s
        else:
            val = float(t)
    except ValueError as exc:
        raise ConfigError(f"cannot parse frequency {text!r}") from exc
    if not val > 0:
        raise ConfigError("frequency must be positive")
    return val


def parse_h_range(text: str):
    """``"h"``, ``"a:b"`` (60 log points) or ``"a:b:n"`` in nm; returns a dict of sweep keys."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"cannot parse h range {text!r}") from exc
    if len(nums) == 1:
        return {"single": nums[0]}
    if len(nums) not in (2, 3) or (len(nums) == 3 and not nums[2].is_integer()):
        raise ConfigError("h range must be 'h', 'min:max' or 'min:max:n'")
    out = {"h_min_nm": nums[0], "h_max_nm": nums[1]}
    if len(nums) == 3:
        out["h_points"] = int(nums[2])
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fluctspd", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="JSON configuration file")
        sp.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
        sp.add_argument("--threads", type=int, default=1)
        return sp

    common(sub.add_parser("scf", help="solve the jellium slab and save the solution"))
    for name in ("fig1", "fig2"):
        sp = common(sub.add_parser(name, help=f"reproduce {name} as a CSV table"))
        sp.add_argument("--omega", action="append", help="rad/s or fraction like 0.1wp; repeatable")
        sp.add_argument("--h-range", help="nm: min:max[:n]")
    sp = common(sub.add_parser("fig3", help="film SPD (IBM, RPA, local)"))
    sp.add_argument("--omega", action="append")
    sp.add_argument("--h-range")
    sp.add_argument("--scf-file", type=Path)
    sp.add_argument("--diagnostics", action="store_true", help="also write per-Q response tables")
    sp = common(sub.add_parser("spd", help="single-point SPD query"))
    sp.add_argument("--model", choices=MODELS, required=True)
    sp.add_argument("--omega", required=True)
    sp.add_argument("--h-range", default="1.0", help="height in nm (ignored for bulk)")
    sp.add_argument("--scf-file", type=Path)
    return p


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict({})
    if getattr(args, "out", None) is not None:
        cfg = cfg.updated("output", directory=str(args.out))
    omega = getattr(args, "omega", None)
    if isinstance(omega, list) and omega:
        wp = cfg.data["material"]["plasma_frequency_rad_s"]
        cfg = cfg.updated(
            "sweep", omega_rad_s=[parse_omega(w, wp) for w in omega], omega_fractions_of_wp=None
        )
    hr = getattr(args, "h_range", None)
    if hr and args.command != "spd":
        rng = parse_h_range(hr)
        if "single" in rng:
            raise ConfigError("figure commands need a range min:max[:n]")
        cfg = cfg.updated("sweep", **rng)
    return cfg


def _outdir(cfg) -> Path:
    d = Path(cfg.data["output"]["directory"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_summary(outdir: Path, name: str, table: SpectrumTable):
    path = outdir / "summary.json"
    data = json.loads(path.read_text()) if path.exists() else {}
    data.update(summarize({name: table}))
    path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n")


def cmd_scf(args, cfg) -> int:
    out = _outdir(cfg) / "scf_solution.json"
    sol = run_scf(cfg, out)
    print(f"mu_ev={units.hartree_to_ev(sol.mu):.6f}")
    print(f"occupied_subbands={sol.n_occupied}")
    print(f"neutrality_residual={sol.neutrality_residual:.3e}")
    print(f"iterations={sol.iterations}")
    print(f"converged={sol.converged}")
    print(f"file={out}")
    return EXIT_OK if sol.converged else EXIT_CONVERGENCE


def cmd_fig(args, cfg) -> int:
    outdir = _outdir(cfg)
    if args.command == "fig1":
        table = run_fig1(cfg, threads=args.threads)
    elif args.command == "fig2":
        table = run_fig2(cfg, threads=args.threads)
        for w, r in table.meta["interface_ratio"].items():
            print(f"interface_ratio omega_rad_s={w} ratio={r:.4f}")
    else:
        table, responses = run_fig3(cfg, scf_file=args.scf_file, threads=args.threads)
        if args.diagnostics:
            for tag, fr in responses.items():
                fr.write_diagnostics(outdir / f"fig3_{tag}_response.csv")
    path = table.write(outdir / f"{args.command}.csv")
    _write_summary(outdir, args.command, table)
    print(f"wrote {path} ({len(table.rows)} rows)")
    return EXIT_OK


def cmd_spd(args, cfg) -> int:
    mat = cfg.material()
    omega = units.rad_s_to_au(parse_omega(args.omega, mat.plasma_frequency))
    rng = parse_h_range(args.h_range)
    if "single" not in rng:
        raise ConfigError("spd takes a single height")
    h_nm = rng["single"]
    h = units.nm_to_bohr(h_nm)
    if args.model == "local":
        v = local_spd_zz(h, omega, mat)
        gzz, gxx = v.zz, v.xx
    elif args.model == "hydro":
        v = hydro_spd_zz(h, omega, mat)
        gzz, gxx = v.zz, v.xx
    elif args.model == "bulk":
        v = bulk_spectrum(omega, mat)
        gzz, gxx = v.g_ee, v.g_ee / 3.0
    else:
        sol = obtain_solution(cfg, args.scf_file)
        flavor, mode = ("ibm", "zero") if args.model == "film-ibm" else ("self_consistent", "full")
        r = cfg.data["response"]
        sb = subband_set(sol, flavor, cutoff=r["cutoff_fermi_energies"])
        fr = FilmResponse(sb, cfg.response_grid(sol), omega, mode=mode, coulomb=r["coulomb"],
                          threads=args.threads)
        gxx, gzz = fr.spd(h, mat.temperature, q_range=default_q_range([h], sb), rtol=r["rtol"])
    print(json.dumps({"model": args.model, "omega_au": omega, "h_nm": h_nm,
                      "g_zz": float(gzz), "g_xx": float(gxx)}))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = _config(args)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "scf":
            return cmd_scf(args, cfg)
        if args.command == "spd":
            return cmd_spd(args, cfg)
        return cmd_fig(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, QuadratureError, SingularKernelError) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

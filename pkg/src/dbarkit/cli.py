"""Command line interface.

Subcommands mirror the pipeline stages: ``green-eval``,
``validate-green``, ``simulate-dn``, ``scatter``, ``reconstruct-q``,
``reconstruct-sigma``, ``scan-exceptional``, ``dot``.  Every run writes
CSV outputs, PNG figures, and a ``manifest.json`` capturing the full
parameter set into the chosen output directory.

Options may come from a flat ``key = value`` config file (``--config``);
explicit command line flags win over config values.  Keys are the flag
names with dashes replaced by underscores (documented in the README).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from dbarkit.bie import (
    TruncationSpec,
    radial_profile_to_grid,
    read_scattering_csv,
    scattering_radial,
    truncate_scattering,
    write_scattering_csv,
)
from dbarkit.core import InvalidArgument, PeriodicGrid
from dbarkit.faddeev import green_faddeev
from dbarkit.forward import (
    add_noise,
    assemble_dn,
    disk_mesh,
    dn_homogeneous,
    read_dn_csv,
    write_dn_csv,
)
from dbarkit.experiments import (
    dbar_defect_curve,
    dot_pipeline,
    radial_reconstruction,
    scan_exceptional,
)
from dbarkit.potentials import (
    DotScene,
    ExceptionalFamily,
    case1_potential,
    case2_potential,
    case3_sigma,
    case4_sigma,
    conductivity_potential,
)
from dbarkit.reconstruct import reconstruct_conductivity, reconstruct_potential
from dbarkit import report

CASES = {
    "zero": (lambda r: np.zeros_like(r), None),
    "case1": (case1_potential, None),
    "case2": (case2_potential, None),
    "case3": (conductivity_potential(case3_sigma), case3_sigma),
    "case4": (conductivity_potential(case4_sigma), case4_sigma),
}


def read_config(path) -> dict:
    """Flat ``key = value`` text file; '#' starts a comment."""
    cfg = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"config line not key = value: {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


class Settings:
    """Cascade: CLI flag > config file > hard default."""

    def __init__(self, args: argparse.Namespace, cfg: dict):
        self._args = vars(args)
        self._cfg = cfg
        self.used: dict = {}

    def get(self, key: str, default, cast=None):
        val = self._args.get(key)
        if val is None:
            val = self._cfg.get(key)
        if val is None:
            val = default
        if cast is not None and val is not None:
            val = cast(val)
        self.used[key] = val
        return val


def _complex(text) -> complex:
    return complex(str(text).replace(" ", "").replace("i", "j"))


def _run_dir(settings: Settings) -> Path:
    out = Path(settings.get("outdir", "out", str))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_green_eval(settings: Settings):
    out = _run_dir(settings)
    E = settings.get("energy", -1.0, float)
    lam = settings.get("lam", 1 + 1j, _complex)
    n = settings.get("n", 200, int)
    zmax = settings.get("zmax", 2.0, float)
    guard = settings.get("guard", 0.05, float)
    ax = np.linspace(-zmax, zmax, n)
    zz = ax[None, :] + 1j * ax[:, None]
    vals = green_faddeev(zz, lam, E, guard=guard)
    outputs = [report.write_green_csv(out / "green.csv", zz, vals)]
    extras = {}
    extent = (-zmax, zmax, -zmax, zmax)
    for part, data in (("re", vals.real), ("im", vals.imag)):
        p = out / f"green_{part}.png"
        extras[f"green_{part}"] = report.heatmap_png(
            p, data, extent, f"{'Re' if part == 're' else 'Im'} g(z)")
        outputs.append(p)
    return outputs, extras


def cmd_validate_green(settings: Settings):
    out = _run_dir(settings)
    E = settings.get("energy", -1.0, float)
    lam_min = settings.get("lam_min", 1.06, float)
    lam_max = settings.get("lam_max", 30.0, float)
    n_lambda = settings.get("n_lambda", 12, int)
    dlam = settings.get("dlam", 1e-4, float)
    guard = settings.get("guard", 0.01, float)
    ms = [int(s) for s in str(settings.get("m_exponents", "6,7", str)).split(",")]
    lams = np.geomspace(lam_min, lam_max, n_lambda)
    curves = dbar_defect_curve(CASES["case1"][0], lams, E, m_exponents=ms,
                               dlam=dlam, guard=guard)
    cols = {"lambda_abs": lams}
    for m in ms:
        cols[f"defect_m{m}"] = curves[m]
    outputs = [report.write_table_csv(out / "dbar_defect.csv", cols)]
    outputs.append(report.curves_png(
        out / "dbar_defect.png", lams,
        {f"m={m}": curves[m] for m in ms},
        xlabel="|lambda|", ylabel="L2 defect on the disk",
        title="spectral-equation defect of LS solutions", logy=True))
    return outputs, {}


def cmd_simulate_dn(settings: Settings):
    out = _run_dir(settings)
    case = settings.get("case", "case1", str)
    if case not in CASES:
        raise InvalidArgument(f"unknown case {case!r}; pick from {sorted(CASES)}")
    E = settings.get("energy", -1.0, float)
    n_modes = settings.get("n_modes", 16, int)
    refine = settings.get("mesh_refine", 6, int)
    noise = settings.get("noise", 0.0, float)
    seed = settings.get("seed", 0, int)
    q0_profile = CASES[case][0]
    mesh = disk_mesh(refine)
    Lq = assemble_dn(lambda z: q0_profile(np.abs(z)) - E, n_modes, mesh)
    L0 = dn_homogeneous(E, n_modes)
    outputs = []
    write_dn_csv(out / "dn_q.csv", Lq)
    outputs.append(out / "dn_q.csv")
    write_dn_csv(out / "dn_ref.csv", L0)
    outputs.append(out / "dn_ref.csv")
    if noise > 0:
        write_dn_csv(out / "dn_q_noisy.csv", add_noise(Lq, noise, seed))
        outputs.append(out / "dn_q_noisy.csv")
    return outputs, {"triangles": mesh.n_triangles}


def _truncation(settings: Settings) -> TruncationSpec:
    return TruncationSpec(
        a=settings.get("ellipse_a", 5.0, float),
        b=settings.get("ellipse_b", 5.0, float),
        phi=settings.get("ellipse_phi", 0.0, float),
        r1=settings.get("r1", 1.05, float),
    )


def cmd_scatter(settings: Settings):
    out = _run_dir(settings)
    E = settings.get("energy", -1.0, float)
    dn_path = settings.get("dn", None, str)
    ref_path = settings.get("dn_ref", None, str)
    if not dn_path or not ref_path:
        raise InvalidArgument("scatter needs --dn and --dn-ref CSV paths")
    Lq = read_dn_csv(dn_path)
    L0 = read_dn_csv(ref_path)
    trunc = _truncation(settings)
    nb = settings.get("nb", 128, int)
    guard = settings.get("guard", 0.05, float)
    lambda_m = settings.get("lambda_m", 7, int)
    n_radial = settings.get("n_radial", 44, int)
    grid = PeriodicGrid(m=lambda_m, half_width=2.1 * max(trunc.a, trunc.b))
    r_lo = max(1.0 + guard + 0.02, trunc.r1 * 1.01)
    radii = np.linspace(r_lo, max(trunc.a, trunc.b) * 1.01, n_radial)
    tvals, ok = scattering_radial(Lq, L0, radii, E, nb=nb, guard=guard)
    t_grid = radial_profile_to_grid(radii, tvals, ok, grid)
    t_R = truncate_scattering(t_grid, trunc)
    outputs = [report.write_table_csv(out / "scattering_radial.csv", {
        "lambda_abs": radii, "re": np.where(ok, tvals.real, np.nan),
        "im": np.where(ok, tvals.imag, np.nan)})]
    write_scattering_csv(out / "scattering.csv", t_grid)
    outputs.append(out / "scattering.csv")
    write_scattering_csv(out / "scattering_truncated.csv", t_R)
    outputs.append(out / "scattering_truncated.csv")
    pngs, extras = report.scattering_pngs(out, "scattering", t_grid, trunc)
    outputs += pngs
    return outputs, extras


def _recon_common(settings: Settings):
    E = settings.get("energy", -1.0, float)
    scat_path = settings.get("scattering", None, str)
    if not scat_path:
        raise InvalidArgument("need --scattering CSV (a truncated grid dump)")
    t = read_scattering_csv(scat_path)
    n_r = settings.get("n_recon", 13, int)
    radii = np.linspace(0.0, settings.get("r_max", 0.92, float), n_r)
    return E, t, radii


def cmd_reconstruct_q(settings: Settings):
    out = _run_dir(settings)
    E, t, radii = _recon_common(settings)
    dz = settings.get("dz", 1e-3, float)
    res = reconstruct_potential(t, E, radii.astype(complex), dz=dz)
    outputs = [report.write_table_csv(out / "recon_q.csv", {
        "x": res.z_nodes.real, "y": res.z_nodes.imag,
        "value_re": res.values.real, "value_im": res.values.imag})]
    outputs.append(report.curves_png(
        out / "recon_q.png", radii, {"q0": res.values.real},
        xlabel="|z|", ylabel="q0", title="reconstructed potential"))
    return outputs, {"metadata": res.metadata}


def cmd_reconstruct_sigma(settings: Settings):
    out = _run_dir(settings)
    E, t, radii = _recon_common(settings)
    res = reconstruct_conductivity(
        t, E, radii.astype(complex),
        settings.get("boundary_value", 1.0, float),
        r_star=settings.get("r_star", 2.5, float),
        width=settings.get("r_width", 0.15, float))
    outputs = [report.write_table_csv(out / "recon_sigma.csv", {
        "x": res.z_nodes.real, "y": res.z_nodes.imag,
        "value_re": res.values, "value_im": np.zeros_like(res.values)})]
    outputs.append(report.curves_png(
        out / "recon_sigma.png", radii, {"sigma": res.values},
        xlabel="|z|", ylabel="sigma", title="reconstructed conductivity"))
    return outputs, {"metadata": res.metadata}


def cmd_scan_exceptional(settings: Settings):
    out = _run_dir(settings)
    E = settings.get("energy", -1.0, float)
    kind = settings.get("family", "alpha_phi", str)
    alphas = np.linspace(settings.get("alpha_min", -35.0, float),
                         settings.get("alpha_max", 35.0, float),
                         settings.get("n_alpha", 71, int))
    lams = np.linspace(settings.get("lam_min", 1.01, float),
                       settings.get("lam_max", 4.5, float),
                       settings.get("n_lambda", 50, int))
    m = settings.get("m", 8, int)
    guard = settings.get("guard", 0.005, float)
    maxiter = settings.get("maxiter", 400, int)
    csv_path = out / "scan.csv"
    skip = set()
    if settings.get("resume", 0, int) and csv_path.exists():
        with open(csv_path, newline="") as fh:
            rd = csv.reader(fh)
            next(rd, None)
            for row in rd:
                if row:
                    skip.add((int(row[0]), int(row[1])))
    mode = "a" if skip else "w"
    fh = open(csv_path, mode, newline="", buffering=1)
    writer = csv.writer(fh)
    if not skip:
        writer.writerow(["i_alpha", "i_lambda", "alpha", "lambda_abs",
                         "t_re", "flagged"])

    def on_cell(i, j, alpha, lam, t_re, flagged):
        writer.writerow([i, j, repr(alpha), repr(lam), repr(float(t_re)),
                         int(flagged)])

    family = ExceptionalFamily(kind=kind)
    res = scan_exceptional(family, alphas, lams, E, m=m, guard=guard,
                           maxiter=maxiter, on_cell=on_cell, skip=skip)
    fh.close()
    if skip:  # fill resumed cells back in from the checkpoint file
        with open(csv_path, newline="") as fh2:
            rd = csv.reader(fh2)
            next(rd)
            for row in rd:
                if row:
                    i, j = int(row[0]), int(row[1])
                    res.t_values[i, j] = float(row[4])
                    res.flagged[i, j] = bool(int(row[5]))
        res.blowup = res.flagged | (np.abs(np.nan_to_num(res.t_values))
                                    > res.blowup_threshold)
    extras = {"scan": report.scan_png(out / "scan.png", alphas, lams,
                                      res.t_values, res.blowup),
              "flagged_cells": int(res.flagged.sum()),
              "blowup_cells": int(res.blowup.sum())}
    return [csv_path, out / "scan.png"], extras


def _disk_field(z_nodes, values):
    """Scatter disk samples back onto their square grid for rendering."""
    xs = np.unique(z_nodes.real)
    field = np.full((xs.size, xs.size), np.nan)
    ix = np.searchsorted(xs, z_nodes.real)
    iy = np.searchsorted(xs, z_nodes.imag)
    field[iy, ix] = values
    extent = (xs[0], xs[-1], xs[0], xs[-1])
    return field, extent


def cmd_dot(settings: Settings):
    out = _run_dir(settings)
    scene = DotScene(omega=settings.get("omega", 1e8, float))
    trunc = TruncationSpec(
        a=settings.get("ellipse_a", 7.0, float),
        b=settings.get("ellipse_b", 7.0, float),
        phi=settings.get("ellipse_phi", 0.0, float),
        r1=settings.get("r1", 1.1, float))
    res = dot_pipeline(
        scene, trunc,
        noise=settings.get("noise", 5e-5, float),
        seed=settings.get("seed", 0, int),
        n_modes=settings.get("n_modes", 16, int),
        mesh_refine=settings.get("mesh_refine", 6, int),
        nb=settings.get("nb", 72, int),
        lambda_m=settings.get("lambda_m", 6, int),
        n_z=settings.get("n_z", 9, int),
        paper_scale=bool(settings.get("paper_scale", 0, int)))
    outputs = [report.write_table_csv(out / "dot_recon.csv", {
        "x": res.z_nodes.real, "y": res.z_nodes.imag,
        "d_recon": res.d_recon, "d_truth": res.d_truth,
        "ok": res.ok.astype(int)})]
    write_scattering_csv(out / "dot_scattering.csv", res.scattering)
    outputs.append(out / "dot_scattering.csv")
    pngs, extras = report.scattering_pngs(out, "dot_scattering",
                                          res.scattering, trunc)
    outputs += pngs
    for stem, vals in (("dot_recon", res.d_recon), ("dot_truth", res.d_truth)):
        field, ext = _disk_field(res.z_nodes, vals)
        p = out / f"{stem}.png"
        extras[stem] = report.heatmap_png(p, field, ext, stem.replace("_", " "),
                                          mask=np.isfinite(field))
        outputs.append(p)
    extras.update({"energy": {"re": res.energy.real, "im": res.energy.imag},
                   "rel_l2_error": res.rel_l2_error,
                   "pipeline": res.params})
    return outputs, extras


COMMANDS = {
    "green-eval": cmd_green_eval,
    "validate-green": cmd_validate_green,
    "simulate-dn": cmd_simulate_dn,
    "scatter": cmd_scatter,
    "reconstruct-q": cmd_reconstruct_q,
    "reconstruct-sigma": cmd_reconstruct_sigma,
    "scan-exceptional": cmd_scan_exceptional,
    "dot": cmd_dot,
}

_FLAGS: dict[str, list[tuple[str, type]]] = {
    "green-eval": [("energy", float), ("lam", str), ("n", int),
                   ("zmax", float), ("guard", float)],
    "validate-green": [("energy", float), ("lam-min", float),
                       ("lam-max", float), ("n-lambda", int),
                       ("dlam", float), ("guard", float),
                       ("m-exponents", str)],
    "simulate-dn": [("case", str), ("energy", float), ("n-modes", int),
                    ("mesh-refine", int), ("noise", float), ("seed", int)],
    "scatter": [("energy", float), ("dn", str), ("dn-ref", str),
                ("nb", int), ("guard", float), ("lambda-m", int),
                ("n-radial", int), ("ellipse-a", float), ("ellipse-b", float),
                ("ellipse-phi", float), ("r1", float)],
    "reconstruct-q": [("energy", float), ("scattering", str), ("dz", float),
                      ("n-recon", int), ("r-max", float)],
    "reconstruct-sigma": [("energy", float), ("scattering", str),
                          ("boundary-value", float), ("r-star", float),
                          ("r-width", float), ("n-recon", int),
                          ("r-max", float)],
    "scan-exceptional": [("energy", float), ("family", str),
                         ("alpha-min", float), ("alpha-max", float),
                         ("n-alpha", int), ("lam-min", float),
                         ("lam-max", float), ("n-lambda", int), ("m", int),
                         ("guard", float), ("maxiter", int), ("resume", int)],
    "dot": [("omega", float), ("noise", float), ("seed", int),
            ("n-modes", int), ("mesh-refine", int), ("nb", int),
            ("lambda-m", int), ("n-z", int), ("ellipse-a", float),
            ("ellipse-b", float), ("ellipse-phi", float), ("r1", float),
            ("paper-scale", int)],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbarkit",
        description="D-bar inverse scattering at negative energy")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, flags in _FLAGS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None,
                       help="flat key = value settings file")
        p.add_argument("--outdir", type=str, default=None,
                       help="output directory (default: out)")
        for flag, typ in flags:
            p.add_argument(f"--{flag}", type=typ, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = read_config(args.config) if args.config else {}
    settings = Settings(args, cfg)
    try:
        outputs, extras = COMMANDS[args.command](settings)
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outdir = Path(settings.used.get("outdir") or "out")
    manifest = report.write_manifest(outdir, args.command, settings.used,
                                     outputs, extras)
    for p in list(outputs) + [manifest]:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver: forward data, MUSIC maps, predictors, and checks.

Every subcommand writes its artifacts under ``--out PREFIX`` and a
``PREFIX.manifest.txt`` holding all the parameters needed to rerun it.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, geometry, io, msr, music, specfun
from .errors import (
    ConfigError,
    ConsistencyError,
    DegenerateGeometryError,
    DomainError,
    NumericalError,
    SolverError,
)
from .forward import DEFAULT_NODES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_NUMERICAL = 4

DEFAULT_SEED = msr.NoiseSpec(20.0).seed
PRESET_WAVELENGTHS = (math.pi, 0.8, 0.4, 0.2)
PRESETS = {
    "fig2": dict(arcs=["gamma1"], n_directions=32),
    "fig3": dict(arcs=["gamma2"], n_directions=32),
    "fig4": dict(arcs=["gamma1", "gamma2"], n_directions=48),
}
LEMMA_NS = (8, 16, 32, 64, 128)
LEMMA_KX = (0.0, 0.5, 1.8412, 5.0, 10.0)
# generic direction of x and xi for the lemma table
LEMMA_X_ANGLE = 0.3
LEMMA_XI_ANGLE = 1.1


@dataclass
class RunConfig:
    arcs: list = field(default_factory=lambda: ["gamma1"])
    wavelength: float = 0.4
    n_directions: int = 32
    scheme: str = "uniform"
    snr_db: float = 20.0
    seed: int = DEFAULT_SEED
    tau: float = msr.DEFAULT_TAU
    grid: music.ImageGrid = field(default_factory=music.ImageGrid)
    output_prefix: str = "arcmusic"
    forced_m: int | None = None
    solver_nodes: int = DEFAULT_NODES
    workers: int = 1
    source: str = "bie"
    msr_file: str | None = None
    scatterers: list = field(default_factory=list)

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength

    def validate(self):
        if not self.arcs and not self.scatterers:
            raise ConfigError("no arcs given")
        if not self.wavelength > 0:
            raise ConfigError("wavelength must be positive")
        if self.n_directions < 2:
            raise ConfigError("need at least two directions")
        if not 0 < self.tau < 1:
            raise ConfigError("tau must lie in (0, 1)")
        if self.forced_m is not None and not 0 <= self.forced_m < self.n_directions:
            raise ConfigError("forced M must satisfy 0 <= M < N")
        if self.solver_nodes < 16:
            raise ConfigError("nodes must be at least 16")
        if self.source not in ("bie", "synthetic"):
            raise ConfigError("source must be 'bie' or 'synthetic'")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        return self

    def resolved_arcs(self):
        try:
            return [geometry.resolve_arc(a) for a in self.arcs]
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def directions(self):
        return msr.build_directions(self.n_directions, self.scheme)

    def noise(self):
        return msr.NoiseSpec(self.snr_db, self.seed)

    def sampling(self):
        if self.scatterers:
            pts = [s[:2] for s in self.scatterers]
            nrm = [s[2:] for s in self.scatterers]
            return geometry.point_sampling(pts, nrm)
        return geometry.sample_arcs(self.resolved_arcs(), self.wavelength)

    def manifest(self):
        g = self.grid
        return {
            "version": __version__,
            "arcs": ",".join(self.arcs) if self.arcs else "-",
            "scatterers": ";".join(",".join(repr(v) for v in s) for s in self.scatterers) or "-",
            "wavelength": repr(self.wavelength),
            "k": repr(self.k),
            "N": self.n_directions,
            "scheme": self.scheme,
            "snr_db": repr(self.snr_db),
            "seed": self.seed,
            "tau": repr(self.tau),
            "forced_M": "-" if self.forced_m is None else self.forced_m,
            "nodes": self.solver_nodes,
            "grid": f"{g.nx}x{g.ny}",
            "region": f"{g.x_min!r},{g.x_max!r},{g.y_min!r},{g.y_max!r}",
        }


# ---------------------------------------------------------------- parsing


def _parse_grid(text):
    parts = text.lower().replace("×", "x").split("x")
    if len(parts) != 2:
        raise ConfigError(f"grid must look like NXxNY, got {text!r}")
    try:
        nx, ny = (int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"grid must look like NXxNY, got {text!r}") from exc
    return nx, ny


def _parse_floats(text, count, what):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"{what}: expected numbers, got {text!r}") from exc
    if len(vals) not in count:
        raise ConfigError(f"{what}: expected {' or '.join(map(str, count))} values")
    return vals


def _parse_scatterer(text):
    vals = _parse_floats(text, (2, 4), "scatterer")
    if len(vals) == 2:
        vals += [0.0, 1.0]
    return tuple(vals)


def _split_arcs(values):
    out = []
    for v in values:
        out.extend(p.strip() for p in str(v).split(",") if p.strip())
    return out


_FLOAT_KEYS = {"wavelength", "snr_db", "tau"}
_INT_KEYS = {"n", "seed", "force_m", "nodes", "workers"}
_KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS | {
    "arc", "scheme", "no_noise", "grid", "region", "out", "source", "msr", "scatterer",
}


def _read_config_file(path):
    try:
        raw = io.parse_key_values(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    out = {}
    for key, value in raw.items():
        key = key.replace("-", "_")
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            if key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _INT_KEYS:
                out[key] = int(value)
            elif key == "no_noise":
                out[key] = value.lower() in ("1", "true", "yes", "on")
            elif key in ("arc", "scatterer"):
                out[key] = [v for v in value.split(";") if v.strip()] if key == "scatterer" else [value]
            else:
                out[key] = value
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: bad value {value!r}") from exc
    return out


def build_config(args) -> RunConfig:
    """Merge defaults, the optional config file, and explicit flags."""
    values = {}
    if getattr(args, "config", None):
        values.update(_read_config_file(args.config))
    for key in _KNOWN_KEYS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            values[key] = v
    cfg = RunConfig()
    if "arc" in values:
        cfg.arcs = _split_arcs(values["arc"])
    if "scatterer" in values:
        cfg.scatterers = [_parse_scatterer(s) for s in values["scatterer"]]
        if "arc" not in values:
            cfg.arcs = []
    for key, attr in (("wavelength", "wavelength"), ("n", "n_directions"), ("scheme", "scheme"),
                      ("snr_db", "snr_db"), ("seed", "seed"), ("tau", "tau"),
                      ("force_m", "forced_m"), ("nodes", "solver_nodes"), ("out", "output_prefix"),
                      ("workers", "workers"), ("source", "source"), ("msr", "msr_file")):
        if key in values:
            setattr(cfg, attr, values[key])
    if values.get("no_noise"):
        cfg.snr_db = math.inf
    nx, ny = _parse_grid(values["grid"]) if "grid" in values else (cfg.grid.nx, cfg.grid.ny)
    if "region" in values:
        x0, x1, y0, y1 = _parse_floats(values["region"], (4,), "region")
    else:
        x0, x1, y0, y1 = cfg.grid.x_min, cfg.grid.x_max, cfg.grid.y_min, cfg.grid.y_max
    try:
        cfg.grid = music.ImageGrid(x0, x1, y0, y1, nx, ny)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.scheme not in ("uniform", "paper", "paper_formula"):
        raise ConfigError(f"unknown scheme {cfg.scheme!r}")
    return cfg.validate()


def expand_preset(cfg: RunConfig, preset: str | None):
    """List of ``(suffix, config)`` runs for a figure preset."""
    if not preset:
        return [("", cfg)]
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    base = replace(cfg, **PRESETS[preset])
    runs = []
    for lam in PRESET_WAVELENGTHS:
        tag = "pi" if lam == math.pi else f"{lam:g}"
        runs.append((f".{preset}.lambda_{tag}", replace(base, wavelength=lam)))
    return runs


# ---------------------------------------------------------------- stages


def _emit(path, text, quiet=False):
    io.atomic_write(path, text)
    if not quiet:
        print(f"wrote {path}")


def _noise_free_msr(cfg: RunConfig, nodes=None):
    if cfg.msr_file:
        entries, _ = io.load_complex_matrix(cfg.msr_file)
        if entries.shape != (cfg.n_directions, cfg.n_directions):
            raise ConfigError(f"MSR file is {entries.shape}, expected N = {cfg.n_directions}")
        return msr.MsrMatrix(entries, cfg.directions(), cfg.k, None, ("file",))
    if cfg.source == "synthetic":
        samp = cfg.sampling()
        return music.synthetic_msr(samp, cfg.directions(), cfg.k, np.ones(samp.count))
    return msr.assemble_msr(cfg.resolved_arcs(), cfg.k, cfg.directions(),
                            nodes or cfg.solver_nodes)


def _rank(cfg: RunConfig, result: msr.SvdResult):
    if cfg.forced_m is not None:
        return cfg.forced_m
    return min(msr.select_rank(result.singular_values, cfg.tau), cfg.n_directions - 1)


def convergence_table(cfg: RunConfig):
    """Rows ``(nodes, 2*nodes, max|dK|/max|K|)`` around the configured node count."""
    base = cfg.solver_nodes
    levels = sorted({max(16, base // 2), base, 2 * base})
    mats = [_noise_free_msr(replace(cfg, msr_file=None, source="bie"), n).entries for n in levels]
    rows = []
    for (na, ka), (nb, kb) in zip(zip(levels, mats), zip(levels[1:], mats[1:])):
        rows.append((na, nb, float(np.max(np.abs(ka - kb)) / np.max(np.abs(kb)))))
    return rows, mats[levels.index(base)]


def run_imaging(cfg: RunConfig):
    """Noise, SVD, rank, map. Returns ``(map, svd, rank, msr)``."""
    clean = _noise_free_msr(cfg)
    data = msr.add_awgn(clean, cfg.noise())
    result = msr.svd(data)
    rank = _rank(cfg, result)
    imap = music.compute_map(result, rank, cfg.grid, cfg.directions(), cfg.k, cfg.workers,
                             metadata={"seed": cfg.seed, "snr_db": cfg.snr_db})
    return imap, result, rank, data


def write_map(prefix, imap, manifest, quiet=False):
    _emit(f"{prefix}.map.csv", io.format_map_csv(imap), quiet)
    payload, (low, high) = io.pgm_bytes(imap)
    io.atomic_write(f"{prefix}.map.pgm", payload)
    if not quiet:
        print(f"wrote {prefix}.map.pgm")
    lo, hi = imap.value_range()
    manifest.update({"kind": imap.kind, "clamp_count": imap.clamp_count,
                     "map_min": repr(lo), "map_max": repr(hi),
                     "pgm_low": repr(low), "pgm_high": repr(high)})


def refine_peak(func, start, step):
    """Maximise a smooth scalar field near ``start`` by compass search."""
    best = np.asarray(start, dtype=float)
    value = float(func(best[None, :])[0])
    moves = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]], float)
    while step > 1e-10:
        trial = best[None, :] + step * moves
        vals = func(trial)
        i = int(np.argmax(vals))
        if vals[i] > value:
            best, value = trial[i], float(vals[i])
        else:
            step *= 0.5
    return best, value


def lemma_table(ns=LEMMA_NS, kxs=LEMMA_KX):
    x_hat = np.array([math.cos(LEMMA_X_ANGLE), math.sin(LEMMA_X_ANGLE)])
    xi = np.array([math.cos(LEMMA_XI_ANGLE), math.sin(LEMMA_XI_ANGLE)])
    rows = []
    for n in ns:
        theta = msr.build_directions(n).vectors
        for kx in kxs:
            x = kx * x_hat
            err = abs(specfun.lemma_average(theta, xi, x, 1.0) - specfun.lemma_closed_form(xi, x, 1.0))
            rows.append((n, kx, float(err)))
    return rows


def lemma_monotone(rows, slack=1e-15):
    """True when errors are nonincreasing in N for each k|x| (up to rounding ``slack``)."""
    by_kx = {}
    for n, kx, err in rows:
        by_kx.setdefault(kx, []).append((n, err))
    for series in by_kx.values():
        errs = [e for _, e in sorted(series)]
        if any(b > a + slack for a, b in zip(errs, errs[1:])):
            return False
    return True


# ---------------------------------------------------------------- commands


def cmd_forward(cfg: RunConfig, quiet=False):
    if not cfg.arcs:
        raise ConfigError("forward needs at least one arc")
    rows, entries = convergence_table(cfg)
    data = msr.MsrMatrix(entries, cfg.directions(), cfg.k)
    sym = data.symmetry_defect()
    prefix = cfg.output_prefix
    header = {"arcs": ",".join(cfg.arcs), "wavelength": repr(cfg.wavelength),
              "k": repr(cfg.k), "N": cfg.n_directions, "scheme": cfg.scheme,
              "nodes": cfg.solver_nodes}
    _emit(f"{prefix}.msr.txt", io.format_complex_matrix(entries, header), quiet)
    table = "nodes,nodes_refined,max_relative_change\n" + "".join(
        f"{a},{b},{c!r}\n" for a, b, c in rows)
    _emit(f"{prefix}.convergence.csv", table, quiet)
    manifest = cfg.manifest()
    manifest.update({"command": "forward", "symmetry_defect": repr(sym)})
    for a, b, c in rows:
        manifest[f"convergence_{a}_{b}"] = repr(c)
    _emit(f"{prefix}.manifest.txt", io.format_manifest(manifest), quiet)
    if not quiet:
        print(f"symmetry defect {sym:.3e}")
        for a, b, c in rows:
            print(f"nodes {a:4d} -> {b:4d}: max relative change {c:.3e}")
    return {"symmetry": sym, "convergence": rows, "entries": entries}


def cmd_image(cfg: RunConfig, quiet=False):
    imap, result, rank, data = run_imaging(cfg)
    prefix = cfg.output_prefix
    manifest = cfg.manifest()
    manifest.update({"command": "image", "M_selected": rank,
                     "noise": "on" if cfg.noise().enabled else "off",
                     "sigma_1": repr(float(result.singular_values[0]))})
    write_map(prefix, imap, manifest, quiet)
    _emit(f"{prefix}.sv.csv", io.format_singular_values(result.singular_values, rank), quiet)
    _emit(f"{prefix}.manifest.txt", io.format_manifest(manifest), quiet)
    if not quiet:
        lo, hi = imap.value_range()
        print(f"M = {rank}, W in [{lo:.4g}, {hi:.4g}], clamped {imap.clamp_count}")
    return {"map": imap, "rank": rank, "svd": result}


def cmd_theory(cfg: RunConfig, quiet=False):
    samp = cfg.sampling()
    out = {}
    for kind, builder, values in (("theory_j1", music.theory_map_j1, music.theory_j1_values),
                                  ("theory_j0", music.theory_map_j0, music.theory_j0_values)):
        imap = builder(samp, cfg.grid, cfg.k)
        manifest = cfg.manifest()
        manifest.update({"command": "theory", "M_sampling": samp.count})
        prefix = f"{cfg.output_prefix}.{kind}"
        write_map(prefix, imap, manifest, quiet)
        if kind == "theory_j1":
            start = imap.grid.points()[np.unravel_index(np.argmax(imap.values), imap.values.shape)]
            step = (cfg.grid.x_max - cfg.grid.x_min) / (cfg.grid.nx - 1)
            _, peak = refine_peak(lambda p: values(samp, p, cfg.k)[0], start, step)
            manifest["refined_max"] = repr(peak)
            out["refined_max"] = peak
        _emit(f"{prefix}.manifest.txt", io.format_manifest(manifest), quiet)
        if not quiet:
            lo, hi = imap.value_range()
            extra = f", refined max {out['refined_max']:.6f}" if kind == "theory_j1" else ""
            print(f"{kind}: W in [{lo:.4g}, {hi:.4g}]{extra}, clamped {imap.clamp_count}")
        out[kind] = imap
    return out


def ridge_check(cfg: RunConfig, projector, point, normal, samples=4001):
    """Twin-ridge test on the normal line through ``point``."""
    expected = 1.8412 / cfg.k
    half = min(4 * expected, 1.0)
    t, pts = music.normal_line(point, normal, half, samples)
    w, _ = music.music_values(projector, pts, cfg.directions(), cfg.k)
    return music.ridge_offsets(t, w, expected)


def cmd_compare(cfg: RunConfig, quiet=False):
    clean_cfg = replace(cfg, snr_db=math.inf)
    samp = clean_cfg.sampling()
    if cfg.source == "synthetic" and cfg.forced_m is None:
        clean_cfg = replace(clean_cfg, forced_m=samp.count)
    imap, result, rank, _ = run_imaging(clean_cfg)
    if rank == 0:
        theory = music.ImagingMap(cfg.grid, np.ones_like(imap.values), music.THEORY_J1,
                                  {"clamp_count": 0})
    else:
        theory = music.theory_map_j1(samp, cfg.grid, cfg.k)
    diff = imap.values - theory.values
    sup = float(np.max(np.abs(diff)))
    rms = float(np.sqrt(np.mean(diff ** 2)))
    lines = [f"source: {cfg.source}", f"M: {rank}", f"M_sampling: {samp.count}",
             f"sup_discrepancy: {sup!r}", f"rms_discrepancy: {rms!r}"]
    report = {"sup": sup, "rms": rms, "rank": rank, "ridges": []}
    if rank > 0:
        projector = music.NoiseProjector.from_svd(result, rank)
        for m in range(samp.count):
            rep = ridge_check(clean_cfg, projector, samp.points[m], samp.normals[m])
            report["ridges"].append(rep)
            offs = ",".join(f"{o:.5f}" for o in rep.offsets) or "-"
            lines.append(f"ridge y_{m + 1}: offsets {offs} expected {rep.expected:.5f} "
                         f"centre_min {rep.centre_is_minimum} "
                         f"{'PASSED' if rep.passed else 'FAILED'}")
        passed = sum(r.passed for r in report["ridges"])
        lines.append(f"ridge_passed: {passed}/{samp.count}")
    text = "\n".join(lines) + "\n"
    prefix = cfg.output_prefix
    _emit(f"{prefix}.compare.txt", text, quiet)
    manifest = cfg.manifest()
    manifest.update({"command": "compare", "source": cfg.source, "M_selected": rank,
                     "sup_discrepancy": repr(sup), "rms_discrepancy": repr(rms)})
    _emit(f"{prefix}.manifest.txt", io.format_manifest(manifest), quiet)
    if not quiet:
        sys.stdout.write(text)
    return report


def cmd_lemma_check(cfg: RunConfig, quiet=False):
    rows = lemma_table()
    text = "N,kx,abs_error\n" + "".join(f"{n},{kx!r},{e!r}\n" for n, kx, e in rows)
    _emit(f"{cfg.output_prefix}.lemma.csv", text, quiet)
    if not quiet:
        for n, kx, e in rows:
            print(f"N={n:4d} k|x|={kx:7.4f} error={e:.3e}")
        print(f"monotone in N: {lemma_monotone(rows)}")
    return rows


COMMANDS = {
    "forward": cmd_forward,
    "image": cmd_image,
    "theory": cmd_theory,
    "compare": cmd_compare,
    "lemma-check": cmd_lemma_check,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="arcmusic", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; explicit flags override it")
    common.add_argument("--arc", action="append", help="preset name or arc file (repeatable)")
    common.add_argument("--scatterer", action="append",
                        help="point scatterer x,y[,nx,ny] instead of an arc (repeatable)")
    common.add_argument("--wavelength", type=float)
    common.add_argument("--n", type=int, help="number of directions N")
    common.add_argument("--scheme", choices=["uniform", "paper"])
    common.add_argument("--snr-db", dest="snr_db", type=float)
    common.add_argument("--no-noise", dest="no_noise", action="store_true")
    common.add_argument("--seed", type=int)
    common.add_argument("--tau", type=float)
    common.add_argument("--force-m", dest="force_m", type=int)
    common.add_argument("--grid", help="resolution NXxNY")
    common.add_argument("--region", help="xmin,xmax,ymin,ymax")
    common.add_argument("--nodes", type=int, help="solver nodes per arc")
    common.add_argument("--workers", type=int, help="threads for grid evaluation")
    common.add_argument("--source", choices=["bie", "synthetic"])
    common.add_argument("--msr", help="load the noise-free MSR from a dump file")
    common.add_argument("--out", help="output prefix")
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        command = COMMANDS[args.command]
        runs = expand_preset(cfg, args.preset)
        for suffix, run in runs:
            run = replace(run, output_prefix=cfg.output_prefix + suffix).validate()
            command(run, quiet=args.quiet)
    except (ConfigError, DomainError, DegenerateGeometryError, ConsistencyError) as exc:
        print(f"arcmusic: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"arcmusic: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except NumericalError as exc:
        print(f"arcmusic: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

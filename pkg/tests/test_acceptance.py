"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary
(and directly when this file is run as a script).
"""

import math
import time

import numpy as np
from scipy.optimize import minimize_scalar

from arcmusic import cli, geometry as g, msr, music, specfun
from arcmusic.forward import ForwardSolver

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = {}

SEED = cli.DEFAULT_SEED


def record(number, passed, detail, started):
    line = (f"criterion {number}: {'PASS' if passed else 'FAIL'} "
            f"({time.perf_counter() - started:.1f} s) {detail}")
    ACCEPTANCE_LINES[number] = line
    return passed


def k_of(lam):
    return 2 * math.pi / lam


def test_criterion_1_j1_maximum():
    t0 = time.perf_counter()
    res = minimize_scalar(lambda x: -specfun.bessel_j(1, x), bounds=(0, 4), method="bounded",
                          options={"xatol": 1e-10})
    x, v = res.x, -res.fun
    ok = abs(x - 1.8412) <= 1e-3 and abs(v - 0.5819) <= 5e-5
    assert record(1, ok, f"argmax {x:.5f}, max {v:.6f}", t0)


def test_criterion_2_lemma_identity():
    t0 = time.perf_counter()
    rows = cli.lemma_table()
    worst64 = max(e for n, kx, e in rows if n == 64 and kx > 0)
    mono = cli.lemma_monotone(rows)
    ok = worst64 <= 1e-8 and mono
    assert record(2, ok, f"max error at N=64 {worst64:.2e}, nonincreasing in N {mono}", t0)


def test_criterion_3_no_blow_up():
    t0 = time.perf_counter()
    lam = 0.5
    k = k_of(lam)
    samp = g.point_sampling([[0.0, 0.0]], [[0.0, 1.0]])
    grid = music.ImageGrid()
    theory = music.theory_map_j1(samp, grid, k)
    start = grid.points()[np.unravel_index(np.argmax(theory.values), theory.values.shape)]
    _, peak = cli.refine_peak(lambda p: music.theory_j1_values(samp, p, k)[0], start, 0.01)
    target = (1 - 0.6772) ** -0.5
    theory_ok = abs(peak - target) <= 1e-3

    cfg = cli.RunConfig(arcs=["gamma1"], wavelength=0.2, n_directions=32, snr_db=20.0, seed=SEED)
    imap, _, rank, _ = cli.run_imaging(cfg)
    wmax = float(imap.values.max())
    music_ok = imap.clamp_count == 0 and wmax <= 2.5
    ok = theory_ok and music_ok
    detail = (f"theory peak {peak:.5f} (grid max {theory.values.max():.5f}, target {target:.5f}); "
              f"BIE 20 dB map: M={rank}, clamp_count={imap.clamp_count}, max W {wmax:.3f} "
              f"(limit 2.5)")
    assert record(3, ok, detail, t0)


def test_criterion_4_theorem_oracle():
    t0 = time.perf_counter()
    lam = 0.4
    k = k_of(lam)
    dirs = msr.build_directions(64)
    samp = g.sample_half_wavelength(g.GAMMA1, lam)
    assert samp.count == 5
    result = msr.svd(music.synthetic_msr(samp, dirs, k, np.ones(samp.count)))
    grid = music.ImageGrid()
    mm = music.compute_map(result, 5, grid, dirs, k)
    tm = music.theory_map_j1(samp, grid, k)
    sup = float(np.max(np.abs(mm.values - tm.values)))
    assert record(4, sup <= 5e-2, f"sup-norm discrepancy {sup:.4f} (limit 0.05)", t0)


def twin_ridge(lam):
    k = k_of(lam)
    dirs = msr.build_directions(32)
    result = msr.svd(msr.assemble_msr(g.GAMMA1, k, dirs))
    rank = msr.select_rank(result.singular_values)
    proj = music.NoiseProjector.from_svd(result, rank)
    mid = g.param_at_length(g.GAMMA1, 0.5 * g.arc_length(g.GAMMA1))
    cfg = cli.RunConfig(wavelength=lam, n_directions=32)
    return cli.ridge_check(cfg, proj, g.GAMMA1.point(mid), g.GAMMA1.normal(mid))


def test_criterion_5_twin_ridges():
    t0 = time.perf_counter()
    small = twin_ridge(0.2)
    large = twin_ridge(math.pi)
    ok = small.passed and not large.passed
    detail = (f"lambda=0.2 offsets {tuple(round(o, 4) for o in small.offsets)} vs "
              f"{small.expected:.4f}, centre minimum {small.centre_is_minimum}; "
              f"lambda=pi ridge test {'passed' if large.passed else 'failed (expected)'}")
    assert record(5, ok, detail, t0)


def test_criterion_6_forward_integrity():
    t0 = time.perf_counter()
    dirs = msr.build_directions(32).vectors
    rng = np.random.default_rng(0)
    ang = rng.uniform(0, 2 * np.pi, (32, 2))
    xh = np.stack([np.cos(ang[:, 0]), np.sin(ang[:, 0])], axis=-1)
    th = np.stack([np.cos(ang[:, 1]), np.sin(ang[:, 1])], axis=-1)
    worst = [0.0, 0.0, 0.0]
    for arc in (g.GAMMA1, g.GAMMA2):
        for lam in (0.8, 0.4, 0.2):
            k = k_of(lam)
            coarse = ForwardSolver(arc, k, 128)
            fine = ForwardSolver(arc, k, 256)
            a = coarse.far_field_matrix(-dirs, dirs)
            b = fine.far_field_matrix(-dirs, dirs)
            worst[0] = max(worst[0], np.max(np.abs(a - b)) / np.max(np.abs(b)))
            fwd = np.diag(coarse.far_field_matrix(xh, th))
            back = np.diag(coarse.far_field_matrix(-th, -xh))
            worst[1] = max(worst[1], np.max(np.abs(fwd - back) / np.abs(fwd)))
            worst[2] = max(worst[2], np.linalg.norm(a - a.T) / np.linalg.norm(a))
    ok = worst[0] <= 1e-8 and worst[1] <= 1e-6 and worst[2] <= 1e-6
    detail = (f"self-convergence {worst[0]:.1e}, reciprocity {worst[1]:.1e}, "
              f"symmetry {worst[2]:.1e}")
    assert record(6, ok, detail, t0)


def test_criterion_7_rank_selection():
    t0 = time.perf_counter()
    k = k_of(0.4)
    clean = msr.assemble_msr(g.GAMMA1, k, msr.build_directions(32))
    m0 = msr.select_rank(msr.svd(clean).singular_values, 0.01)
    noisy = [msr.select_rank(msr.svd(msr.add_awgn(clean, msr.NoiseSpec(20.0, s))).singular_values,
                             0.01) for s in range(20)]
    spread = max(abs(m - m0) for m in noisy)
    physical = g.arc_length(g.GAMMA1) / 0.2
    ok = 3 <= m0 <= 9 and spread <= 2
    detail = (f"noise-free M={m0} (L/(lambda/2)={physical:.2f}); 20 dB over 20 seeds "
              f"M in [{min(noisy)}, {max(noisy)}], max deviation {spread} (limit 2)")
    assert record(7, ok, detail, t0)


def test_criterion_8_determinism(tmp_path):
    t0 = time.perf_counter()
    base = cli.RunConfig(arcs=["gamma1"], wavelength=0.2, seed=SEED)
    outputs = []
    for name, workers in (("a", 1), ("b", 1), ("c", 4)):
        cfg = cli.RunConfig(**{**base.__dict__, "workers": workers,
                               "output_prefix": str(tmp_path / name)})
        cli.cmd_image(cfg, quiet=True)
        outputs.append(tuple(open(f"{cfg.output_prefix}{ext}", "rb").read()
                             for ext in (".map.csv", ".sv.csv")))
    ok = outputs[0] == outputs[1] == outputs[2]
    assert record(8, ok, "two serial runs and one 4-thread run bitwise identical" if ok
                  else "outputs differ", t0)


def test_criterion_9_projector_svd_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        m, n = rng.integers(1, 65, size=2)
        a = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        r = msr.svd(a)
        u, v = r.left_vectors, r.right_vectors
        worst = max(worst,
                    np.linalg.norm(r.reconstruct() - a) / np.linalg.norm(a),
                    np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))),
                    np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))))
        if m == n and m > 1:
            proj = music.NoiseProjector.from_svd(r, int(rng.integers(0, m)))
            p = proj.matrix()
            worst = max(worst, np.max(np.abs(p @ p - p)), np.max(np.abs(p - p.conj().T)),
                        np.max(np.abs(p @ proj.basis), initial=0.0))
    for n in (4, 16, 32, 64):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        r = msr.svd(a)
        proj = music.NoiseProjector.from_svd(r, n // 2)
        p = proj.matrix()
        worst = max(worst, np.max(np.abs(p @ p - p)), np.max(np.abs(p - p.conj().T)),
                    np.max(np.abs(p @ proj.basis)))
    assert record(9, worst <= 1e-10, f"worst defect {worst:.1e}", t0)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    for name, func in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in func.__code__.co_varnames[:func.__code__.co_argcount]:
                    func(Path(tempfile.mkdtemp()))
                else:
                    func()
            except AssertionError:
                pass
    for number in sorted(ACCEPTANCE_LINES):
        print(ACCEPTANCE_LINES[number])

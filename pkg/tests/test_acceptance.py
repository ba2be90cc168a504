"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The desk-scale head
comparison (criterion 6) trains twelve operators and dominates the
runtime (~25 min on one core); everything else finishes in seconds to a
few minutes.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from oracles import laminate_oracle, naive_half_spectrum
from pefno.cli import EXIT_OK, main as cli_main
from pefno.dataset import generate_dataset
from pefno.fields import TensorField
from pefno.fno import FnoConfig, fno_backward, fno_forward, init_model
from pefno.grid import GridSpec
from pefno.materials import MaterialField, lame_from_engineering, voronoi_microstructure
from pefno.mechanics import LoadCase, solve_equilibrium, svk_stress, green_strain
from pefno.spectral import (
    POTENTIAL_FLUCT_SLOTS,
    POTENTIAL_MEAN_SLOTS,
    curl_potential,
    inc_potential,
    rdft2_forward,
    rdft2_inverse,
    spectral_div,
)
from pefno.training import TrainConfig, loss_data, loss_div, train, weight_matrix


@contextmanager
def criterion(num: int, name: str):
    start = time.time()
    try:
        yield
    except Exception:
        print(f"\nACCEPTANCE {num} {name}: FAIL ({time.time() - start:.1f}s)")
        raise
    print(f"\nACCEPTANCE {num} {name}: PASS ({time.time() - start:.1f}s)")


# ---------------------------------------------------------------------------
# 1. Encoding identity
# ---------------------------------------------------------------------------


def test_c1_encoding_identity():
    with criterion(1, "encoding identity (100 random encoded operators, 64^2)"):
        start = time.time()
        grid = GridSpec(64, 64)
        worst = 0.0
        for seed in range(100):
            rng = np.random.default_rng(10_000 + seed)
            model = init_model(FnoConfig(head="encoded"), seed)
            x = rng.uniform(0.0, 1.0, size=(2, 64, 64))
            res = fno_forward(model, x, grid)
            div = spectral_div(TensorField(grid, res.stress[0]))
            bound = 1e-11 * (2.0 * np.pi / grid.l) * np.abs(res.stress).max()
            ratio = np.abs(div.comps).max() / bound
            worst = max(worst, ratio)
            assert ratio < 1.0, f"seed {seed}: divergence {ratio:.3e} of the bound"
        elapsed = time.time() - start
        print(f"  worst divergence at {worst:.2e} of the 1e-11-scaled bound")
        assert elapsed < 60.0, f"runtime {elapsed:.1f}s exceeds the 1 minute budget"


# ---------------------------------------------------------------------------
# 2. Half-spectrum transform correctness
# ---------------------------------------------------------------------------


def test_c2_rdft_correctness():
    with criterion(2, "half-spectrum transform vs brute-force DFT"):
        rng = np.random.default_rng(77)
        worst = 0.0
        for n1 in (2, 4, 6, 8):
            for n2 in (2, 4, 6, 8):
                g = GridSpec(n1, n2)
                f = rng.normal(size=g.shape)
                spec = rdft2_forward(g, f)
                err = np.abs(spec.coeffs - naive_half_spectrum(f)).max()
                worst = max(worst, err)
                assert err < 1e-12, f"grid {n1}x{n2}: oracle mismatch {err:.3e}"
        g = GridSpec(64, 64)
        f = rng.uniform(-1.0, 1.0, size=g.shape)
        spec = rdft2_forward(g, f)
        round_err = np.abs(rdft2_inverse(spec) - f).max()
        assert round_err < 1e-12
        assert spec.coeffs.shape[0] == 33  # independent modes per axis at n = 64
        assert spec.kappa2.size == 64 and np.unique(np.abs(spec.kappa2)).size == 33
        print(f"  oracle worst {worst:.2e}, 64^2 roundtrip {round_err:.2e}, 33 modes per axis")


# ---------------------------------------------------------------------------
# 3. Operator identities, 1000 randomized trials each
# ---------------------------------------------------------------------------


def _random_admissible_potential(grid, rng, amplitude):
    a = np.zeros((3, 3, grid.n1, grid.n2))
    for r, c in POTENTIAL_FLUCT_SLOTS:
        ch = rng.normal(size=grid.shape) * amplitude
        a[r, c] = ch - ch.mean()
    for r, c in POTENTIAL_MEAN_SLOTS:
        a[r, c] = rng.normal() * amplitude
    return TensorField(grid, a)


def test_c3_operator_identities():
    with criterion(3, "div(curl) = 0 and inc symmetry/divergence, 1000 trials"):
        rng = np.random.default_rng(2024)
        sizes = (8, 12, 16, 24)
        worst_curl = 0.0
        for t in range(1000):
            n = sizes[t % len(sizes)]
            grid = GridSpec(n, n, l=float(rng.uniform(0.5, 2.0)))
            A = _random_admissible_potential(grid, rng, amplitude=float(rng.uniform(0.1, 10.0)))
            P = curl_potential(A)
            d = spectral_div(P)
            bound = 1e-11 * (2.0 * np.pi / grid.l) * np.abs(A.comps).max()
            worst_curl = max(worst_curl, np.abs(d.comps).max() / bound)
            assert np.abs(d.comps).max() < bound, f"trial {t}"
        worst_div = 0.0
        for t in range(1000):
            n = sizes[t % len(sizes)]
            grid = GridSpec(n, n, l=float(rng.uniform(0.5, 2.0)))
            b = rng.normal(size=(3, 3, n, n)) * float(rng.uniform(0.1, 10.0))
            B = TensorField(grid, 0.5 * (b + b.transpose(1, 0, 2, 3)))
            T = inc_potential(B)
            assert np.abs(T.comps - T.comps.transpose(1, 0, 2, 3)).max() < 1e-13
            d = spectral_div(T)
            bound = 1e-11 * (2.0 * np.pi / grid.l) * max(1.0, np.abs(T.comps).max())
            worst_div = max(worst_div, np.abs(d.comps).max() / bound)
            assert np.abs(d.comps).max() < bound, f"trial {t}"
        print(f"  worst div(curl) at {worst_curl:.2e}, worst div(inc) at {worst_div:.2e} of bound")


# ---------------------------------------------------------------------------
# 4. Mechanics oracle
# ---------------------------------------------------------------------------


def test_c4_mechanics_oracle():
    with criterion(4, "homogeneous + laminate equilibrium oracles"):
        # homogeneous: uniform deformation is exact; lam = mu = 20 GPa
        grid = GridSpec(64, 64)
        load = LoadCase.uniaxial(1.004)
        E22 = green_strain(load.Fbar)[1, 1]
        assert round(100.0 * E22, 3) == 0.401
        sample = solve_equilibrium(MaterialField.uniform(grid, 50.0, 0.25), load)
        closed = svk_stress(load.Fbar, 20.0, 20.0) * 1e3
        rel = (
            np.abs(sample.P_dat.comps - closed[:, :, None, None]).max() / np.abs(closed).max()
        )
        assert rel < 1e-10
        p22 = sample.P_dat.comps[1, 1, 0, 0]
        assert p22 == pytest.approx(241.44192, rel=1e-10)
        assert round(p22, 3) == 241.442

        # laminate: traction continuity and the semi-analytic per-phase state
        n, tol = 32, 1e-9
        Emod = np.full((n, n), 50.0)
        Emod[n // 2 :, :] = 300.0
        mat = MaterialField(GridSpec(n, n), Emod, np.full((n, n), 0.25))
        lam_sample = solve_equilibrium(mat, load, tol=tol, max_iter=2000)
        P = lam_sample.P_dat.comps
        scale = np.abs(P).max()
        traction_dev = max(np.abs(P[0, 0] - P[0, 0].mean()).max(), np.abs(P[1, 0]).max())
        assert traction_dev < 100 * tol * scale, "traction continuity violated"
        oracle = laminate_oracle(
            *lame_from_engineering(50.0, 0.25), *lame_from_engineering(300.0, 0.25), 0.5, 1.004
        )
        assert np.abs(P[1, 1, : n // 2] / 1e3 - oracle["p22_a"]).max() < 1e-5 * abs(
            oracle["p22_a"]
        )
        assert np.abs(P[1, 1, n // 2 :] / 1e3 - oracle["p22_b"]).max() < 1e-5 * abs(
            oracle["p22_b"]
        )
        print(
            f"  homogeneous P22 {p22:.3f} MPa, rel error {rel:.1e}; "
            f"laminate traction deviation {traction_dev / scale:.1e} of scale"
        )


# ---------------------------------------------------------------------------
# 5. End-to-end gradient correctness
# ---------------------------------------------------------------------------


def _total_loss_and_grads(model, x, P_dat, W, grid, c):
    res = fno_forward(model, x, grid)
    v_dat, _, g_dat = loss_data(res.stress, P_dat, W, n_dat=1)
    if model.config.head == "informed":
        v_div, g_div, _ = loss_div(res.stress, grid, n_dat=1)
        return v_dat + c * v_div, fno_backward(model, res, g_dat + c * g_div)
    return v_dat, fno_backward(model, res, g_dat)


def _total_loss(model, x, P_dat, W, grid, c):
    res = fno_forward(model, x, grid)
    v_dat, _, _ = loss_data(res.stress, P_dat, W, n_dat=1)
    if model.config.head == "informed":
        v_div, _, _ = loss_div(res.stress, grid, n_dat=1)
        return v_dat + c * v_div
    return v_dat


def test_c5_gradient_correctness():
    with criterion(5, "finite-difference check of every parameter (16^2)"):
        start = time.time()
        grid = GridSpec(16, 16)
        material = voronoi_microstructure(grid, 5, 31)
        sample = solve_equilibrium(material, LoadCase.uniaxial())
        # unit-scale supervision keeps the finite-difference noise floor low
        Pn = sample.P_dat.comps / sample.P_dat.comps.std()
        W = weight_matrix(TensorField(grid, Pn)).comps[None]
        x = np.stack([(material.E - 50.0) / 250.0, (material.nu - 0.2) / 0.2])[None]
        P_dat = Pn[None]
        h = 1e-5
        c = 0.1
        from pefno.spectral import div_channels

        def margins_ok(model):
            # every |.| argument in the loss must stay clear of zero across
            # the finite-difference step; divergence entries carry an extra
            # wavenumber factor in their parameter slopes, hence the larger
            # threshold
            res = fno_forward(model, x, grid)
            data_margin = min(
                np.abs(res.stress[0, r, s] - P_dat[0, r, s]).min()
                for r, s in ((0, 0), (0, 1), (1, 0), (1, 1), (2, 2))
            )
            if data_margin <= 20.0 * h:
                return False
            if model.config.head == "informed":
                return np.abs(div_channels(grid, res.stress)[0, :2]).min() > 300.0 * h
            return True

        summary = {}
        for head in ("informed", "encoded"):
            model = None
            for init_seed in range(5, 60):
                candidate = init_model(FnoConfig(n_layers=2, width=6, modes=4, head=head), init_seed)
                if margins_ok(candidate):
                    model = candidate
                    break
            assert model is not None, "no differentiable test point found"
            L0, grads = _total_loss_and_grads(model, x, P_dat, W, grid, c)
            # a central difference of the loss carries rounding noise of
            # order eps * |L| / h; that is the resolution of the measurement
            # and enters as the absolute term of the comparison (gradients
            # below it, e.g. the encoded head's projected-out fluctuation
            # shifts, are verified as zero within resolution)
            atol = 32.0 * np.finfo(float).eps * abs(L0) / h
            checked = 0
            worst = 0.0
            for name, arr in model.parameters().items():
                flat = arr.view(np.float64).reshape(-1)
                gflat = (
                    grads[name].view(np.float64).reshape(-1)
                    if np.iscomplexobj(grads[name])
                    else grads[name].reshape(-1)
                )
                for i in range(flat.size):
                    old = flat[i]
                    flat[i] = old + h
                    lp = _total_loss(model, x, P_dat, W, grid, c)
                    flat[i] = old - h
                    lm = _total_loss(model, x, P_dat, W, grid, c)
                    flat[i] = old
                    fd = (lp - lm) / (2.0 * h)
                    err = abs(fd - gflat[i])
                    magnitude = max(abs(fd), abs(gflat[i]))
                    bound = 1e-5 * magnitude + atol
                    assert err <= bound, (
                        f"{head} {name}[{i}]: error {err:.2e} exceeds {bound:.2e} "
                        f"(fd {fd:.6e}, analytic {gflat[i]:.6e})"
                    )
                    worst = max(worst, err / bound)
                    checked += 1
            summary[head] = (checked, worst)
        elapsed = time.time() - start
        for head, (checked, worst) in summary.items():
            print(f"  {head}: {checked} parameters, worst error at {worst:.3f} of its bound")
        assert elapsed < 300.0, f"runtime {elapsed:.1f}s exceeds the 5 minute budget"


# ---------------------------------------------------------------------------
# 6. Desk-scale head comparison
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def dataset32():
    samples, _ = generate_dataset(
        32, GridSpec(32, 32), LoadCase.uniaxial(1.004), grain_range=(5, 30), rng_seed=123
    )
    return samples


def test_c6_head_comparison(dataset32):
    with criterion(6, "head comparison: 32 samples, 32^2, 300 epochs, 3 seeds"):
        start = time.time()
        samples = dataset32
        grid = samples[0].P_dat.grid
        stress_scale = max(np.abs(s.P_dat.comps).max() for s in samples)
        machine_zero = (
            1e-11 * (2.0 * np.pi / grid.l) * (2.0 * stress_scale) * 3 * grid.npoints
        )
        results = {}
        for seed in (0, 1, 2):
            for head, c in (("guided", 0.1), ("informed", 0.1), ("encoded", 0.1), ("informed", 0.0)):
                key = (head if c > 0 else "informed_c0", seed)
                model = init_model(FnoConfig(head=head), seed)
                cfg = TrainConfig(epochs=300, batch_size=8, c=c, seed=seed)
                _, metrics = train(model, samples, cfg)
                results[key] = metrics.summary
                print(
                    f"  {key[0]:12s} seed {seed}: L_dat {metrics.summary['initial_L_dat']:.4g}"
                    f" -> {metrics.summary['final_L_dat']:.4g},"
                    f" L_div {metrics.summary['final_L_div']:.4g}"
                    f"  [{time.time() - start:.0f}s]"
                )
        for (name, seed), s in results.items():
            assert s["final_L_dat"] < 0.5 * s["initial_L_dat"], (
                f"{name} seed {seed}: data loss not halved"
            )
        for seed in (0, 1, 2):
            enc = results[("encoded", seed)]["final_L_div"]
            inf = results[("informed", seed)]["final_L_div"]
            gui = results[("guided", seed)]["final_L_div"]
            inf0 = results[("informed_c0", seed)]["final_L_div"]
            assert enc < machine_zero, f"seed {seed}: encoded divergence above machine zero"
            assert enc < inf, f"seed {seed}: encoded not below informed"
            assert enc < gui, f"seed {seed}: encoded not below guided"
            assert inf < inf0, f"seed {seed}: penalty did not reduce divergence"
        elapsed = time.time() - start
        print(f"  total training time {elapsed / 60.0:.1f} min")
        assert elapsed < 3600.0, "exceeded the ~1 hour budget"


# ---------------------------------------------------------------------------
# 7. Determinism of command reruns
# ---------------------------------------------------------------------------


def test_c7_determinism(tmp_path):
    with criterion(7, "byte-identical command reruns"):
        data = tmp_path / "data"
        overrides = [
            "grid.n1=16",
            "grid.n2=16",
            "data.n=4",
            "micro.grains_min=3",
            "micro.grains_max=6",
            "seed=21",
        ]
        assert cli_main(["gen-data", "--out", str(data), *overrides]) == EXIT_OK

        train_args = [
            "--dataset",
            str(data),
            "grid.n1=16",
            "grid.n2=16",
            "fno.layers=2",
            "fno.width=6",
            "fno.modes=4",
            "fno.head=informed",
            "train.epochs=3",
            "train.batch=2",
            "seed=21",
        ]
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert cli_main(["train", "--out", str(out1), *train_args]) == EXIT_OK
        assert cli_main(["train", "--out", str(out2), *train_args]) == EXIT_OK
        csv1 = (out1 / "metrics.csv").read_bytes()
        assert csv1 == (out2 / "metrics.csv").read_bytes()

        data2 = tmp_path / "data2"
        assert cli_main(["gen-data", "--out", str(data2), *overrides]) == EXIT_OK
        for f in sorted(data.glob("*.pefno")):
            assert f.read_bytes() == (data2 / f.name).read_bytes(), f.name
        print(f"  metrics.csv {len(csv1)} bytes, dataset files bit-identical on rerun")

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdc.dispersion import CrystalConfig, phase_mismatch
from spdc.errors import ConfigError
from spdc.gaussian import supermode_gains
from spdc.jsa import (
    assemble,
    build_jsa,
    dump_abs_csv,
    dump_binary,
    hankel_indices,
    load_binary,
    phase_matching_matrix,
    sinc,
    total_gain_invariant,
)
from spdc.pump import apply_chirp, build_grid, gaussian_pump


class TestSinc:
    def test_zero(self):
        assert sinc(np.array([0.0]))[0] == 1.0

    @given(st.floats(-50, 50, allow_nan=False))
    def test_matches_numpy(self, x):
        assert sinc(np.array([x]))[0] == pytest.approx(np.sinc(x / np.pi), abs=1e-15)

    def test_branch_continuity(self):
        x = np.array([0.99999e-4, 1.00001e-4])
        a, b = sinc(x)
        assert a == pytest.approx(b, abs=1e-12)


class TestBuildJSA:
    def test_exactly_symmetric(self, small_setup):
        grid, base, crystal, pm = small_setup
        L = build_jsa(grid, apply_chirp(base, 3e-27), crystal, phase_matching=pm).L
        assert np.array_equal(L, L.T)
        assert np.all(np.isfinite(L))

    def test_zero_length_limit_is_hankel(self, small_setup):
        grid, base, crystal, _ = small_setup
        thin = CrystalConfig(1e-12, crystal.theta, crystal.pump_central_wavelength)
        L = build_jsa(grid, base, thin).L
        np.testing.assert_allclose(L, base.amplitudes[hankel_indices(grid.n_points)], rtol=1e-12)

    def test_global_phase(self, small_setup):
        grid, base, crystal, pm = small_setup
        L = build_jsa(grid, base, crystal, phase_matching=pm).L
        rot = replace(base, amplitudes=base.amplitudes * np.exp(0.7j))
        L2 = build_jsa(grid, rot, crystal, phase_matching=pm).L
        np.testing.assert_allclose(L2, L * np.exp(0.7j), rtol=1e-14)
        g = supermode_gains(L)
        np.testing.assert_allclose(supermode_gains(L2), g, rtol=0, atol=1e-12 * g[0])

    def test_frobenius_against_double_loop(self, small_setup):
        grid, base, crystal, _ = small_setup
        L = build_jsa(grid, base, crystal).L
        w = grid.omegas
        total = 0.0
        for j in range(w.size):
            for k in range(w.size):
                phi = phase_mismatch(w[j], w[k], crystal)
                s = 1.0 if phi == 0 else np.sin(phi) / phi
                total += abs(s * base.amplitudes[j + k]) ** 2
        assert total_gain_invariant(L) == pytest.approx(total, rel=1e-12)

    def test_coverage_error(self, small_setup):
        grid, base, crystal, _ = small_setup
        other = build_grid(795e-9, 6.0, base.sigma_omega, grid.n_points)
        with pytest.raises(ConfigError, match="pump axis"):
            build_jsa(other, base, crystal)

    def test_assemble_length_check(self, small_setup):
        _, base, _, pm = small_setup
        with pytest.raises(ConfigError):
            assemble(pm, base.amplitudes[:-1])


class TestTotalGain:
    def test_trivial(self):
        assert total_gain_invariant(np.zeros((3, 3))) == 0.0
        assert total_gain_invariant(np.eye(3)) == 3.0

    @pytest.mark.parametrize("phi2", [1e-27, 2.7e-27, 1.08e-26, -5e-27])
    def test_chirp_invariance(self, small_setup, phi2):
        grid, base, crystal, pm = small_setup
        ref = total_gain_invariant(build_jsa(grid, base, crystal, phase_matching=pm))
        val = total_gain_invariant(build_jsa(grid, apply_chirp(base, phi2), crystal, phase_matching=pm))
        assert val == pytest.approx(ref, rel=1e-10)

    def test_frobenius_identity(self, small_setup, rng):
        grid, base, crystal, pm = small_setup
        L = build_jsa(grid, apply_chirp(base, 2e-27), crystal, phase_matching=pm).L
        assert total_gain_invariant(L) == pytest.approx(np.sum(supermode_gains(L) ** 2), rel=1e-9)


class TestDumps:
    def test_binary_round_trip(self, tmp_path, rng):
        L = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        path = tmp_path / "L.bin"
        dump_binary(L, path)
        assert path.stat().st_size == 16 * 16
        np.testing.assert_array_equal(load_binary(path, 4), L)

    def test_abs_csv(self, tmp_path, small_setup):
        grid, base, crystal, pm = small_setup
        L = assemble(pm, base.amplitudes)
        path = dump_abs_csv(L, grid, tmp_path / "absL.csv")
        lines = path.read_text().splitlines()
        assert len(lines) == grid.n_points + 1
        assert float(lines[1].split(",")[1]) == pytest.approx(abs(L[0, 0]), rel=1e-15)

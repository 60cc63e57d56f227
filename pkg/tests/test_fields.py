import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsklab.fields import (
    FieldError,
    PositivityError,
    Grid,
    ScalarField,
    VectorField,
    constant_field,
    divergence,
    gradient,
    hs_norm,
    integral,
    l2_norm,
    laplacian,
    log_field,
    lp_norm,
    make_grid,
    power_field,
    random_band_limited,
    read_snapshot,
    sobolev_norm,
    spectral_l2_norm,
    sqrt_field,
    sup_norm,
    write_snapshot,
)


class TestGrid:
    def test_frequencies_are_integers_for_2pi_box(self):
        g = make_grid(2, 64, 2 * np.pi, 1.0)
        assert sorted(np.rint(g.frequencies).astype(int)) == list(range(-32, 32))
        assert np.allclose(g.frequencies, np.rint(g.frequencies), atol=1e-12)

    def test_rejects_unsupported_dimension(self):
        with pytest.raises(FieldError, match="unsupported dimension"):
            make_grid(4, 64, 2 * np.pi, 1.0)
        with pytest.raises(FieldError, match="unsupported dimension"):
            make_grid(1, 64, 2 * np.pi, 1.0)

    def test_rejects_nonpositive_far_field_density(self):
        with pytest.raises(FieldError, match="far-field density must be positive"):
            make_grid(3, 8, 1.0, 0.0)

    def test_rejects_bad_resolution(self):
        for n in (7, 10, 20, 4, 9):
            with pytest.raises(FieldError, match="resolution"):
                make_grid(2, n, 1.0, 1.0)
        # powers of two and 3-smooth sizes are fine
        for n in (8, 16, 96, 12, 24):
            make_grid(2, n, 1.0, 1.0)

    def test_rejects_nonpositive_box(self):
        with pytest.raises(FieldError, match="box length"):
            make_grid(2, 16, 0.0, 1.0)

    def test_cell_volume(self):
        g = make_grid(2, 16, 4.0, 1.0)
        assert g.cell_volume == pytest.approx((4.0 / 16) ** 2)
        assert g.volume == pytest.approx(16.0)


class TestFieldConstruction:
    def test_rejects_nan(self, grid64):
        vals = np.zeros(grid64.shape)
        vals[0, 0] = np.nan
        with pytest.raises(FieldError, match="non-finite"):
            ScalarField(grid64, vals)

    def test_rejects_shape_mismatch(self, grid64):
        with pytest.raises(FieldError, match="shape"):
            ScalarField(grid64, np.zeros((4, 4)))

    def test_vector_grid_mismatch(self, grid64):
        other = make_grid(2, 32, 2 * np.pi, 1.0)
        with pytest.raises(FieldError, match="grid mismatch"):
            VectorField.from_scalars(
                [constant_field(grid64, 1.0), constant_field(other, 1.0)]
            )


class TestOperators:
    def test_gradient_of_sine(self, grid64):
        x, y = grid64.meshgrid()
        f = ScalarField(grid64, np.sin(x))
        g = gradient(f)
        assert np.max(np.abs(g.components[0] - np.cos(x))) <= 1e-12
        assert np.max(np.abs(g.components[1])) <= 1e-12

    def test_gradient_of_constant_is_exactly_zero(self, grid64):
        g = gradient(constant_field(grid64, 3.7))
        assert np.all(g.components == 0.0)

    def test_gradient_mixed_modes(self, grid64):
        x, y = grid64.meshgrid()
        f = ScalarField(grid64, np.sin(2 * x) * np.cos(3 * y))
        g = gradient(f)
        assert np.max(np.abs(g.components[0] - 2 * np.cos(2 * x) * np.cos(3 * y))) <= 1e-12
        assert np.max(np.abs(g.components[1] + 3 * np.sin(2 * x) * np.sin(3 * y))) <= 1e-12

    def test_laplacian_of_sine(self, grid64):
        x, _ = grid64.meshgrid()
        f = ScalarField(grid64, np.sin(x))
        assert np.max(np.abs(laplacian(f).values + np.sin(x))) <= 1e-12

    def test_laplacian_of_constant(self, grid64):
        assert np.all(laplacian(constant_field(grid64, 2.0)).values == 0.0)

    def test_div_grad_equals_laplacian(self, grid64):
        rng = np.random.default_rng(7)
        for _ in range(10):
            f = random_band_limited(grid64, rng)
            resid = divergence(gradient(f)).values - laplacian(f).values
            scale = max(1.0, np.max(np.abs(laplacian(f).values)))
            assert np.max(np.abs(resid)) <= 1e-12 * scale

    def test_roundtrip(self, grid64, grid3d):
        rng = np.random.default_rng(8)
        for g in (grid64, grid3d):
            f = random_band_limited(g, rng)
            back = np.fft.ifftn(np.fft.fftn(f.values)).real
            assert np.max(np.abs(back - f.values)) <= 1e-12 * np.max(np.abs(f.values))


class TestCompositeMaps:
    def test_log_of_e(self, grid64):
        f = constant_field(grid64, math.e)
        assert np.allclose(log_field(f).values, 1.0, atol=1e-15)

    def test_sqrt_of_four(self, grid64):
        assert np.all(sqrt_field(constant_field(grid64, 4.0)).values == 2.0)
        assert np.all(power_field(constant_field(grid64, 4.0), 0.5).values == 2.0)

    def test_log_rejects_zero_entry(self, grid64):
        vals = np.ones(grid64.shape)
        vals[3, 5] = 0.0
        with pytest.raises(PositivityError, match="density not strictly positive"):
            log_field(ScalarField(grid64, vals))

    def test_error_reports_min_location(self, grid64):
        vals = np.ones(grid64.shape)
        vals[3, 5] = -2.0
        with pytest.raises(PositivityError, match=r"\(3, 5\)"):
            sqrt_field(ScalarField(grid64, vals))

    def test_negative_integer_power_rejects_zero(self, grid64):
        vals = np.ones(grid64.shape)
        vals[0, 0] = 0.0
        with pytest.raises(PositivityError):
            power_field(ScalarField(grid64, vals), -1.0)

    def test_integer_power_allows_sign_changes(self, grid64):
        x, _ = grid64.meshgrid()
        f = ScalarField(grid64, np.sin(x))
        assert np.allclose(power_field(f, 2.0).values, np.sin(x) ** 2)


class TestNorms:
    def test_constant_lp(self):
        g = make_grid(2, 16, 2.0, 1.0)  # volume 4
        f = constant_field(g, -3.0)
        for p in (1.0, 2.0, 3.5):
            assert lp_norm(f, p) == pytest.approx(3.0 * 4.0 ** (1.0 / p), rel=1e-13)

    def test_zero_field(self, grid64):
        z = constant_field(grid64, 0.0)
        for p in (1.0, 2.0, np.inf):
            assert lp_norm(z, p) == 0.0

    def test_sine_l2_closed_form_and_quadrature_oracle(self, grid64):
        x, _ = grid64.meshgrid()
        f = ScalarField(grid64, np.sin(x))
        # oracle: dense 1d trapezoid of sin^2 times the transverse length
        t = np.linspace(0.0, 2 * np.pi, 16385)
        oracle = math.sqrt(np.trapezoid(np.sin(t) ** 2, t) * 2 * np.pi)
        assert l2_norm(f) == pytest.approx(oracle, rel=1e-6)
        assert l2_norm(f) == pytest.approx(math.sqrt(2 * np.pi**2), rel=1e-13)

    def test_rejects_p_below_one(self, grid64):
        with pytest.raises(FieldError, match="p >= 1"):
            lp_norm(constant_field(grid64, 1.0), 0.5)

    def test_lp_inf_is_sup(self, grid64):
        x, _ = grid64.meshgrid()
        f = ScalarField(grid64, np.sin(x))
        assert lp_norm(f, np.inf) == sup_norm(f)

    def test_parseval(self, corpus64):
        for f in corpus64:
            assert abs(l2_norm(f) - spectral_l2_norm(f)) <= 1e-10 * max(1.0, l2_norm(f))

    @given(c=st.floats(-10, 10, allow_nan=False), p=st.floats(1.0, 6.0))
    @settings(max_examples=25, deadline=None)
    def test_lp_homogeneity(self, c, p):
        g = make_grid(2, 16, 2 * np.pi, 1.0)
        rng = np.random.default_rng(99)
        f = random_band_limited(g, rng)
        scaled = ScalarField(g, c * f.values)
        assert lp_norm(scaled, p) == pytest.approx(abs(c) * lp_norm(f, p), rel=1e-12, abs=1e-12)

    def test_sobolev_single_mode(self, grid64):
        eps = 0.3
        x, _ = grid64.meshgrid()
        f = ScalarField(grid64, eps * np.sin(x))
        expected = eps * math.sqrt(grid64.volume / 2.0) * math.sqrt(3.0)
        assert sobolev_norm(f, 2) == pytest.approx(expected, rel=1e-12)
        assert sobolev_norm(f, 0) == pytest.approx(l2_norm(f), rel=1e-12)

    def test_sobolev_monotone_in_order(self, corpus64):
        for f in corpus64[:5]:
            norms = [sobolev_norm(f, k) for k in range(4)]
            assert all(a <= b * (1 + 1e-12) for a, b in zip(norms, norms[1:]))

    def test_hs_matches_l2_at_zero(self, corpus64):
        for f in corpus64[:5]:
            assert hs_norm(f, 0.0) == pytest.approx(l2_norm(f), rel=1e-12)

    def test_integral_of_constant(self):
        g = make_grid(3, 8, 2.0, 1.0)
        assert integral(constant_field(g, 1.5)) == pytest.approx(1.5 * 8.0, rel=1e-14)


class TestRandomFields:
    def test_deterministic_given_seed(self, grid64):
        a = random_band_limited(grid64, np.random.default_rng(5))
        b = random_band_limited(grid64, np.random.default_rng(5))
        assert np.array_equal(a.values, b.values)

    def test_amplitude_normalization(self, grid64):
        f = random_band_limited(grid64, np.random.default_rng(5), amplitude=0.25)
        assert sup_norm(f) == pytest.approx(0.25, rel=1e-12)


class TestSnapshots:
    def test_roundtrip(self, tmp_path, grid64):
        f = random_band_limited(grid64, np.random.default_rng(3))
        path = tmp_path / "field.nskf"
        write_snapshot(f, 1.5, path)
        back, t = read_snapshot(path)
        assert t == 1.5
        assert back.grid == f.grid
        assert np.array_equal(back.values, f.values)

    def test_header_contents(self, tmp_path):
        g = make_grid(3, 8, 2.5, 0.75)
        f = constant_field(g, 0.75)
        path = tmp_path / "f.nskf"
        write_snapshot(f, 0.0, path)
        header = path.read_bytes().split(b"\n", 1)[0].split()
        assert header[0] == b"NSKF1"
        assert header[1:3] == [b"3", b"8"]

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.nskf"
        path.write_bytes(b"NOPE 2 8 1.0 1.0 0.0\n" + b"\x00" * 64)
        with pytest.raises(FieldError, match="NSKF1"):
            read_snapshot(path)

    def test_rejects_truncated_payload(self, tmp_path, grid64):
        f = constant_field(grid64, 1.0)
        path = tmp_path / "t.nskf"
        write_snapshot(f, 0.0, path)
        data = path.read_bytes()
        path.write_bytes(data[:-16])
        with pytest.raises(FieldError, match="payload"):
            read_snapshot(path)

import math

import numpy as np
import pytest
from scipy.integrate import quad

from levy_barrier import scale
from levy_barrier.levy import BrownianDrift, JumpDiffusionExp, psi
from levy_barrier.numerics import fd_derivatives, integrate

BM = BrownianDrift(-1.0, 1.0)
JD = JumpDiffusionExp(-1.0, 2.0, 0.5, 1.0)
MODELS = [BM, JD, BrownianDrift(0.7, 0.4), JumpDiffusionExp(0.5, 1.0, 2.0, 3.0)]


def laplace_oracle(bs, s, upper=200.0):
    """Truncated ``int_0^upper exp(-s x) W_q(x) dx`` by scipy quadrature."""
    val, _ = quad(lambda x: math.exp(-s * x) * scale.w(bs, x), 0.0, upper, limit=400,
                  epsabs=1e-13, epsrel=1e-12)
    return val


@pytest.mark.parametrize("model", [BM, JD])
@pytest.mark.parametrize("q", [0.05, 1.05])
def test_laplace_transform_identity(model, q):
    bs = scale.make_basis(model, q)
    phi_q = max(bs.zetas)
    for s in (phi_q + 0.5, phi_q + 1.0, phi_q + 3.0):
        ref = 1.0 / (psi(model, s) - q)
        assert laplace_oracle(bs, s) == pytest.approx(ref, rel=1e-6)


def test_brownian_weights():
    bs = scale.make_basis(BM, 0.05)
    assert bs.zetas[0] == pytest.approx(-2.048809, abs=1e-6)
    # psi'(theta) = theta + 1 at the roots
    assert bs.weights[0] == pytest.approx(1 / (bs.zetas[0] + 1), rel=1e-14)
    assert bs.weights[1] == pytest.approx(1 / (bs.zetas[1] + 1), rel=1e-14)
    assert bs.weights[1] == pytest.approx(1 / 1.048809, rel=1e-6)


@pytest.mark.parametrize("model", MODELS)
def test_weight_sums(model):
    bs = scale.make_basis(model, 0.3)
    assert sum(bs.weights) == pytest.approx(0.0, abs=1e-13)
    assert sum(w * z for w, z in zip(bs.weights, bs.zetas)) == pytest.approx(
        2 / model.sigma ** 2, rel=1e-12)


def test_w_values():
    bs = scale.make_basis(BM, 0.05)
    assert scale.w(bs, -1.0) == 0.0
    assert scale.w(bs, 0.0) == pytest.approx(0.0, abs=1e-15)
    # the six-digit roots give the value to about 1e-7
    ref = (math.exp(0.048809) - math.exp(-2.048809)) / 1.048809
    assert scale.w(bs, 1.0) == pytest.approx(ref, abs=1e-6)
    assert scale.w(bs, 1.0) == pytest.approx(0.8783, abs=1e-4)


@pytest.mark.parametrize("model", MODELS)
def test_w_prime(model):
    bs = scale.make_basis(model, 0.4)
    assert scale.w_prime(bs, 0.0) == pytest.approx(2 / model.sigma ** 2, rel=1e-12)
    assert scale.w_prime(bs, -0.5) == 0.0
    d1, _ = fd_derivatives(lambda x: scale.w(bs, x), 1.0, 1e-5)
    assert d1 == pytest.approx(scale.w_prime(bs, 1.0), rel=1e-8, abs=1e-6)


def test_z_values():
    bs = scale.make_basis(BM, 0.05)
    assert scale.z(bs, 0.0) == 1.0
    assert scale.z(bs, -3.0) == 1.0
    assert scale.z(bs, 4.22) == pytest.approx(1.2, abs=1e-3)
    # Z = 1 + q int W, by quadrature
    ref = 1 + 0.05 * integrate(lambda y: scale.w(bs, y), 0.0, 4.22)
    assert scale.z(bs, 4.22) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("model", [BM, JD])
def test_z_bar(model):
    bs = scale.make_basis(model, 0.2)
    assert scale.z_bar(bs, 0.0) == pytest.approx(0.0, abs=1e-13)
    assert scale.z_bar(bs, -2.0) == -2.0
    for x in np.linspace(0.1, 6.0, 20):
        d1, _ = fd_derivatives(lambda t: scale.z_bar(bs, t), float(x), 1e-5)
        assert d1 == pytest.approx(scale.z(bs, float(x)), abs=1e-8 * max(1, scale.z(bs, x)))


@pytest.mark.parametrize("model", [BM, JD])
def test_z_prime_is_q_w(model):
    bs = scale.make_basis(model, 0.7)
    for x in (0.0, 0.5, 3.0):
        assert scale.z_prime(bs, x) == pytest.approx(0.7 * scale.w(bs, x), rel=1e-12, abs=1e-15)


def test_grid_evaluation_matches_scalar():
    bs = scale.make_basis(JD, 1.05)
    xs = np.array([-1.0, 0.0, 0.3, 2.0, 7.5])
    assert np.allclose(scale.w_grid(bs, xs), [scale.w(bs, x) for x in xs], rtol=1e-13)
    assert np.allclose(scale.z_grid(bs, xs), [scale.z(bs, x) for x in xs], rtol=1e-13)


def test_expsum_large_argument_is_stable():
    es = scale.ExpSum((3.0, -1.0), (1.0, 2.0), 0.5)
    x = 40.0
    assert es(x) == pytest.approx(math.exp(120.0) + 2 * math.exp(-40.0) + 0.5, rel=1e-14)
    assert es.derivative(x, 2) == pytest.approx(9 * math.exp(120.0), rel=1e-14)
    assert es.scaled(2.0)(0.0) == pytest.approx(2 * (3.0 + 0.5))

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss
from scipy.integrate import trapezoid

from nonmarkov.bec import (
    A_RB,
    BECParams,
    RateTable,
    bec_channel,
    bec_trajectory,
    calibrate_tmax,
    coherence_factors,
    crossover,
    decay_exponents,
    default_grid,
    dephasing_choi,
    gamma_rates,
    integrated_rates,
    long_csv,
    rg_closed_form,
    sweep_ae,
    sweep_csv,
    sweep_D,
)
from nonmarkov.measure import nm_total
from nonmarkov.qcore import ValidationError
from nonmarkov.robustness import rg_dual_witness

# calibrated window at the default preset, frozen to keep the suite fast
TMAX = 31.4


def _sinc(x):
    return np.sinc(x / np.pi)


def oracle_rates(p, times, panels=2000, nodes=20):
    """Composite Gauss-Legendre evaluation of (g1, g2), written from the model formulas."""
    x, w = leggauss(nodes)
    edges = np.linspace(0.0, 12.0, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    q = ((b - a) / 2 * x + (a + b) / 2).ravel()
    wq = ((b - a) / 2 * w).ravel()
    s, L, D, beta = p.sigma, p.L, p.D, p.beta
    om = q * np.sqrt(q * q + 2 * beta)
    base = p.kappa * q * q * np.exp(-q * q / 2) / (q * q + 2 * beta) / 2 * wq
    f1 = 1 - _sinc(2 * q * L / s)
    f2 = 0.5 * (_sinc(2 * q * (D + L) / s) + _sinc(2 * q * (D - L) / s) - 2 * _sinc(2 * q * D / s))
    ph = np.sin(np.multiply.outer(np.atleast_1d(times), om)) * base
    return ph @ f1, ph @ f2


@pytest.fixture(scope="module")
def preset():
    return BECParams.preset(0.2)


def test_preset_units(preset):
    assert preset.L == pytest.approx(150e-9)
    assert preset.sigma == pytest.approx(75e-9)
    assert preset.D == pytest.approx(600e-9)
    assert preset.ae_ratio == pytest.approx(0.2)
    # beta = 8 pi n0 a_E sigma^2 in these units
    assert preset.beta == pytest.approx(8 * np.pi * preset.n0 * preset.a_E * preset.sigma ** 2, rel=1e-12)
    assert preset.t0 == pytest.approx(1.541e-5, rel=1e-3)


def test_short_separation_rejected():
    with pytest.raises(ValidationError, match="D >= 4L"):
        BECParams.preset(0.2, D_over_L=2)


def test_nonpositive_parameter_rejected():
    with pytest.raises(ValidationError):
        BECParams(a_E=-1e-9)


def test_params_roundtrip(tmp_path, preset):
    path = tmp_path / "p.json"
    preset.save(path)
    assert BECParams.load(path) == preset
    assert BECParams.from_dict({"a_E_over_aRb": 0.5, "D_over_L": 6}).d_ratio == pytest.approx(6)


def test_rates_against_gauss_legendre(preset):
    # reference values from the oracle at 10x the default node count, frozen
    ref = {3.0: (2.050436946029612e-03, -8.980788887566e-06), 10.0: (1.924024275442e-04, -3.008279753498e-04)}
    for t, (g1, g2) in ref.items():
        a1, a2 = gamma_rates(preset, t)
        o1, o2 = oracle_rates(preset, t, panels=20000)
        for got, frozen, orc in ((a1, g1, o1), (a2, g2, o2)):
            assert got == pytest.approx(frozen, rel=1e-6)
            assert got == pytest.approx(float(orc[0]), rel=1e-6)


def test_trapezoid_against_adaptive(preset):
    q = np.linspace(0, 12, 2_400_001)
    om = q * np.sqrt(q * q + 2 * preset.beta)
    base = preset.kappa * q * q * np.exp(-q * q / 2) / (q * q + 2 * preset.beta)
    f1 = 1 - _sinc(2 * q * preset.L / preset.sigma)
    ts = np.array([0.0, 2.0, 10.0, 20.0])
    rt = integrated_rates(preset, ts)
    for i, t in enumerate(ts[1:], start=1):
        g = trapezoid(base * f1 * np.sin(om * t) / 2, q)
        G = trapezoid(base * f1 * np.sin(om * t / 2) ** 2 / np.where(om > 0, om, 1.0), q)
        assert abs(g - rt.gamma1[i]) <= 1e-7 * abs(rt.gamma1[i])
        assert abs(G - rt.Gamma1[i]) <= 1e-7 * abs(rt.Gamma1[i])


def test_coherences_against_master_equation(preset):
    z1 = np.array([1.0, 1.0, -1.0, -1.0])
    z2 = np.array([1.0, -1.0, 1.0, -1.0])
    a, b = np.diag(z1 - z2), np.diag(z1 + z2)

    def dissipator(x, r):
        return x @ r @ x - 0.5 * (x @ x @ r + r @ x @ x)

    def rhs(t, r):
        g1, g2 = oracle_rates(preset, t)
        g1, g2 = g1[0], g2[0]
        return (g1 - g2) / 2 * dissipator(a, r) + (g1 + g2) / 2 * dissipator(b, r)

    grid = np.linspace(0, 20, 11)
    rt = integrated_rates(preset, grid)
    r = np.full((4, 4), 0.25, dtype=complex)
    sub = 200
    dev = 0.0
    for k in range(1, len(grid)):
        h = (grid[k] - grid[k - 1]) / sub
        t = grid[k - 1]
        for _ in range(sub):
            k1 = rhs(t, r)
            k2 = rhs(t + h / 2, r + h / 2 * k1)
            k3 = rhs(t + h / 2, r + h / 2 * k2)
            k4 = rhs(t + h, r + h * k3)
            r = r + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        dev = max(dev, np.max(np.abs(r - 0.25 * coherence_factors(rt.Gamma1[k], rt.Gamma2[k]))))
    assert dev <= 1e-7


def test_gamma2_vanishes_at_large_separation():
    p = BECParams.preset(0.2, D_over_L=1000)
    ts = np.linspace(0.5, TMAX, 12)
    g1, g2 = gamma_rates(p, ts)
    assert np.all(np.abs(g2) < 1e-3 * np.abs(g1))


def test_constant_rate_hook():
    ts = np.linspace(0, 4, 9)
    rt = RateTable.from_rate_function(ts, lambda t: (0.3, 0.1))
    assert np.allclose(rt.Gamma1, 0.3 * ts, atol=1e-12)
    assert np.allclose(rt.Gamma2, 0.1 * ts, atol=1e-12)


def test_constant_rates_are_markovian():
    ts = np.linspace(0, 4, 30)
    rt = RateTable.from_rate_function(ts, lambda t: (0.3, 0.1))
    assert nm_total(bec_trajectory(None, ts, rt)).total == 0.0


def test_decay_exponents_structure():
    th = decay_exponents(0.5, 0.2)
    assert np.allclose(np.diag(th), 0)
    assert th[0, 3] == pytest.approx(4 * 0.7)
    assert th[1, 2] == pytest.approx(4 * 0.3)
    assert th[0, 1] == pytest.approx(2 * 0.5)


def test_closed_form_matches_sdp():
    for g1, g2 in ((0.0, 0.0), (0.1, 0.03), (0.4, -0.2), (1.0, 0.5)):
        val = rg_dual_witness(dephasing_choi(g1, g2), (4, 4)).value
        assert val == pytest.approx(float(rg_closed_form(g1, g2)), abs=1e-6)


def test_channel_at_zero_is_identity(preset):
    rt = integrated_rates(preset, [0.0, 1.0])
    ch = bec_channel(preset, rt, 0.0)
    assert rg_dual_witness(ch.choi, (4, 4)).value == pytest.approx(3.0, abs=1e-6)
    with pytest.raises(ValidationError):
        bec_channel(preset.with_ae(0.5), rt, 1.0)


def test_grid_validation(preset):
    with pytest.raises(ValidationError):
        integrated_rates(preset, [0.5, 1.0])
    with pytest.raises(ValidationError):
        default_grid(preset, 1, TMAX)


def test_markovian_and_non_markovian_ends(preset):
    grid = default_grid(preset, 100, TMAX)
    low = nm_total(bec_trajectory(preset.with_ae(0.01), grid))
    high = nm_total(bec_trajectory(preset, grid))
    assert low.total == 0.0
    assert high.total > 0.0


def test_sdp_total_matches_closed_form(preset):
    from nonmarkov.measure import fold_increments
    grid = default_grid(preset, 100, TMAX)
    rt = integrated_rates(preset, grid)
    rep = nm_total(bec_trajectory(preset, grid, rt))
    cf = fold_increments(grid, rg_closed_form(rt.Gamma1, rt.Gamma2))
    assert rep.n_increments == len(cf)
    assert rep.total == pytest.approx(sum(x[2] for x in cf), abs=1e-7)


def test_sweep_outputs(preset):
    grid = default_grid(preset, 20, TMAX)
    pts = sweep_ae(preset, [0.01, 0.6], grid)
    assert crossover(pts) == (0.01, 0.6)
    assert sweep_csv(pts, "a_E_over_aRb").splitlines()[0] == "a_E_over_aRb,nm_total,n_increments"
    assert len(long_csv(pts, "a_E_over_aRb").splitlines()) == 1 + 2 * 20
    with pytest.raises(ValidationError):
        sweep_ae(preset, [], grid)


def test_far_separation_approaches_independent_baths():
    grid = default_grid(BECParams.preset(0.5), 100, TMAX)
    far = BECParams.preset(0.5, D_over_L=200)
    a = sweep_D(far, [200], grid)[0].report.total
    b = sweep_D(far, [200], grid, drop_gamma2=True)[0].report.total
    assert a == pytest.approx(b, rel=1e-3)


@pytest.mark.slow
def test_calibrated_window():
    tmax = calibrate_tmax(BECParams.preset(0.2))
    assert tmax == pytest.approx(TMAX, abs=0.2)

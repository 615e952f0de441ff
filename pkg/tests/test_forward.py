import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings, strategies as st

from layerscat.forward import (LayerConfig, default_angles, default_lmax, field_on_S,
                               sanitize, solve_modes)

from conftest import random_config
from oracles import FIG1_NEIGHBOUR, Q2_TRUTH


def single_layer_oracle(r1, n1, k0, l):
    """Cramer's rule on the two continuity conditions at r1."""
    k1 = k0 * np.sqrt(n1)
    inc = 1j ** l
    j1, j1p = sp.jv(l, k1 * r1), sp.jvp(l, k1 * r1)
    h, hp = sp.hankel1(l, k0 * r1), sp.h1vp(l, k0 * r1)
    b1 = inc * sp.jv(l, k0 * r1)
    b2 = inc * k0 * sp.jvp(l, k0 * r1)
    # [ j1      -h     ] [a]   [b1]
    # [ k1 j1p  -k0 hp ] [A] = [b2]
    det = -j1 * k0 * hp + h * k1 * j1p
    a = (-b1 * k0 * hp + h * b2) / det
    A = (j1 * b2 - k1 * j1p * b1) / det
    return a, A


def layer_fields(config, k0, systems):
    """u and du/dr on both sides of every interface, per mode."""
    r = np.array(config.radii)
    ks = k0 * np.sqrt(np.array(config.indices))
    out = []
    for sysm in systems:
        l, c = sysm.mode, sysm.coefficients
        N = r.size
        for m in range(N):
            if m == 0:
                ui = c[0] * sp.jv(l, ks[0] * r[0])
                dui = c[0] * ks[0] * sp.jvp(l, ks[0] * r[0])
            else:
                a, b = c[2 * m - 1], c[2 * m]
                ui = a * sp.jv(l, ks[m] * r[m]) + b * sp.yv(l, ks[m] * r[m])
                dui = ks[m] * (a * sp.jvp(l, ks[m] * r[m]) + b * sp.yvp(l, ks[m] * r[m]))
            if m + 1 < N:
                a, b = c[2 * m + 1], c[2 * m + 2]
                k = ks[m + 1]
                uo = a * sp.jv(l, k * r[m]) + b * sp.yv(l, k * r[m])
                duo = k * (a * sp.jvp(l, k * r[m]) + b * sp.yvp(l, k * r[m]))
            else:
                x = k0 * r[m]
                uo = 1j ** l * sp.jv(l, x) + c[-1] * sp.hankel1(l, x)
                duo = k0 * (1j ** l * sp.jvp(l, x) + c[-1] * sp.h1vp(l, x))
            out.append((l, m, ui, uo, dui, duo))
    return out


def max_residual(config, k0):
    systems = solve_modes(config, k0)
    worst = 0.0
    for l, m, ui, uo, dui, duo in layer_fields(config, k0, systems):
        if systems[l].flagged:
            continue
        worst = max(worst, abs(ui - uo) / (1 + abs(ui)), abs(dui - duo) / (1 + abs(dui)))
    return worst


def test_sanitize_examples():
    c = sanitize(LayerConfig((0.4, 0.4, 0.6), (0.5, 7.0, 9.0)))
    assert c == LayerConfig((0.4, 0.6), (0.5, 9.0))
    assert sanitize(LayerConfig((0.4, 0.6), (9.0, 9.0))) == LayerConfig((0.6,), (9.0,))
    q = LayerConfig((0.4, 0.6), (0.49, 9.0))
    assert sanitize(q) == q


def test_sanitize_keeps_field():
    raw = LayerConfig((0.2, 0.2, 0.5, 0.7), (3.0, 5.0, 2.0, 2.0))
    a = field_on_S(raw, 6.5).values
    b = field_on_S(sanitize(raw), 6.5).values
    assert np.max(np.abs(a - b)) < 1e-12


def test_layer_config_validation():
    with pytest.raises(ValueError):
        LayerConfig((0.6, 0.4), (1.0, 2.0))
    with pytest.raises(ValueError):
        LayerConfig((0.4, 1.2), (1.0, 2.0))
    with pytest.raises(ValueError):
        LayerConfig((0.4,), (1.0, 2.0))


def test_vacuum_config_is_incident_wave():
    cfg = LayerConfig((0.3, 0.8), (1.0, 1.0))
    for sysm in solve_modes(cfg, 3.0, strict=True):
        assert abs(sysm.scattering) == 0.0 or abs(sysm.scattering) < 1e-14
    th = default_angles(90)
    u = field_on_S(cfg, 3.0, th).values
    assert np.max(np.abs(u - np.exp(3j * np.cos(th)))) < 1e-12


def test_interior_coefficients_of_vacuum():
    # unsanitized vacuum layers: interior field must stay i^l J_l
    systems = solve_modes(LayerConfig((0.3, 0.8), (1.0, 1.0)), 3.0, strict=True)
    for s in systems[:10]:
        c = s.coefficients
        assert abs(c[0] - 1j ** s.mode) < 1e-10
        assert abs(c[1] - 1j ** s.mode) < 1e-10 and abs(c[2]) < 1e-10


def test_single_layer_oracle_fixed():
    cfg = LayerConfig((0.72,), (4.2025,))
    for s in solve_modes(cfg, 3.0):
        a, A = single_layer_oracle(0.72, 4.2025, 3.0, s.mode)
        assert abs(s.coefficients[0] - a) <= 1e-10 * max(1.0, abs(a))
        assert abs(s.coefficients[1] - A) <= 1e-10 * max(1.0, abs(A))


def test_q1_interface_residuals():
    assert max_residual(LayerConfig.from_flat(Q2_TRUTH), 3.0) < 1e-9


def test_truncation_doubling():
    rng = np.random.default_rng(3)
    th = default_angles()
    for _ in range(10):
        cfg = random_config(rng)
        for k0 in (3.0, 10.0):
            L = default_lmax(k0, 1.0)
            a = field_on_S(cfg, k0, th, L)
            b = field_on_S(cfg, k0, th, 2 * L)
            if a.degraded or b.degraded:
                continue
            assert np.max(np.abs(a.values - b.values)) < 1e-8


def test_scattering_coefficients_decay():
    cfg = LayerConfig.from_flat(Q2_TRUTH)
    A = np.abs([s.scattering for s in solve_modes(cfg, 10.0)])
    tail = A[int(0.75 * A.size):]
    assert np.all(np.diff(tail) <= 0)


def test_fig1_fields_close_fig3_far():
    q1, q2 = LayerConfig.from_flat(Q2_TRUTH), LayerConfig.from_flat(FIG1_NEIGHBOUR)
    d3 = np.max(np.abs(field_on_S(q1, 3.0).values - field_on_S(q2, 3.0).values))
    d10 = np.max(np.abs(field_on_S(q1, 10.0).values - field_on_S(q2, 10.0).values))
    assert d3 < 0.05 < d10


def test_strict_mode_error():
    from layerscat.forward import ModeError
    tiny = LayerConfig((1e-6, 0.9), (30.0, 0.04))
    systems = solve_modes(tiny, 10.0)
    if any(s.flagged for s in systems):
        with pytest.raises(ModeError):
            solve_modes(tiny, 10.0, strict=True)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.02, 1.0), st.floats(0.04, 30.25), st.sampled_from([3.0, 6.5, 10.0]))
def test_single_layer_oracle_random(r1, n1, k0):
    for s in solve_modes(LayerConfig((r1,), (n1,)), k0):
        if s.flagged:
            continue
        a, A = single_layer_oracle(r1, n1, k0, s.mode)
        assert abs(s.coefficients[1] - A) <= 1e-10 * max(1.0, abs(A))
        assert abs(s.coefficients[0] - a) <= 1e-10 * max(1.0, abs(a))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_random_residuals(seed):
    cfg = random_config(np.random.default_rng(seed))
    assert max_residual(sanitize(cfg), 10.0) < 1e-9

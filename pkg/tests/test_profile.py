"""Structure functions, shooting, classification, rescaling and archives."""

from __future__ import annotations

import filecmp
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from magma_lab import (
    DecayFit,
    DomainTooSmall,
    F1,
    F2,
    F3,
    Indeterminate,
    ProfileParams,
    ProfileSolution,
    ShotClass,
    ShotSamples,
    TailTooShort,
    TorusGrid,
    decay_check,
    embed_on_torus,
    find_mu_c,
    integrate_shot,
    mu_curve,
    ode_residual,
    q_star,
    qr2_identity_gap,
    read_profile_csv,
    rescale,
    structure_fn,
    structure_report,
    write_profile_csv,
)

EXAMPLE = ProfileParams(d=3.0, n=2.5, c=1.7)


@pytest.fixture(scope="module")
def report3():
    return structure_report(EXAMPLE)


@pytest.fixture(scope="module")
def critical3():
    mu_c, sol = find_mu_c(EXAMPLE)
    fit = decay_check(sol)
    return mu_c, replace(sol, decay=fit)


@pytest.fixture(scope="module")
def critical2():
    p = ProfileParams(d=2.0, n=2.5, c=1.7)
    mu_c, sol = find_mu_c(p)
    fit = decay_check(sol)
    return mu_c, replace(sol, decay=fit)


def test_params_validation():
    with pytest.raises(ValueError):
        ProfileParams(d=0.0, n=2.5, c=1.7)
    with pytest.raises(ValueError):
        ProfileParams(d=3.0, n=1.9, c=1.7)
    with pytest.raises(ValueError):
        ProfileParams(d=3.0, n=3.1, c=1.7)
    with pytest.raises(ValueError):
        ProfileParams(d=3.0, n=2.5, c=1.5)
    with pytest.raises(ValueError):
        ProfileParams(d=3.0, n=2.5, c=2.5)
    with pytest.raises(ValueError):
        ProfileParams(d=3.0, n=2.5, c=1.7, mu=0.1)


def test_q_star_frozen_digits():
    assert q_star(2.5) == pytest.approx(0.55250896337800284, abs=1e-11)
    assert q_star(3.0) == pytest.approx(0.5861801752930957, abs=1e-11)
    with pytest.raises(ValueError):
        q_star(-1.0)


def test_structure_fn_exact_background_values():
    p = replace(EXAMPLE, mu=-0.02)
    assert F1(1.0, p) == -0.02 * 3.0
    assert F2(1.0, p) == 0.0
    assert F3(1.0, p) == pytest.approx(-0.06, abs=1e-15)
    assert structure_fn(1, 1.0, p) == F1(1.0, p)


def test_structure_fn_domain_and_dispatch():
    p = replace(EXAMPLE, mu=-0.02)
    with pytest.raises(ValueError):
        F1(0.0, p)
    with pytest.raises(ValueError):
        F2(-0.3, p)
    with pytest.raises(ValueError):
        structure_fn(4, 0.5, p)
    with pytest.raises(ValueError):
        F1(0.5, EXAMPLE)  # mu unset
    arr = F2(np.array([0.6, 0.8, 1.0]), p)
    assert arr.shape == (3,)
    assert float(arr[2]) == 0.0
    assert isinstance(F2(0.7, p), float)


def test_g3_at_q_star_frozen():
    # h3 vanishes at Q_star (to the root-finder tolerance) so F3 there is
    # mu-independent up to that slack
    qs = q_star(2.5)
    vals = [F3(qs, replace(EXAMPLE, mu=mu)) for mu in (-0.01, -0.3)]
    for v in vals:
        assert v == pytest.approx(-0.12225132610265413, abs=1e-10)
    assert abs(vals[0] - vals[1]) <= 1e-11


def test_mu_curves_are_roots_of_structure_fns():
    rng = np.random.default_rng(2)
    qs = q_star(EXAMPLE.n)
    for i in (1, 2, 3):
        lo = qs + 1e-6 if i == 3 else 0.05
        for Q in rng.uniform(lo + 1e-3, 0.999, size=40):
            mu = float(mu_curve(i, Q, EXAMPLE))
            if mu >= 0.0:
                continue  # params only admit negative curvatures
            p = replace(EXAMPLE, mu=mu)
            val = structure_fn(i, float(Q), p)
            assert abs(val) <= 1e-12 * max(1.0, abs(mu))


def test_mu_curve_domain_errors():
    with pytest.raises(ValueError):
        mu_curve(1, 1.0, EXAMPLE)
    with pytest.raises(ValueError):
        mu_curve(2, 1.2, EXAMPLE)
    with pytest.raises(ValueError):
        mu_curve(3, 0.5, EXAMPLE)  # below Q_star(2.5)
    with pytest.raises(ValueError):
        mu_curve(0, 0.5, EXAMPLE)


def test_structure_report_frozen_digits(report3):
    assert report3.Q1 == pytest.approx(0.77328444663882409, abs=1e-14)
    assert report3.mu1_min == pytest.approx(-0.02145832706274009, abs=1e-13)
    assert report3.Q_star == pytest.approx(0.55250896337800284, abs=1e-11)
    assert report3.mu3_min < report3.mu1_min < report3.mu2_min < 0.0
    assert report3.intersection_gap <= 1e-8
    assert report3.Q_star < report3.Q3 < 1.0
    assert 0.0 < report3.Q2 < 1.0


@settings(max_examples=25)
@given(
    st.sampled_from([1.0, 2.0, 3.0, 4.0, 7.0]),
    st.floats(min_value=2.0, max_value=3.0),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_structure_report_ordering_property(d, n, frac):
    c = 1.55 + frac * (n - 0.05 - 1.55)
    rep = structure_report(ProfileParams(d=d, n=n, c=c))
    assert rep.mu3_min < rep.mu1_min < rep.mu2_min < 0.0


def test_integrate_shot_crossing_and_samples():
    p = replace(EXAMPLE, mu=-0.021)
    outcome, samples = integrate_shot(p)
    assert outcome.classification is ShotClass.CROSSED
    assert outcome.r_star is not None and outcome.r_star > 1.0
    assert samples.r[0] == 0.0
    assert samples.Q[0] == 1.0
    assert samples.Q_r[0] == 0.0
    assert samples.Q_rr[0] == -0.021
    steps = np.diff(samples.r[:-1])
    np.testing.assert_allclose(steps, 0.01, atol=1e-12)
    assert samples.r[-1] == pytest.approx(outcome.r_star)
    assert samples.Q[-1] == pytest.approx(q_star(p.n), abs=1e-9)
    assert np.all(np.diff(samples.Q) < 0.0)
    with pytest.raises(ValueError):
        samples.Q[0] = 2.0  # readonly


def test_integrate_shot_turning():
    rep = structure_report(EXAMPLE)
    p = replace(EXAMPLE, mu=rep.mu2_min / 2.0)
    outcome, samples = integrate_shot(p)
    assert outcome.classification is ShotClass.TURNED
    assert outcome.subcase in ("convex", "degenerate", "at_floor")
    assert outcome.tau is not None and outcome.tau > 0.0
    assert abs(samples.Q_r[-1]) <= 1e-9
    _, none_samples = integrate_shot(p, keep_samples=False)
    assert none_samples is None


def test_integrate_shot_requires_mu_and_sane_spacing():
    with pytest.raises(ValueError):
        integrate_shot(EXAMPLE)
    with pytest.raises(ValueError):
        integrate_shot(replace(EXAMPLE, mu=-0.021), dr_sample=1e-7)


def test_classification_stable_under_tighter_rtol():
    p = replace(EXAMPLE, mu=-0.021)
    out_a, _ = integrate_shot(p, rtol=1e-10, keep_samples=False)
    out_b, _ = integrate_shot(p, rtol=5e-11, keep_samples=False)
    assert out_a.classification is out_b.classification is ShotClass.CROSSED
    assert out_a.r_star == pytest.approx(out_b.r_star, abs=1e-5)


def test_indeterminate_when_radius_too_small(critical3):
    mu_c, _ = critical3
    with pytest.raises(Indeterminate):
        integrate_shot(replace(EXAMPLE, mu=mu_c), r_max=5.0)


def test_find_mu_c_example_regime(critical3, report3):
    mu_c, sol = critical3
    assert report3.mu3_min < mu_c <= report3.mu2_min
    assert -0.021 < mu_c < 0.0
    assert mu_c == pytest.approx(-0.020767505954475025, abs=1e-8)
    assert sol.params.mu == mu_c
    assert report3.Q_star < sol.Q_tau < report3.Q1
    assert sol.Q_tau == pytest.approx(0.7375896882, abs=1e-4)
    assert float(sol.samples.Q_r.max()) <= 1e-12
    assert np.all(np.diff(sol.samples.Q) <= 1e-12)


def test_ode_residual_small_on_shots(critical3):
    _, sol = critical3
    res = ode_residual(sol.samples, sol.params)
    assert np.max(np.abs(res)) <= 1e-7
    p = replace(EXAMPLE, mu=-0.021)
    _, samples = integrate_shot(p)
    assert np.max(np.abs(ode_residual(samples, p))) <= 1e-7


def test_qr2_identity_gap_small(critical3):
    _, sol = critical3
    assert qr2_identity_gap(sol.samples, sol.params) <= 1e-6
    p = ProfileParams(d=1.0, n=2.5, c=1.7, mu=-0.021)
    _, samples = integrate_shot(p)
    assert qr2_identity_gap(samples, p) <= 1e-6


def test_d1_first_integrals():
    # planar case: Q^n Q_rr = (Q-1) - (Q^n-1)/c + mu, and the slope energy
    # 0.5 Q_r^2 equals the quadrature of that right side against q^{-n} dq
    p = ProfileParams(d=1.0, n=2.5, c=1.7, mu=-0.021)
    _, s = integrate_shot(p)
    G = (s.Q - 1.0) - (s.Q**p.n - 1.0) / p.c + p.mu
    gap1 = np.max(np.abs(s.Q**p.n * s.Q_rr - G))
    assert gap1 <= 1e-10

    def integrand(q):
        return ((q - 1.0) - (q**p.n - 1.0) / p.c + p.mu) * q**-p.n

    idx = np.linspace(0, len(s.r) - 1, 25, dtype=int)
    for i in idx:
        want, _ = quad(integrand, 1.0, s.Q[i], epsabs=1e-14, epsrel=1e-13)
        assert 0.5 * s.Q_r[i] ** 2 == pytest.approx(want, abs=1e-12)


def test_decay_check_fit_and_none(critical3):
    _, sol = critical3
    fit = sol.decay
    assert fit is not None
    assert fit.k > 0.0
    want_L = sol.Q_tau ** (-sol.params.n) - sol.params.n / (sol.params.c * sol.Q_tau)
    assert fit.L == pytest.approx(want_L, rel=1e-12)
    assert fit.n_samples >= 20
    assert 0.0 < fit.r_window[0] < fit.r_window[1] <= sol.samples.r[-1]
    # Q_tau at or above (c/n)^{1/(n-1)} is a valid no-decay outcome
    assert decay_check(replace(sol, decay=None, Q_tau=0.99)) is None


def test_decay_check_tail_too_short(critical3):
    _, sol = critical3
    keep = sol.samples.r <= 3.0
    short = ShotSamples(
        r=sol.samples.r[keep],
        Q=sol.samples.Q[keep],
        Q_r=sol.samples.Q_r[keep],
        Q_rr=sol.samples.Q_rr[keep],
    )
    with pytest.raises(TailTooShort):
        decay_check(replace(sol, samples=short, decay=None))


def test_rescale_round_trip(critical3):
    _, sol = critical3
    q0 = 1.0 / sol.Q_tau
    scaled = rescale(sol, q0)
    n, c = sol.params.n, sol.params.c
    assert scaled.scaling.c_bar == pytest.approx(q0 ** (n - 1.0) * c, rel=1e-14)
    assert scaled.scaling.r_scale == pytest.approx(q0 ** (n / 2.0), rel=1e-14)
    assert scaled.scaling.mu_bar == pytest.approx(
        q0 ** (1.0 - n) * sol.params.mu, rel=1e-14
    )
    np.testing.assert_allclose(scaled.Q, q0 * sol.samples.Q, rtol=1e-15)
    back_r = scaled.r / scaled.scaling.r_scale
    np.testing.assert_allclose(back_r, sol.samples.r, rtol=1e-14, atol=1e-16)
    ident = rescale(sol, 1.0)
    np.testing.assert_array_equal(ident.Q, sol.samples.Q)
    with pytest.raises(ValueError):
        rescale(sol, -1.0)
    # decay criterion Q_tau < Q1 is the same statement as c_bar > n
    assert (scaled.scaling.c_bar > n) == (sol.Q_tau < (c / n) ** (1.0 / (n - 1.0)))


def test_embed_on_torus_properties(critical2):
    _, sol = critical2
    q0 = 1.0 / sol.Q_tau
    grid = TorusGrid((96, 96), (160.0, 160.0))
    phi = embed_on_torus(sol, grid)
    center_idx = (48, 48)
    assert phi.values[center_idx] == pytest.approx(q0, rel=1e-12)
    assert phi.values.min() >= 1.0 - 1e-12
    assert phi.values.max() == pytest.approx(q0, rel=1e-12)
    corner = phi.values[0, 0]
    assert corner == pytest.approx(1.0, abs=1e-8)
    shifted = embed_on_torus(sol, grid, center=(40.0, 80.0))
    peak = np.unravel_index(np.argmax(shifted.values), grid.shape)
    assert grid.axis_coordinates(0)[peak[0]] == pytest.approx(40.0, abs=2.0)
    assert grid.axis_coordinates(1)[peak[1]] == pytest.approx(80.0, abs=2.0)


def test_embed_errors(critical2):
    _, sol = critical2
    with pytest.raises(DomainTooSmall):
        embed_on_torus(sol, TorusGrid((64, 64), (60.0, 60.0)))
    with pytest.raises(ValueError):
        embed_on_torus(sol, TorusGrid((16, 16, 16), (160.0,) * 3))
    with pytest.raises(ValueError):
        embed_on_torus(sol, TorusGrid((96, 96), (160.0, 160.0)), center=(1.0,))


def test_profile_csv_round_trip(tmp_path, critical3):
    _, sol = critical3
    path_a = tmp_path / "profile.csv"
    path_b = tmp_path / "again.csv"
    write_profile_csv(path_a, sol)
    back = read_profile_csv(path_a)
    assert back.params == sol.params
    assert back.Q_tau == sol.Q_tau
    np.testing.assert_array_equal(back.samples.r, sol.samples.r)
    np.testing.assert_array_equal(back.samples.Q, sol.samples.Q)
    np.testing.assert_array_equal(back.samples.Q_r, sol.samples.Q_r)
    np.testing.assert_array_equal(back.samples.Q_rr, sol.samples.Q_rr)
    assert back.decay is not None
    assert back.decay.k == sol.decay.k
    assert back.decay.M == sol.decay.M
    assert back.decay.L == pytest.approx(sol.decay.L, rel=1e-14)
    write_profile_csv(path_b, back)
    assert filecmp.cmp(path_a, path_b, shallow=False)


def test_profile_csv_without_decay(tmp_path, critical3):
    _, sol = critical3
    path = tmp_path / "bare.csv"
    write_profile_csv(path, replace(sol, decay=None))
    back = read_profile_csv(path)
    assert back.decay is None


def test_profile_csv_rejects_malformed(tmp_path, critical3):
    _, sol = critical3
    path = tmp_path / "profile.csv"
    write_profile_csv(path, sol)
    lines = path.read_text().splitlines()

    no_meta = tmp_path / "no_meta.csv"
    no_meta.write_text("\n".join(lines[1:]) + "\n")
    with pytest.raises(ValueError, match="metadata"):
        read_profile_csv(no_meta)

    no_header = tmp_path / "no_header.csv"
    no_header.write_text("\n".join([lines[0]] + lines[2:]) + "\n")
    with pytest.raises(ValueError, match="header"):
        read_profile_csv(no_header)

import math

import numpy as np
import pytest

from smib_pss.model import (
    CLOSED_LOOP_LABELS,
    OPEN_LOOP_LABELS,
    ExcitationParams,
    GovernorTurbineParams,
    InfeasibleOperatingPoint,
    InvalidParameterError,
    LineLoadParams,
    MachineParams,
    OperatingCondition,
    PssParams,
    SystemParams,
    build_closed_loop,
    build_closed_loop_for,
    build_open_loop,
    build_open_loop_for,
    compute_heffron_constants,
    heffron_constants_fd,
    pss_frequency_response,
    with_overrides,
)
from smib_pss.modal import eigenvalues

SYS = SystemParams()
OP1 = OperatingCondition()


def lossless(X_e=0.997):
    return LineLoadParams(R=0.0, X_e=X_e, G=0.0, B=0.0)


def random_operating_points(n, seed=7):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        op = OperatingCondition(P=rng.uniform(0.2, 0.9), Q=rng.uniform(-0.1, 0.3), x_e_scale=rng.uniform(0.8, 1.2))
        try:
            compute_heffron_constants(SYS.machine, SYS.line, op)
        except InfeasibleOperatingPoint:
            continue
        out.append(op)
    return out


# -- K-constants -------------------------------------------------------------


def test_k3_lossless_no_local_load():
    K = compute_heffron_constants(MachineParams(), lossless(), OP1)
    assert K.K3 == pytest.approx(1.187 / 1.970, abs=1e-12)
    assert K.K3 == pytest.approx(0.6025, abs=1e-4)


def test_k3_limit_of_vanishing_line_reactance():
    K = compute_heffron_constants(MachineParams(), lossless(X_e=1e-9), OP1)
    assert K.K3 == pytest.approx(0.190 / 0.973, abs=1e-4)


def test_k3_depends_only_on_reactances():
    a = compute_heffron_constants(MachineParams(), lossless(), OperatingCondition(P=0.3, Q=0.0))
    b = compute_heffron_constants(MachineParams(), lossless(), OperatingCondition(P=0.8, Q=0.2))
    assert a.K3 == pytest.approx(b.K3, rel=1e-12)


@pytest.mark.parametrize("op", random_operating_points(10))
def test_heffron_constants_match_finite_difference(op):
    analytic = compute_heffron_constants(SYS.machine, SYS.line, op).as_tuple()
    fd = heffron_constants_fd(SYS.machine, SYS.line, op).as_tuple()
    for a, f in zip(analytic, fd):
        assert abs(a - f) <= 1e-6 * abs(f)


def test_infeasible_operating_point_names_the_equation():
    with pytest.raises(InfeasibleOperatingPoint, match=r"\w"):
        compute_heffron_constants(SYS.machine, SYS.line, OperatingCondition(P=50.0, Q=0.0))


@pytest.mark.parametrize(
    "factory",
    [
        lambda: MachineParams(x_d=0.1, x_d_prime=0.19),
        lambda: MachineParams(M=0),
        lambda: LineLoadParams(X_e=0),
        lambda: ExcitationParams(T_A=0),
        lambda: GovernorTurbineParams(R_p=0),
        lambda: OperatingCondition(P=0),
        lambda: OperatingCondition(k_a_scale=0),
    ],
)
def test_parameter_invariants(factory):
    with pytest.raises(InvalidParameterError):
        factory()


# -- open loop ---------------------------------------------------------------


def test_open_loop_shape_and_labels():
    m = build_open_loop_for(SYS, OP1)
    assert m.A.shape == (8, 8)
    assert m.labels == OPEN_LOOP_LABELS == (
        "domega", "ddelta", "dEq_prime", "dEfd", "dVr", "dVe", "dPg", "dTm",
    )


def test_angle_row_has_single_entry():
    m = build_open_loop_for(SYS, OP1)
    row = m.A[m.index("ddelta")]
    assert np.count_nonzero(row) == 1
    assert row[m.index("domega")] == SYS.machine.omega_0


def test_disturbance_enters_swing_equation_only():
    m = build_open_loop_for(SYS, OP1)
    expected = np.zeros(8)
    expected[0] = -1.0 / SYS.machine.M
    assert np.array_equal(m.b_dist, expected)


def test_governor_block_without_droop_feedback():
    system = with_overrides(SYS, gt={"R_p": math.inf})
    m = build_open_loop_for(system, OP1)
    i, j = m.index("dPg"), m.index("dTm")
    block = m.A[np.ix_([i, j], [i, j])]
    assert m.A[i, m.index("domega")] == 0.0
    assert sorted(np.linalg.eigvals(block).real) == pytest.approx([-5.0, -10 / 3])


def test_doubling_inertia_halves_speed_row():
    a = build_open_loop_for(SYS, OP1)
    b = build_open_loop_for(with_overrides(SYS, machine={"M": 2 * SYS.machine.M}), OP1)
    np.testing.assert_allclose(b.A[0], a.A[0] / 2, rtol=1e-14)
    assert b.b_dist[0] == pytest.approx(a.b_dist[0] / 2, rel=1e-14)
    np.testing.assert_array_equal(b.A[1:], a.A[1:])


def test_amplifier_gain_scale_applies_to_ka():
    base = build_open_loop_for(SYS, OP1)
    scaled = build_open_loop_for(SYS, OperatingCondition(k_a_scale=1.1))
    vr, ve = base.index("dVr"), base.index("dVe")
    assert scaled.A[vr, ve] == pytest.approx(1.1 * base.A[vr, ve], rel=1e-14)


def test_line_reactance_scale_changes_k_constants():
    K = compute_heffron_constants(SYS.machine, SYS.line, OperatingCondition(x_e_scale=1.1))
    K_ref = compute_heffron_constants(SYS.machine, with_overrides(SYS, line={"X_e": 1.1 * 0.997}).line, OP1)
    np.testing.assert_allclose(K.as_tuple(), K_ref.as_tuple(), rtol=1e-12)


def test_open_loop_has_one_unstable_oscillatory_pair():
    lam = eigenvalues(build_open_loop_for(SYS, OP1).A)
    unstable = lam[(lam.real > 0) & (lam.imag > 0)]
    assert len(unstable) == 1
    assert abs(unstable[0].imag - 5.452) <= 0.3 * 5.452


# -- closed loop -------------------------------------------------------------


def test_closed_loop_labels():
    m = build_closed_loop_for(SYS, PssParams(20, 0.5, 0.2), OP1)
    assert m.labels == CLOSED_LOOP_LABELS == OPEN_LOOP_LABELS + ("dP1", "dP2", "dUe")


def test_zero_gain_reproduces_open_loop_exactly():
    ol = build_open_loop_for(SYS, OP1)
    cl = build_closed_loop_for(SYS, PssParams(0.0, 0.5, 0.2), OP1)
    assert np.array_equal(cl.A[:8, :8], ol.A)


def test_zero_gain_eigenvalues_are_open_loop_plus_filter_poles():
    pss = PssParams(0.0, 0.5, 0.2)
    ol = eigenvalues(build_open_loop_for(SYS, OP1).A)
    cl = eigenvalues(build_closed_loop_for(SYS, pss, OP1).A)
    expected = np.concatenate([ol, [-1 / pss.T_w, -1 / pss.T2, -1 / pss.T2]])
    key = lambda z: (round(z.real, 6), round(z.imag, 6))
    np.testing.assert_allclose(sorted(cl, key=key), sorted(expected, key=key), atol=1e-6)


def _speed_to_stabilizer_ratio(pss, omega):
    # Response of dUe and domega to the load disturbance at s = j*omega.
    m = build_closed_loop_for(SYS, pss, OP1)
    x = np.linalg.solve(1j * omega * np.eye(m.n) - m.A, m.b_dist)
    return x[m.index("dUe")] / x[m.index("domega")]


@pytest.mark.parametrize("omega", [0.5, 2.0, 5.3, 12.0])
def test_stabilizer_states_realize_the_transfer_function(omega):
    pss = PssParams(17.0, 0.45, 0.2)
    ratio = _speed_to_stabilizer_ratio(pss, omega)
    assert ratio == pytest.approx(pss_frequency_response(pss, omega), rel=1e-9)


def test_equal_time_constants_reduce_to_washout():
    pss = PssParams(8.0, 0.3, 0.3)
    for omega in (0.7, 3.0):
        s = 1j * omega
        expected = pss.K_s * s * pss.T_w / (1 + s * pss.T_w)
        assert _speed_to_stabilizer_ratio(pss, omega) == pytest.approx(expected, rel=1e-9)


def test_published_swarm_settings_stabilize_condition_one():
    m = build_closed_loop_for(SYS, PssParams(52.1596, 0.2353, 0.5176), OP1)
    assert np.all(eigenvalues(m.A).real < 0)


@pytest.mark.parametrize(
    "pss",
    [PssParams(10, 0.5, 0.0), PssParams(10, 0.5, 0.2, T_w=0.0), PssParams(10, -0.1, 0.2)],
)
def test_closed_loop_rejects_degenerate_stabilizer(pss):
    with pytest.raises(InvalidParameterError):
        build_closed_loop(SYS.machine, SYS.line, SYS.exc, SYS.gt, pss, OP1)


# -- frequency response ------------------------------------------------------


def test_frequency_response_blocks_dc():
    assert pss_frequency_response(PssParams(30, 0.5, 0.2), 0.0) == 0


def test_frequency_response_high_frequency_limit():
    pss = PssParams(12.5, 0.4, 0.4)
    assert abs(pss_frequency_response(pss, 1e9)) == pytest.approx(12.5, rel=1e-6)


def test_frequency_response_hand_evaluation():
    # s = 2j: lead-lag (1+1j)/(1+0.2j) = (1.2+0.8j)/1.04, squared;
    # = (0.8+1.92j)/1.0816; washout 20j/(1+20j) = (400+20j)/401
    lead_lag = complex(1.2, 0.8) / 1.04
    washout = complex(400, 20) / 401
    expected = lead_lag * lead_lag * washout
    got = pss_frequency_response(PssParams(1.0, 0.5, 0.1, 10.0), 2.0)
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(complex(0.6492644, 1.8076111), abs=1e-6)


def test_frequency_response_rejects_negative_frequency():
    with pytest.raises(ValueError):
        pss_frequency_response(PssParams(1, 0.5, 0.1), -1.0)


def test_pss_vector_round_trip_and_bounds():
    p = PssParams.from_vector([20.0, 0.3, 0.4])
    assert p.as_vector().tolist() == [20.0, 0.3, 0.4]
    assert p.in_bounds()
    assert not PssParams(61, 0.3, 0.4).in_bounds()

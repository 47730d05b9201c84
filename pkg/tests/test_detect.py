import numpy as np
import pytest

from coopsim import detect


def test_relay_detection_sign_rule():
    np.testing.assert_array_equal(detect.relay_ml_detect([0.3, -0.1, 0.0, -2.0]), [0, 1, 0, 1])


@pytest.mark.parametrize("gsr,grd,lam", [(4.0, 2.0, 1.0), (1.0, 4.0, 0.25), (3.0, 3.0, 1.0), (0.0, 5.0, 0.0),
                                         (5.0, 0.0, 0.0)])
def test_cmrc_lambda(gsr, grd, lam):
    assert detect.cmrc_lambda(gsr, grd) == pytest.approx(lam)


def test_cmrc_lambda_rejects_negative():
    with pytest.raises(ValueError):
        detect.cmrc_lambda(-1.0, 1.0)


def test_combiner_adds_weighted_relay_llrs_only_at_relayed_positions():
    y_sd = np.array([1.0, -0.5, 0.2, 0.7])
    br = detect.RelayedBranch([1, 3], [-1.0, 2.0], gamma_rd=4.0, gamma_sr=1.0)
    out = detect.cmrc_combine(detect.CombinerInput(y_sd, 1.0, [br]))
    expect = 4 * y_sd.copy()
    expect[[1, 3]] += 0.25 * 4 * 2.0 * np.array([-1.0, 2.0])
    np.testing.assert_allclose(out, expect)


def test_muted_relay_leaves_direct_llrs():
    # a near-dead relay-destination link contributes nothing measurable
    y_sd = np.array([0.4, -0.9])
    br = detect.RelayedBranch([0, 1], [5.0, 5.0], gamma_rd=1e-12, gamma_sr=100.0)
    out = detect.cmrc_combine(detect.CombinerInput(y_sd, 2.0, [br]))
    np.testing.assert_allclose(out, detect.branch_llr(y_sd, 2.0), atol=1e-4)


def test_weak_source_relay_link_suppresses_error_propagation():
    # a relay that probably mis-detected gets a small weight
    y_sd = np.array([0.1])
    br = detect.RelayedBranch([0], [-1.0], gamma_rd=100.0, gamma_sr=0.01)
    out = detect.cmrc_combine(detect.CombinerInput(y_sd, 1.0, [br]))
    assert out[0] == pytest.approx(0.4 + 1e-4 * 40 * -1.0)


def test_combiner_validates_positions():
    with pytest.raises(ValueError):
        detect.cmrc_combine(detect.CombinerInput(np.zeros(3), 1.0, [detect.RelayedBranch([5], [1.0], 1.0, 1.0)]))
    with pytest.raises(ValueError):
        detect.RelayedBranch([0, 1], [1.0], 1.0, 1.0)


def test_xor_and_network_coded_llr():
    np.testing.assert_array_equal(detect.xor_encode([0, 1, 1, 0], [0, 0, 1, 1]), [0, 1, 0, 1])
    with pytest.raises(ValueError):
        detect.xor_encode([0, 1], [1])
    y = np.array([0.5, -1.0])
    assert detect.ncc_lambda(4.0, 1.0, 8.0) == pytest.approx(0.25)
    np.testing.assert_allclose(detect.ncc_relay_llr(y, 4.0, 1.0, 8.0), 0.25 * 8 * y)
    np.testing.assert_allclose(detect.ncc_relay_llr(y, 4.0, 1.0, 8.0, scaled=False), 8 * y)

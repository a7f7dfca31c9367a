import math

import numpy as np
import pytest

from lambdatele.errors import DomainError, PostSelectionError
from lambdatele.fockspace import fidelity
from lambdatele.operators import IDENTITY_2, R4_SWAP
from lambdatele.protocols import (
    BellVariant,
    TeleportConfig,
    bell_checks,
    chi_series,
    correction_for,
    epr_trace,
    prepare_epr,
    probe_pulse_heuristic,
    probe_pulse_optimize,
    teleport,
)

from oracles import DenseModel, teleport_oracle

N_MAX = 50


def _oracle_epr(alpha, gt, sign, n_max=N_MAX):
    psi = DenseModel(2, n_max).run_epr(alpha, gt, sign)
    t = psi.reshape(2, 2, 2, n_max + 1)[:, :, 1, :]  # A1, A2, (probe e), cavity
    return float(np.sum(np.abs(t) ** 2))


@pytest.mark.parametrize("variant", list(BellVariant))
def test_prepare_epr_all_variants(variant):
    res = prepare_epr(2.0, variant=variant, n_max=N_MAX)
    assert res.fidelity_to_ideal > 1 - 1e-10
    assert res.diagnostics["schmidt_residual"] < 1e-12
    assert abs(res.success_probability - _oracle_epr(2.0, res.gt, variant.injection_sign)) < 1e-10


def test_epr_probability_matches_series():
    alpha, gt = 2.0, probe_pulse_heuristic(2.0)
    chi_e, chi_f = chi_series(alpha, gt, 200)
    res = prepare_epr(alpha, gt, n_max=N_MAX)
    assert abs(res.success_probability - 0.5 * np.vdot(chi_e, chi_e).real) < 1e-10
    assert res.success_probability <= 0.5


def test_epr_field_is_two_alpha_conditioned_on_e():
    res = prepare_epr(1.5, 0.6, n_max=N_MAX)
    chi_e, _ = chi_series(1.5, 0.6, N_MAX + 1)
    field_state = res.diagnostics["field_state"]
    overlap = abs(np.vdot(chi_e, field_state.amps)) ** 2 / np.vdot(chi_e, chi_e).real
    assert overlap > 1 - 1e-10


def test_epr_trace_stages():
    stages = epr_trace(1.0)
    assert list(stages) == ["initial", "after_first", "second_added", "after_second", "after_injection", "after_probe"]
    for s in stages.values():
        assert abs(s.norm2() - 1) < 1e-10


def test_epr_zero_probe_fails():
    with pytest.raises(PostSelectionError):
        prepare_epr(2.0, probe_gt=0.0, n_max=N_MAX)


def test_heuristic_values():
    assert probe_pulse_heuristic(1.0) == pytest.approx(math.pi / 4)
    assert probe_pulse_heuristic(2.0) == pytest.approx(math.pi / 8)
    assert probe_pulse_heuristic(-2.0j) == pytest.approx(math.pi / 8)
    with pytest.raises(DomainError):
        probe_pulse_heuristic(0)
    with pytest.raises(DomainError):
        probe_pulse_heuristic(0.1)


def test_optimizer_dominates_heuristic():
    opt = probe_pulse_optimize(2.0)
    assert opt.e3_probability >= opt.heuristic_probability - 1e-12
    assert opt.e3_probability > 0.40
    assert 0 < opt.chi_f_residual < 0.1
    assert abs(opt.gt - 0.38939) < 1e-3


def test_optimum_grows_with_alpha():
    probs = [probe_pulse_optimize(a).e3_probability for a in (1.0, 2.0, 3.0)]
    assert probs[0] < probs[1] < probs[2] < 0.5


def test_bell_checks_pass():
    gram, checks = bell_checks()
    assert np.max(np.abs(gram - np.eye(4))) < 1e-15
    assert all(c.passed for c in checks)
    assert len(checks) == 3


def test_correction_table():
    assert correction_for("bb") is IDENTITY_2
    assert correction_for("cc") is IDENTITY_2
    assert correction_for("bc") is R4_SWAP
    assert correction_for(("c", "b")) is R4_SWAP
    for bad in ("ab", "b", "bbb"):
        with pytest.raises(DomainError):
            correction_for(bad)


def test_teleport_config_validation():
    with pytest.raises(DomainError):
        TeleportConfig(1, 1)
    with pytest.raises(DomainError):
        TeleportConfig(1, 0, mode="bogus")
    with pytest.raises(DomainError):
        TeleportConfig(1, 0, mode="sample")


@pytest.mark.parametrize("zeta,xi", [
    (1.0, 0.0),
    (0.6, 0.8j),
    (np.exp(0.3j) / math.sqrt(2), -1 / math.sqrt(2)),
])
def test_teleport_outcomes(zeta, xi):
    res = teleport(TeleportConfig(zeta, xi, n_max=N_MAX))
    assert [o.outcome for o in res.outcomes] == ["bb", "bc", "cb", "cc"]
    for o in res.outcomes:
        assert abs(o.probability - 0.25) < 1e-10
        assert o.fidelity_to_input > 1 - 1e-10
        assert o.schmidt_residual < 1e-12
    p_e, table = teleport_oracle(zeta, xi, 2.0, res.gt, N_MAX)
    assert abs(res.e3_probability - p_e) < 1e-10
    for label, (p, fid) in table.items():
        assert abs(res.outcome(label).probability - p) < 1e-10
        assert abs(res.outcome(label).fidelity_to_input - fid) < 1e-10


def test_mixed_outcome_needs_swap():
    res = teleport(TeleportConfig(1.0, 0.0, n_max=N_MAX))
    bc = res.outcome("bc")
    assert bc.correction == "R4"
    assert bc.fidelity_before_correction < 1e-10
    assert res.outcome("bb").correction == "identity"
    assert res.outcome("bb").fidelity_before_correction > 1 - 1e-10


def test_sample_mode_is_reproducible():
    cfg = TeleportConfig(0.6, 0.8, n_max=N_MAX, mode="sample", seed=7)
    a, b = teleport(cfg), teleport(cfg)
    assert a.sampled_path == b.sampled_path
    paths = {teleport(TeleportConfig(0.6, 0.8, n_max=N_MAX, mode="sample", seed=s)).sampled_path for s in range(12)}
    assert any(p.e3_detected for p in paths)
    for p in paths:
        if p.e3_detected:
            assert p.fidelity_to_input > 1 - 1e-10


def test_input_leaves_no_trace_on_sender_side():
    ra = teleport(TeleportConfig(1.0, 0.0, n_max=N_MAX))
    rb = teleport(TeleportConfig(0.6, -0.8j, n_max=N_MAX))
    for oa, ob in zip(ra.outcomes, rb.outcomes):
        assert fidelity(oa.residual_state, ob.residual_state) > 1 - 1e-10
    assert abs(ra.e3_probability - rb.e3_probability) < 1e-12


def test_dispersive_marginals_close_to_quarter():
    res = teleport(TeleportConfig(0.6, 0.8, n_max=N_MAX))
    probs = res.dispersive_outcome_probabilities
    assert set(probs) == {"bb", "bc", "cb", "cc"}
    assert abs(sum(probs.values()) - 1) < 1e-12
    # the sender's first atom carries the even/odd norm imbalance
    imbalance = 0.25 * (0.36 - 0.64) * math.exp(-8.0)
    for label in ("bb", "bc"):
        assert abs(probs[label] - (0.25 + imbalance)) < 1e-10
    for label in ("cb", "cc"):
        assert abs(probs[label] - (0.25 - imbalance)) < 1e-10

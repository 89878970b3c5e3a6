import math

import numpy as np
import pytest

from oambsm import elements as el
from oambsm.bell import LABELS, hyper_bell
from oambsm.search import REFERENCE_U4, target_basis
from oambsm.states import ModeUnitary, apply_local, decompose, global_phase_equal, unitarity_residual

BT = np.array([v.amplitudes for v in target_basis(REFERENCE_U4)])


def path_ket(path, mode):
    v = np.zeros(8, dtype=complex)
    v[path * 4 + mode] = 1
    return v


@pytest.mark.parametrize("alpha", [0.0, 0.3, math.pi / 4, 2.0])
@pytest.mark.parametrize("m", [1, 2, 5])
def test_dove_single_involution(alpha, m):
    u = el.dove_single(alpha, m).matrix
    np.testing.assert_allclose(u @ u, np.eye(4), atol=1e-12)
    assert unitarity_residual(u) < 1e-12


def test_dove_single_zero_is_pure_swap():
    u = el.dove_single(0.0).matrix
    expected = np.zeros((4, 4))
    for src, dst in ((0, 3), (3, 0), (1, 2), (2, 1)):
        expected[dst, src] = 1
    np.testing.assert_allclose(u, expected)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_dove_pair_is_two_prisms_at_relative_angle(m):
    pair = el.dove_single(math.pi / (4 * m), m).matrix @ el.dove_single(0.0, m).matrix
    np.testing.assert_allclose(el.dove_pair(m).matrix, pair, atol=1e-12)


def test_dove_pair_square_is_minus_identity():
    u = el.dove_pair(1).matrix
    np.testing.assert_allclose(u @ u, -np.eye(4), atol=1e-15)


def test_dove_pair_maps_psi_plus_to_psi_minus():
    out = apply_local(el.dove_pair(1), "A", hyper_bell("PsiPlus"))
    assert global_phase_equal(out, hyper_bell("PsiMinus"))


def test_dove_pair_commutes_with_polarization_unitary():
    # a rotation mixing H and V within each OAM sign: modes (0,2) and (3,1)
    c, s = math.cos(0.4), math.sin(0.4)
    pol = np.eye(4, dtype=complex)
    pol[np.ix_([0, 2], [0, 2])] = [[c, -s], [s, c]]
    pol[np.ix_([3, 1], [3, 1])] = [[c, -s], [s, c]]
    d = el.dove_pair(1).matrix
    np.testing.assert_allclose(d @ pol, pol @ d, atol=1e-15)


def test_dove_single_twice_on_state():
    s = hyper_bell("PhiMinus")
    u = el.dove_single(1.1, 1)
    out = apply_local(u, "A", apply_local(u, "A", s))
    np.testing.assert_allclose(out.amplitudes, s.amplitudes, atol=1e-12)


def test_pbs_rules():
    u = el.pbs().matrix
    np.testing.assert_array_equal(u @ path_ket(0, 1), path_ket(1, 1))  # V reflects
    np.testing.assert_array_equal(u @ path_ket(0, 0), path_ket(0, 0))  # H transmits
    assert unitarity_residual(u) < 1e-12


def test_bs_convention():
    u = el.bs().matrix
    np.testing.assert_allclose(u @ path_ket(0, 2), (path_ket(0, 2) + 1j * path_ket(1, 2)) / math.sqrt(2))
    swap = np.kron(np.array([[0, 1], [1, 0]]), np.eye(4))
    np.testing.assert_allclose(u @ u, 1j * swap, atol=1e-15)


def test_composition_order_convention():
    chain = [el.ElementSpec("pbs"), el.ElementSpec("bs")]
    out = el.compose(chain).matrix @ path_ket(0, 1)
    np.testing.assert_allclose(out, (path_ket(1, 1) + 1j * path_ket(0, 1)) / math.sqrt(2), atol=1e-15)


def test_element_spec_roundtrip_and_angle_range():
    spec = el.ElementSpec("phase_plate", {"phi": 7.0, "arm": 1})
    assert 0 <= spec.params["phi"] < 2 * math.pi
    back = el.ElementSpec.from_dict(spec.to_dict())
    np.testing.assert_allclose(back.unitary().matrix, spec.unitary().matrix)
    with pytest.raises(ValueError):
        el.ElementSpec("mirror")


def test_every_element_unitary():
    for spec in el.analyzer_elements(1.0, 2.0, 2):
        assert unitarity_residual(spec.unitary().matrix) < 1e-12


def _brute_min_fidelity(mzi, inp, m=1):
    meas = el.measurement_rows(el.compose(el.analyzer_elements(mzi, inp, m)))
    return min(abs(meas[k] @ BT[k]) ** 2 for k in range(4))


def test_tuning_matches_brute_force_scan():
    phases = np.arange(360) * math.pi / 180
    brute = np.array([_brute_min_fidelity(p, math.pi / 2) for p in phases])
    best = phases[int(np.argmax(brute))]
    assert best == pytest.approx(math.pi / 2)
    tuned = el.tune_analyzer(1)
    assert tuned.mzi_phase == pytest.approx(best)
    assert tuned.min_fidelity >= 1 - 1e-9
    # fast grid reproduces the brute-force scan on a coarse 2D grid
    coarse = np.arange(8) * math.pi / 4
    grid = el._fidelity_grid(coarse, 1, BT)
    for i, a in enumerate(coarse):
        for j, b in enumerate(coarse):
            assert grid[i, j] == pytest.approx(_brute_min_fidelity(b, a), abs=1e-12)


def test_tuned_phase_in_quarter_turns():
    t = el.tune_analyzer(2)
    quarter = t.mzi_phase / (math.pi / 2)
    assert abs(quarter - round(quarter)) < 1e-9


def test_detuned_splits():
    t = el.tune_analyzer(1)
    dm = el.analyzer_chain(t.mzi_phase + math.pi / 2, 1, t.input_phase)
    assert not dm.valid
    probs = dm.routing_table(BT)
    assert np.any((probs > 0.1) & (probs < 0.9))


def test_routing_and_povm():
    t = el.tune_analyzer(1)
    dm = el.analyzer_chain(t.mzi_phase, 1, t.input_phase)
    assert dm.valid
    np.testing.assert_allclose(dm.routing_table(BT), np.eye(4), atol=1e-9)
    M = dm.measurement_rows()
    for d in range(4):
        povm = np.outer(M[d].conj(), M[d])
        proj = np.outer(BT[d], BT[d].conj())
        np.testing.assert_allclose(povm, proj, atol=1e-12)


@pytest.mark.parametrize("label", LABELS)
def test_chain_statistics_match_projection(label):
    t = el.tune_analyzer(1)
    dm = el.analyzer_chain(t.mzi_phase, 1, t.input_phase)
    s = hyper_bell(label)
    np.testing.assert_allclose(el.chain_statistics(s, dm), np.abs(decompose(s, BT)) ** 2, atol=1e-9)


def test_detector_map_bijection():
    dm = el.analyzer_chain(math.pi / 2)
    with pytest.raises(ValueError):
        el.DetectorMap({1: 0, 2: 0, 3: 2, 4: 3}, dm.chain, dm.composite, 1.0, True)
    d = dm.to_dict()
    assert [c["kind"] for c in d["chain"]][:3] == ["pbs", "phase_plate", "bs"]


def test_tuning_error_for_unreachable_basis():
    # a basis no glass-plate setting can route: B^t rows cyclically shifted across ports
    rows = np.roll(BT, 1, axis=1)
    with pytest.raises(el.TuningError):
        el.tune_analyzer(1, basis_rows=rows)

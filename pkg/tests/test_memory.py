import math

import numpy as np
import pytest

from spinlink.errors import InvalidArgument
from spinlink.memory import (
    DOPPLER_TIME, LossBudget, MemoryParams, apply_memory_channel, apply_phase, calibrate_eta0, combined_loss,
    doppler_dephasing_time, end_to_end_transmission, ideal_psi1, ideal_psi3, jitter_for_visibility,
    retrieval_efficiency,
)
from spinlink.qcore import bell_phi_plus
from spinlink.rng import StreamFactory
from spinlink.source import PairEmission, ideal_psi2


class TestDoppler:
    def test_quoted_value(self):
        assert doppler_dephasing_time(475e-9, 795e-9, 0.276) == pytest.approx(4.275645380434784e-6, rel=1e-12)
        assert DOPPLER_TIME * 1e6 == pytest.approx(4.28, rel=5e-3)

    def test_closed_form(self):
        assert doppler_dephasing_time(500e-9, 1000e-9, 1.0) == pytest.approx(1.0e-6)

    @pytest.mark.parametrize("l1,l2,v", [(475e-9, 795e-9, 0.552), (480e-9, 780e-9, 0.3), (1e-6, 2e-6, 2.0)])
    def test_direct_arithmetic(self, l1, l2, v):
        assert doppler_dephasing_time(l1, l2, v) == pytest.approx(1 / ((1 / l1 - 1 / l2) * v), rel=1e-12)

    def test_double_speed_halves(self):
        assert doppler_dephasing_time(475e-9, 795e-9, 0.552) == pytest.approx(2.1378e-6, rel=1e-4)

    def test_errors(self):
        with pytest.raises(ZeroDivisionError):
            doppler_dephasing_time(795e-9, 795e-9, 0.276)
        with pytest.raises(InvalidArgument):
            doppler_dephasing_time(795e-9, 475e-9, 0.0)


class TestEfficiency:
    def test_eta_at_zero(self):
        for p in (MemoryParams(), MemoryParams(eta0=0.5, tau_extra=2e-6)):
            assert retrieval_efficiency(0.0, p) == p.eta0

    def test_calibration(self):
        eta0 = calibrate_eta0(0.229, 300e-9)
        # independent evaluation of the decay law
        expected = 0.229 / (math.exp(-0.3 / 5.0) * math.exp(-(0.3e-6 / DOPPLER_TIME) ** 2))
        assert eta0 == pytest.approx(expected, rel=1e-12)
        assert eta0 == pytest.approx(0.24436, abs=1e-5)
        assert retrieval_efficiency(300e-9, MemoryParams()) == pytest.approx(0.229, rel=1e-12)

    def test_monotone_and_vanishing(self):
        p = MemoryParams(tau_extra=3e-6)
        t = np.linspace(0, 5 * p.tau_life, 100)
        eta = retrieval_efficiency(t, p)
        assert np.all(np.diff(eta) < 0)
        assert retrieval_efficiency(1e-3, p) < 1e-100

    def test_negative_time(self):
        with pytest.raises(InvalidArgument):
            retrieval_efficiency(-1e-9, MemoryParams())

    def test_params_validation(self):
        with pytest.raises(InvalidArgument):
            MemoryParams(eta0=1.5)
        with pytest.raises(InvalidArgument):
            MemoryParams(tau_life=0.0)
        with pytest.raises(InvalidArgument):
            calibrate_eta0(0.99, 3e-6)


class TestPhaseJitter:
    def test_sigma_for_0854(self):
        assert math.exp(-0.562**2 / 2) == pytest.approx(0.854, abs=5e-4)
        assert jitter_for_visibility(0.854) == pytest.approx(0.562, abs=1e-3)
        assert MemoryParams(phase_jitter_sigma=0.562).coherence_factor == pytest.approx(0.8539, abs=1e-4)

    def test_apply_phase(self):
        rho = bell_phi_plus().rho
        out = apply_phase(rho, math.pi / 3)
        assert out[0, 3] == pytest.approx(0.5 * np.exp(-1j * math.pi / 3))
        batch = apply_phase(rho, np.array([0.0, math.pi]))
        assert batch.shape == (2, 4, 4)
        assert batch[1, 0, 3] == pytest.approx(-0.5)

    def test_identity_channel(self):
        e = PairEmission(0, 1, bell_phi_plus())
        out = apply_memory_channel(e, MemoryParams(eta0=1.0, tau_life=1e9, tau_doppler=1e9), np.random.default_rng(2))
        assert out.retrieved and out.state == bell_phi_plus()

    def test_zero_efficiency(self):
        e = PairEmission(0, 2, bell_phi_plus())
        rng = np.random.default_rng(1)
        assert not any(apply_memory_channel(e, MemoryParams(eta0=0.0), rng).retrieved for _ in range(200))

    def test_empty_cycle_rejected(self):
        with pytest.raises(InvalidArgument):
            apply_memory_channel(PairEmission(0, 0), MemoryParams(), np.random.default_rng(0))

    def test_survival_frequency(self):
        p = MemoryParams()
        rng = StreamFactory(12).aux("survival")
        e = PairEmission(0, 1, bell_phi_plus())
        n = 100_000
        k = sum(apply_memory_channel(e, p, rng).retrieved for _ in range(n))
        q = p.efficiency
        assert abs(k - n * q) < 4 * math.sqrt(n * q * (1 - q))

    def test_ensemble_coherence(self):
        sigma = 0.562
        p = MemoryParams(eta0=1.0, tau_life=1e9, tau_doppler=1e9, phase_jitter_sigma=sigma)
        rng = StreamFactory(13).aux("coherence")
        e = PairEmission(0, 1, bell_phi_plus())
        acc = np.zeros((4, 4), dtype=complex)
        n = 100_000
        for _ in range(n):
            acc += apply_memory_channel(e, p, rng).state.rho
        acc /= n
        assert abs(acc[0, 3]) == pytest.approx(0.5 * math.exp(-sigma**2 / 2), rel=0.02)


class TestStates:
    def test_psi3(self):
        assert ideal_psi3(0.0) == ideal_psi2(0.0)
        theta = math.pi / 3
        rho = ideal_psi3(theta).rho
        assert rho[0, 3] == pytest.approx(np.exp(-1j * theta) / 2)
        assert np.allclose(np.diag(rho).real, [0.5, 0, 0, 0.5])

    def test_psi1(self):
        rho = ideal_psi1(0.0).rho
        assert rho[1, 2] == pytest.approx(0.5)
        assert rho[0, 0] == 0 and rho[3, 3] == 0
        assert rho[1, 1] == pytest.approx(0.5) and rho[2, 2] == pytest.approx(0.5)


class TestLosses:
    def test_default_budget(self):
        t = end_to_end_transmission(LossBudget(0.50, 0.30, 0.335, 0.77))
        assert t.transmission == pytest.approx(0.5 * 0.7 * 0.665 * 0.23, rel=1e-12)
        assert t.transmission == pytest.approx(0.0535, abs=1e-4)
        assert t.total_loss == pytest.approx(0.9465, abs=1e-4)

    def test_trivial(self):
        assert end_to_end_transmission(LossBudget(0, 0, 0, 0)).transmission == 1.0
        assert end_to_end_transmission(LossBudget(0.5, 0, 0, 0)).transmission == 0.5

    def test_invariant(self):
        with pytest.raises(InvalidArgument):
            LossBudget(1.0, 0, 0, 0)

    def test_filtering_composition(self):
        # two cavities at 30% plus one narrowband filter at 5% give the 33.5% filtering loss
        assert combined_loss(0.30, 0.05) == pytest.approx(0.335)

    def test_path_transmission(self):
        assert LossBudget().path_transmission == pytest.approx(0.7 * 0.665)

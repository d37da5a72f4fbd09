import numpy as np
import pytest

from grassfeed.ensembles import (
    RngStream,
    gaussian_matrix,
    isotropic_frame,
    isotropic_frame_in_nullspace,
)
from grassfeed.errors import DimensionError, ParameterError
from grassfeed.precoding import (
    AnalogObservation,
    PrecoderSet,
    SystemConfig,
    analog_feedback,
    analog_rate_loss_bound,
    analog_rate_loss_limit,
    bd_precoders,
    bd_precoders_batch,
    instant_rate_per_user,
    rate_loss_bound,
    rates_batch,
    zf_precoders,
    zf_precoders_batch,
)
from grassfeed.quant_emulator import default_cond_sampler, emulate_batch


class TestSystemConfig:
    def test_valid(self):
        cfg = SystemConfig(6, 2, 10.0)
        assert cfg.k == 3

    def test_rejects_undersized_m(self):
        with pytest.raises(ParameterError):
            SystemConfig(3, 2, 1.0)  # K would be < 2

    def test_rejects_nondivisible(self):
        with pytest.raises(ParameterError):
            SystemConfig(7, 2, 1.0)

    def test_rejects_nonpositive_power(self):
        with pytest.raises(ParameterError):
            SystemConfig(4, 2, 0.0)

    def test_precoder_set_validation(self):
        with pytest.raises(ParameterError):
            PrecoderSet(matrices=np.zeros((2, 4, 2), dtype=complex), scheme="mrt")
        with pytest.raises(DimensionError):
            PrecoderSet(matrices=np.zeros((4, 2), dtype=complex), scheme="bd")


class TestBdPrecoders:
    def test_identity_channel_blocks(self):
        """Users on disjoint coordinate planes: each precoder must span
        exactly its own user's plane."""
        cfg = SystemConfig(4, 2, 1.0)
        eye = np.eye(4, dtype=complex)
        know = np.stack([eye[:, :2], eye[:, 2:]])
        pre = bd_precoders(cfg, know)
        for k in range(2):
            v = pre.matrices[k]
            proj = v @ v.conj().T
            expect = know[k] @ know[k].conj().T
            np.testing.assert_allclose(proj, expect, atol=1e-12)

    @pytest.mark.parametrize("m,n", [(4, 2), (6, 2), (8, 2)])
    def test_zero_interference_residual(self, m, n):
        cfg = SystemConfig(m, n, 10.0)
        gen = RngStream(41).child(m).generator()
        for _ in range(50):
            h = gaussian_matrix(gen, m, n, batch=(cfg.k,))
            pre = bd_precoders(cfg, h)
            for k in range(cfg.k):
                v = pre.matrices[k]
                np.testing.assert_allclose(
                    v.conj().T @ v, np.eye(n), atol=1e-10
                )
                for j in range(cfg.k):
                    if j == k:
                        continue
                    assert np.abs(h[j].conj().T @ v).max() <= 1e-9

    def test_quantized_knowledge_leaks(self):
        """Precoders built from quantized knowledge null the quantized
        frames exactly but leave residual interference on the true
        channels."""
        cfg = SystemConfig(4, 2, 10.0)
        gen = RngStream(41).child(9).generator()
        h = gaussian_matrix(gen, 4, 2, batch=(2,))
        frames = np.stack([np.linalg.qr(h[k])[0] for k in range(2)])
        quant, _ = emulate_batch(gen, frames, 8, sampler=default_cond_sampler(4))
        pre = bd_precoders(cfg, quant)
        for k in range(2):
            j = 1 - k
            assert np.abs(quant[j].conj().T @ pre.matrices[k]).max() <= 1e-9
            assert np.abs(h[j].conj().T @ pre.matrices[k]).max() > 1e-3

    def test_wrong_shape(self):
        cfg = SystemConfig(4, 2, 1.0)
        with pytest.raises(DimensionError):
            bd_precoders(cfg, np.zeros((3, 4, 2), dtype=complex))


class TestZfPrecoders:
    def test_identity_channel(self):
        """Orthogonal single-antenna directions invert to themselves."""
        cfg = SystemConfig(4, 2, 1.0)
        eye = np.eye(4, dtype=complex)
        know = np.stack([eye[:, :2], eye[:, 2:]])
        pre = zf_precoders(cfg, know)
        got = np.abs(np.concatenate([pre.matrices[0], pre.matrices[1]], axis=1))
        np.testing.assert_allclose(got, np.eye(4), atol=1e-12)

    def test_per_antenna_nulling(self):
        cfg = SystemConfig(6, 2, 10.0)
        gen = RngStream(43).child(0).generator()
        for _ in range(30):
            h = gaussian_matrix(gen, 6, 2, batch=(3,))
            pre = zf_precoders(cfg, h)
            cols = np.concatenate([h[k] for k in range(3)], axis=1)  # (M, 6)
            for j in range(6):
                beam = pre.matrices[j // 2][:, j % 2]
                assert np.linalg.norm(beam) == pytest.approx(1.0, abs=1e-10)
                others = np.delete(cols, j, axis=1)
                assert np.abs(others.conj().T @ beam).max() <= 1e-9

    def test_zf_below_bd_under_perfect_csit(self):
        """Per-antenna nulling wastes degrees of freedom relative to
        block nulling, so BD sum rate dominates on average."""
        cfg = SystemConfig(4, 2, 100.0)
        gen = RngStream(43).child(1).generator()
        h = gaussian_matrix(gen, 4, 2, batch=(2000, 2))
        bd = rates_batch(cfg.p, h, bd_precoders_batch(h)).sum(axis=1)
        zf = rates_batch(cfg.p, h, zf_precoders_batch(h)).sum(axis=1)
        assert bd.mean() > zf.mean()
        # and not degenerately so
        assert zf.mean() > 0.5 * bd.mean()


class TestInstantRate:
    def test_vanishes_at_zero_power(self):
        cfg = SystemConfig(4, 2, 1e-12)
        gen = RngStream(45).child(0).generator()
        h = gaussian_matrix(gen, 4, 2, batch=(2,))
        pre = bd_precoders(cfg, h)
        assert instant_rate_per_user(cfg, h[0], pre, 0) == pytest.approx(0.0, abs=1e-9)

    def test_perfect_csit_single_term(self):
        """With exact nulling the interference factor is identity, so the
        rate must equal log2 det(I + c G G^H) alone."""
        cfg = SystemConfig(6, 2, 25.0)
        gen = RngStream(45).child(1).generator()
        h = gaussian_matrix(gen, 6, 2, batch=(3,))
        pre = bd_precoders(cfg, h)
        for k in range(3):
            g = h[k].conj().T @ pre.matrices[k]
            lone = np.linalg.slogdet(
                np.eye(2) + cfg.p / 6.0 * g @ g.conj().T
            )[1] / np.log(2)
            got = instant_rate_per_user(cfg, h[k], pre, k)
            assert got == pytest.approx(lone, abs=1e-9)

    def test_slogdet_oracle(self):
        """Independent re-computation of both determinant terms with numpy
        slogdet, random (possibly non-nulling) precoders."""
        cfg = SystemConfig(4, 2, 10.0)
        gen = RngStream(45).child(2).generator()
        for _ in range(100):
            h = gaussian_matrix(gen, 4, 2, batch=(2,))
            mats = isotropic_frame(gen, 4, 2, batch=(2,))
            pre = PrecoderSet(matrices=mats, scheme="bd")
            for k in range(2):
                c = cfg.p / cfg.m
                full = np.eye(2, dtype=complex)
                intf = np.eye(2, dtype=complex)
                for j in range(2):
                    g = h[k].conj().T @ mats[j]
                    if j == k:
                        full = full + c * g @ g.conj().T
                    else:
                        full = full + c * g @ g.conj().T
                        intf = intf + c * g @ g.conj().T
                expect = (
                    np.linalg.slogdet(full)[1] - np.linalg.slogdet(intf)[1]
                ) / np.log(2)
                got = instant_rate_per_user(cfg, h[k], pre, k)
                assert got == pytest.approx(expect, abs=1e-9)

    def test_interference_reduces_rate(self):
        """Zeroing the interfering precoder can only raise user 0's rate."""
        cfg = SystemConfig(4, 2, 10.0)
        gen = RngStream(45).child(3).generator()
        h = gaussian_matrix(gen, 4, 2, batch=(2,))
        mats = isotropic_frame(gen, 4, 2, batch=(2,))
        with_intf = instant_rate_per_user(
            cfg, h[0], PrecoderSet(matrices=mats, scheme="bd"), 0
        )
        silent = mats.copy()
        silent[1] = 0
        without = instant_rate_per_user(
            cfg, h[0], PrecoderSet(matrices=silent, scheme="bd"), 0
        )
        assert without >= with_intf

    def test_index_validation(self):
        cfg = SystemConfig(4, 2, 1.0)
        gen = RngStream(45).child(4).generator()
        h = gaussian_matrix(gen, 4, 2, batch=(2,))
        pre = bd_precoders(cfg, h)
        with pytest.raises(ParameterError):
            instant_rate_per_user(cfg, h[0], pre, 2)
        with pytest.raises(DimensionError):
            instant_rate_per_user(cfg, h[0][:, :1], pre, 0)


class TestAnalogFeedback:
    def test_mmse_shrinkage_exact(self):
        cfg = SystemConfig(4, 2, 4.0)
        gen = RngStream(47).child(0).generator()
        h = gaussian_matrix(gen, 4, 2)
        obs = analog_feedback(gen, cfg, h, beta=2.0)
        snr = 2.0 * 4.0
        np.testing.assert_allclose(
            obs.estimate, np.sqrt(snr) / (1 + snr) * obs.received, atol=1e-15
        )

    def test_high_beta_recovers_channel(self):
        cfg = SystemConfig(4, 2, 1.0)
        gen = RngStream(47).child(1).generator()
        h = gaussian_matrix(gen, 4, 2)
        obs = analog_feedback(gen, cfg, h, beta=1e8)
        assert np.abs(obs.estimate - h).max() <= 1e-3

    def test_error_variance(self):
        """E ||H - estimate||_F^2 = M N / (1 + beta P)."""
        cfg = SystemConfig(4, 2, 10.0)
        beta = 1.0
        gen = RngStream(47).child(2).generator()
        errs = np.empty(100000)
        h = gaussian_matrix(gen, 4, 2, batch=(100000,))
        for i in range(100000):
            obs = analog_feedback(gen, cfg, h[i], beta)
            errs[i] = np.sum(np.abs(h[i] - obs.estimate) ** 2)
        expect = 4 * 2 / (1 + beta * cfg.p)
        assert errs.mean() == pytest.approx(expect, rel=0.02)

    def test_residual_unit_variance(self):
        cfg = SystemConfig(4, 2, 10.0)
        gen = RngStream(47).child(3).generator()
        h = gaussian_matrix(gen, 4, 2, batch=(50000,))
        acc = 0.0
        for i in range(50000):
            obs = analog_feedback(gen, cfg, h[i], 1.0)
            acc += np.mean(np.abs(obs.residual) ** 2)
        assert acc / 50000 == pytest.approx(1.0, rel=0.02)

    def test_beta_validation(self):
        cfg = SystemConfig(4, 2, 1.0)
        gen = RngStream(47).child(4).generator()
        h = gaussian_matrix(gen, 4, 2)
        with pytest.raises(ParameterError):
            analog_feedback(gen, cfg, h, 0.0)


class TestRateLossBounds:
    def test_quantized_zero_distortion(self):
        cfg = SystemConfig(4, 2, 10.0)
        assert rate_loss_bound(cfg, 0.0) == 0.0

    def test_quantized_hand_value(self):
        # N=2, P=10, D=0.2: 2 log2(1 + 5*0.2) = 2
        cfg = SystemConfig(4, 2, 10.0)
        assert rate_loss_bound(cfg, 0.2) == pytest.approx(2.0, abs=1e-12)

    def test_analog_limit_hand_value(self):
        # 2 log2(1 + 0.5/1) = 2 log2(1.5) = 1.1699...
        assert analog_rate_loss_limit(4, 2, 1.0) == pytest.approx(
            1.1699250014423124, abs=1e-12
        )

    def test_analog_finite_below_limit(self):
        for p in (1.0, 10.0, 100.0, 1e4):
            cfg = SystemConfig(4, 2, p)
            assert analog_rate_loss_bound(cfg, 1.0) < analog_rate_loss_limit(4, 2, 1.0)

    def test_analog_monotone_to_limit(self):
        cfg_lo = SystemConfig(4, 2, 100.0)
        cfg_hi = SystemConfig(4, 2, 10000.0)
        lim = analog_rate_loss_limit(4, 2, 2.0)
        lo = analog_rate_loss_bound(cfg_lo, 2.0)
        hi = analog_rate_loss_bound(cfg_hi, 2.0)
        assert lo < hi < lim
        assert lim - hi < 0.01

    def test_analog_vanishes_with_beta(self):
        assert analog_rate_loss_limit(4, 2, 1e9) < 1e-8
        cfg = SystemConfig(4, 2, 10.0)
        assert analog_rate_loss_bound(cfg, 1e9) < 1e-8


class TestBatchParity:
    def test_bd_batch_matches_scalar(self):
        cfg = SystemConfig(6, 2, 10.0)
        gen = RngStream(49).child(0).generator()
        h = gaussian_matrix(gen, 6, 2, batch=(20, 3))
        batch = bd_precoders_batch(h)
        for t in range(20):
            single = bd_precoders(cfg, h[t]).matrices
            for k in range(3):
                pb = batch[t, k] @ batch[t, k].conj().T
                ps = single[k] @ single[k].conj().T
                np.testing.assert_allclose(pb, ps, atol=1e-9)

    def test_zf_batch_matches_scalar(self):
        cfg = SystemConfig(4, 2, 10.0)
        gen = RngStream(49).child(1).generator()
        h = gaussian_matrix(gen, 4, 2, batch=(20, 2))
        batch = zf_precoders_batch(h)
        for t in range(20):
            single = zf_precoders(cfg, h[t]).matrices
            # beams are unit vectors unique up to phase
            for k in range(2):
                for i in range(2):
                    inner = np.abs(np.vdot(single[k][:, i], batch[t, k][:, i]))
                    assert inner == pytest.approx(1.0, abs=1e-9)

    def test_rates_batch_matches_scalar(self):
        cfg = SystemConfig(4, 2, 10.0)
        gen = RngStream(49).child(2).generator()
        h = gaussian_matrix(gen, 4, 2, batch=(20, 2))
        pre = bd_precoders_batch(h)
        rates = rates_batch(cfg.p, h, pre)
        assert rates.shape == (20, 2)
        for t in range(20):
            pset = PrecoderSet(matrices=pre[t], scheme="bd")
            for k in range(2):
                expect = instant_rate_per_user(cfg, h[t, k], pset, k)
                assert rates[t, k] == pytest.approx(expect, abs=1e-9)


class TestEffectiveChannelMoments:
    def test_channel_gram_mean(self):
        """E[H^H H] = M I: each entry of the Gram matrix concentrates."""
        gen = RngStream(51).child(0).generator()
        h = gaussian_matrix(gen, 4, 2, batch=(100000,))
        gram = np.einsum("tmi,tmj->tij", h.conj(), h).mean(axis=0)
        np.testing.assert_allclose(gram, 4 * np.eye(2), atol=4 * 0.01 * 4)
        assert abs(gram[0, 0].real / 4 - 1) < 0.01
        assert abs(gram[1, 1].real / 4 - 1) < 0.01

    def test_quantization_error_direction_isotropy(self):
        """E[V^H S S^H V] = (N/(M-N)) I when V and S are independent
        isotropic N-frames inside the same (M-N)-dim nullspace: nulling a
        common reference confines both, and within that subspace
        E[V^H S S^H V] = tr(S S^H)/(M-N) I."""
        m, n = 6, 2
        gen = RngStream(51).child(1).generator()
        trials = 50000
        ref = isotropic_frame(gen, m, n, batch=(trials,))
        acc = np.zeros((n, n), dtype=complex)
        for i in range(trials):
            s = isotropic_frame_in_nullspace(gen, ref[i], n)
            v = isotropic_frame_in_nullspace(gen, ref[i], n)
            g = v.conj().T @ s
            acc += g @ g.conj().T
        got = acc / trials
        target = n / (m - n)
        assert np.abs(got - target * np.eye(n)).max() < 0.02 * target

    def test_residual_projection_moment(self):
        """E[F^H V V^H F] = N I for unit-variance Gaussian F independent of
        an isotropic N-frame V."""
        m, n = 4, 2
        gen = RngStream(51).child(2).generator()
        trials = 50000
        f = gaussian_matrix(gen, m, n, batch=(trials,))
        v = isotropic_frame(gen, m, n, batch=(trials,))
        g = np.einsum("tmi,tmj->tij", f.conj(), v)
        got = np.einsum("tik,tjk->tij", g, g.conj()).mean(axis=0)
        np.testing.assert_allclose(got, n * np.eye(n), atol=0.02 * n)

import numpy as np
import pytest

import capefact.otd as otd_mod
from capefact.datagen import exact_moments, gen_mog, gen_stm, mog_model, stm_model
from capefact.dp import Model, PrivacyLedger, PrivacySpec, RngStream
from capefact.otd import (
    DecompositionError,
    LatentModel,
    MomentPair,
    RankDeficiencyError,
    agn,
    avn,
    cape_agn,
    conv_otd,
    decompose_projected,
    mog_moments,
    nonprivate_otd,
    pool_moments,
    q_comp,
    recover_components,
    stm_moments,
    stm_postprocess,
    tensor_power_decompose,
    whiten,
    whiten_maps,
)
from capefact.tensors import is_symmetric3, multilinear3, outer3, tensor_norm

from helpers import matched_component_error, matched_weight_error

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


class TestStmMoments:
    def test_single_document(self):
        pair = stm_moments(np.array([[0, 1, 2]]), 3)
        # m2 symmetrized: 1 at (0,1) pre-symmetrization becomes 1/2 + 1/2
        assert pair.m2[0, 1] == pytest.approx(0.5)
        assert pair.m2[1, 0] == pytest.approx(0.5)
        # m3 symmetrized over the 6 permutations of (0,1,2)
        for perm in [(0, 1, 2), (2, 1, 0), (1, 0, 2)]:
            assert pair.m3[perm] == pytest.approx(1.0 / 6.0)
        assert pair.m3[0, 0, 0] == 0.0

    def test_exact_constructor_identity(self):
        model = stm_model(6, 3, RngStream(0, "m"))
        pair = exact_moments(model)
        w, a = model.weights, model.components
        assert np.allclose(pair.m2, (a * w) @ a.T, atol=1e-12)
        expected_m3 = sum(w[k] * outer3(a[:, k], a[:, k], a[:, k]) for k in range(3))
        assert np.allclose(pair.m3, expected_m3, atol=1e-12)

    def test_sampled_moments_converge(self):
        model = stm_model(10, 3, RngStream(1, "m"))
        docs, _ = gen_stm(model, 100_000, RngStream(1, "docs"))
        emp = stm_moments(docs, 10)
        exact = exact_moments(model)
        assert np.linalg.norm(emp.m2 - exact.m2) < 0.02

    def test_index_validation(self):
        with pytest.raises(ValueError):
            stm_moments(np.array([[0, 1, 5]]), 3)
        with pytest.raises(ValueError):
            stm_moments(np.zeros((0, 3), dtype=int), 3)


class TestMogMoments:
    def test_single_sample_no_noise(self):
        pair = mog_moments(E1[:, None], 0.0)
        assert np.allclose(pair.m2, np.outer(E1, E1))
        assert np.allclose(pair.m3, outer3(E1, E1, E1))

    def test_exact_decomposability(self):
        model = mog_model(7, 4, RngStream(2, "m"))
        pair = exact_moments(model)
        w, a = model.weights, model.components
        expected = sum(w[k] * outer3(a[:, k], a[:, k], a[:, k]) for k in range(4))
        assert np.allclose(pair.m3, expected, atol=1e-12)

    def test_sampled_moments_converge(self):
        model = mog_model(10, 5, RngStream(3, "m"), sigma_sq=0.05)
        samples, _ = gen_mog(model, 100_000, RngStream(3, "x"))
        emp = mog_moments(samples, 0.05)
        exact = exact_moments(model)
        assert tensor_norm(emp.m3 - exact.m3) < 0.05

    def test_symmetric_output(self):
        samples, _ = gen_mog(mog_model(4, 2, RngStream(4, "m")), 200, RngStream(4, "x"))
        pair = mog_moments(samples, 0.05)
        assert is_symmetric3(pair.m3)
        assert np.array_equal(pair.m2, pair.m2.T)


class TestWhiten:
    def test_identity_input(self):
        w = whiten(np.eye(4), 4)
        assert np.allclose(w.T @ w, np.eye(4), atol=1e-12)

    def test_diagonal(self):
        w = whiten(np.diag([4.0, 1.0]), 2)
        assert np.allclose(np.abs(w), np.diag([0.5, 1.0]), atol=1e-12)

    def test_whitens_exact_stm_moments(self):
        model = stm_model(8, 3, RngStream(5, "m"))
        pair = exact_moments(model)
        w = whiten(pair.m2, 3)
        assert np.linalg.norm(w.T @ pair.m2 @ w - np.eye(3)) < 1e-10

    def test_inverse_map(self):
        model = mog_model(6, 3, RngStream(6, "m"))
        pair = exact_moments(model)
        w, b = whiten_maps(pair.m2, 3)
        assert np.allclose(b.T @ w, np.eye(3), atol=1e-10)
        assert np.allclose(np.linalg.pinv(w.T), b, atol=1e-8)

    def test_rank_deficiency(self):
        with pytest.raises(RankDeficiencyError):
            whiten(np.diag([1.0, 0.0, 0.0]), 2)
        # negative eigenvalue among the top k after noise
        with pytest.raises(RankDeficiencyError):
            whiten(np.diag([1.0, -0.5]), 2)


class TestTensorPowerMethod:
    def test_planted_two_component(self):
        t = 2.0 * outer3(E1, E1, E1) + outer3(E2, E2, E2)
        pairs = tensor_power_decompose(t, 2, RngStream(7, "p").generator())
        assert np.allclose(pairs.eigenvalues, [2.0, 1.0], atol=1e-10)
        assert np.allclose(np.abs(pairs.vectors), np.eye(2), atol=1e-10)
        assert pairs.converged
        assert pairs.residual_norm < 1e-8

    def test_single_component_any_start(self):
        v = np.array([0.6, -0.8])
        t = 1.5 * outer3(v, v, v)
        pairs = tensor_power_decompose(t, 1, RngStream(8, "p").generator(), restarts=1)
        assert pairs.eigenvalues[0] == pytest.approx(1.5, abs=1e-9)
        assert np.allclose(np.abs(pairs.vectors[:, 0]), np.abs(v), atol=1e-9)

    def test_rotation_covariance(self):
        rng = RngStream(9, "p")
        lams = np.array([3.0, 2.0, 1.0])
        t = sum(lams[i] * outer3(*[np.eye(3)[:, i]] * 3) for i in range(3))
        q, _ = np.linalg.qr(rng.child("q").generator().standard_normal((3, 3)))
        rotated = multilinear3(t, q.T, q.T, q.T)
        pairs = tensor_power_decompose(rotated, 3, rng.child("run").generator())
        assert np.allclose(pairs.eigenvalues, lams, atol=1e-8)

    def test_deflation_residual(self):
        rng = RngStream(10, "p")
        q, _ = np.linalg.qr(rng.child("q").generator().standard_normal((5, 5)))
        lams = np.array([2.5, 2.0, 1.5, 1.0])
        t = sum(lams[i] * outer3(q[:, i], q[:, i], q[:, i]) for i in range(4))
        pairs = tensor_power_decompose(t, 4, rng.child("run").generator())
        assert pairs.residual_norm < 1e-8
        gram = pairs.vectors.T @ pairs.vectors
        assert np.linalg.norm(gram - np.eye(4)) < 1e-8


class TestRecovery:
    def test_single_component_model(self):
        a = np.zeros((4, 1))
        a[1, 0] = 0.9
        model = LatentModel(Model.MOG, np.array([1.0]), a, sigma_sq=0.0)
        result = nonprivate_otd(exact_moments(model), 1, RngStream(11, "p").generator())
        assert result.weights[0] == pytest.approx(1.0, abs=1e-8)
        assert np.allclose(result.components[:, 0], a[:, 0], atol=1e-8)

    def test_nonpositive_eigenvalue_rejected(self):
        with pytest.raises(DecompositionError):
            recover_components(np.array([1.0, -0.2]), np.eye(2), np.eye(2))

    def test_exact_moment_pipeline(self):
        for maker, seed in ((stm_model, 12), (mog_model, 13)):
            model = maker(9, 4, RngStream(seed, "m"))
            result = nonprivate_otd(exact_moments(model), 4, RngStream(seed, "p").generator())
            assert matched_component_error(result.components, model.components) < 1e-6
            assert (
                matched_weight_error(
                    result.weights, result.components, model.weights, model.components
                )
                < 1e-6
            )

    def test_whitened_eigenvalues_are_inverse_sqrt_weights(self):
        model = mog_model(8, 3, RngStream(14, "m"))
        result = nonprivate_otd(exact_moments(model), 3, RngStream(14, "p").generator())
        assert np.allclose(
            np.sort(result.eigenvalues), np.sort(1.0 / np.sqrt(model.weights)), atol=1e-6
        )


class TestAgn:
    def test_noiseless_equals_nonprivate(self):
        model = mog_model(6, 3, RngStream(15, "m"))
        pair = exact_moments(model)
        t1, w1 = agn(pair, None, None, 3, RngStream(15, "r").generator(), noiseless=True)
        w2 = whiten(pair.m2, 3)
        t2 = multilinear3(pair.m3, w2, w2, w2)
        assert np.allclose(t1, t2, atol=1e-12)
        assert np.allclose(w1, w2, atol=1e-12)

    def test_ledger_two_stages(self):
        model = mog_model(6, 3, RngStream(16, "m"))
        pair = MomentPair(
            m2=exact_moments(model).m2,
            m3=exact_moments(model).m3,
            n_samples=5000,
            kind=Model.MOG,
            sigma_sq=model.sigma_sq,
        )
        ledger = PrivacyLedger()
        agn(
            pair,
            PrivacySpec(0.5, 0.005),
            PrivacySpec(0.5, 0.005),
            3,
            RngStream(16, "r").generator(),
            ledger=ledger,
        )
        assert ledger.total() == (1.0, 0.01)

    def test_moderate_noise_recovery(self):
        model = mog_model(6, 3, RngStream(17, "m"))
        samples, _ = gen_mog(model, 20_000, RngStream(17, "x"))
        pair = mog_moments(samples, model.sigma_sq)
        spec = PrivacySpec(5.0, 0.01)
        t_proj, w = agn(pair, spec, spec, 3, RngStream(17, "r").generator())
        result = decompose_projected(t_proj, w, RngStream(17, "p").generator())
        noisy_err = q_comp(result.components, model.components)
        assert noisy_err < 0.5  # informative recovery despite privacy noise

    def test_private_error_within_2x_of_nonprivate(self):
        # D=10, K=5, N=5e4, eps 5 per stage: across 10 seeds the median
        # private error stays within 2x of the non-private pipeline's
        spec = PrivacySpec(5.0, 0.005)
        ratios = []
        for seed in range(10):
            model = mog_model(10, 5, RngStream(seed, "2x/m"))
            samples, _ = gen_mog(model, 50_000, RngStream(seed, "2x/x"))
            pair = mog_moments(samples, model.sigma_sq)
            t_priv, w_priv = agn(pair, spec, spec, 5, RngStream(seed, "2x/r").generator())
            priv = decompose_projected(t_priv, w_priv, RngStream(seed, "2x/p").generator())
            base = nonprivate_otd(pair, 5, RngStream(seed, "2x/q").generator())
            priv_err = q_comp(priv.components, model.components)
            base_err = q_comp(base.components, model.components)
            ratios.append(priv_err / base_err)
        assert np.median(ratios) < 2.0


class TestAvn:
    def test_beta_scales_with_sample_count(self, monkeypatch):
        betas = []

        def recording(dim, beta, rng):
            betas.append(beta)
            return np.zeros((dim,) * 3)

        monkeypatch.setattr(otd_mod, "avn_noise_tensor3", recording)
        model = mog_model(5, 2, RngStream(18, "m"))
        base = exact_moments(model)
        spec = PrivacySpec(1.0, 0.01)
        for n in (100, 200):
            pair = MomentPair(base.m2, base.m3, n, Model.MOG, model.sigma_sq)
            avn(pair, spec, spec, 2, RngStream(18, "r").generator())
        assert betas[1] == pytest.approx(2.0 * betas[0], rel=1e-12)

    def test_noiseless_equals_nonprivate(self):
        model = stm_model(6, 3, RngStream(19, "m"))
        pair = exact_moments(model)
        t1, w1 = avn(pair, None, None, 3, RngStream(19, "r").generator(), noiseless=True)
        w2 = whiten(pair.m2, 3)
        assert np.allclose(t1, multilinear3(pair.m3, w2, w2, w2), atol=1e-12)

    def test_matrix_stage_uses_combined_delta(self, monkeypatch):
        taus = []
        original = otd_mod.sym_noise_matrix

        def recording(dim, tau, rng):
            taus.append(tau)
            return original(dim, tau, rng)

        monkeypatch.setattr(otd_mod, "sym_noise_matrix", recording)
        model = mog_model(5, 2, RngStream(20, "m"))
        pair = MomentPair(exact_moments(model).m2, exact_moments(model).m3, 1000, Model.MOG, model.sigma_sq)
        s1, s2 = PrivacySpec(1.0, 0.004), PrivacySpec(1.0, 0.006)
        avn(pair, s1, s2, 2, RngStream(20, "r").generator())
        from capefact.dp import gaussian_std, sensitivity_m2

        expected = gaussian_std(sensitivity_m2(Model.MOG, 1000), PrivacySpec(1.0, 0.01))
        assert taus == [pytest.approx(expected, rel=1e-12)]


def _site_moment_pairs(seed, dim=6, k=3, n_sites=4, site_size=800):
    model = mog_model(dim, k, RngStream(seed, "m"))
    pairs = []
    for i in range(n_sites):
        samples, _ = gen_mog(model, site_size, RngStream(seed, f"x{i}"))
        pairs.append(mog_moments(samples, model.sigma_sq))
    return model, pairs


class TestCapeAgn:
    def test_noiseless_equals_pooled_pipeline(self):
        _, pairs = _site_moment_pairs(21)
        t1, w1, _ = cape_agn(pairs, None, None, 3, RngStream(21, "r"), noiseless=True)
        pooled = pool_moments(pairs)
        w2 = whiten(pooled.m2, 3)
        t2 = multilinear3(pooled.m3, w2, w2, w2)
        assert np.linalg.norm(w1 - w2) < 1e-10
        assert np.abs(t1 - t2).max() < 1e-12

    def test_seeded_cancellation_identity(self):
        _, pairs = _site_moment_pairs(22)
        spec1, spec2 = PrivacySpec(2.0, 0.01).split()
        t_agg, w, transcript = cape_agn(pairs, spec1, spec2, 3, RngStream(22, "r"))
        g3 = [m.payload for m in transcript.select(kind="m3-g-noise")]
        pooled_form = sum(p.m3 for p in pairs) / len(pairs) + sum(g3) / len(pairs)
        expected = multilinear3(pooled_form, w, w, w)
        rel = np.linalg.norm(t_agg - expected) / np.linalg.norm(expected)
        assert rel < 1e-10

    def test_round2_uploads_scale_as_k_cubed(self):
        _, pairs = _site_moment_pairs(23, dim=8, k=2)
        spec1, spec2 = PrivacySpec(2.0, 0.01).split()
        _, _, transcript = cape_agn(pairs, spec1, spec2, 2, RngStream(23, "r"))
        round1 = transcript.select(kind="m2-site-output")
        round2 = transcript.select(kind="m3-projected")
        assert all(m.nbytes == 8 * 8 * 8 for m in round1)
        assert all(m.nbytes == 8 * 2**3 for m in round2)

    def test_privacy_ledger_composition(self):
        _, pairs = _site_moment_pairs(24)
        ledger = PrivacyLedger()
        spec1, spec2 = PrivacySpec(1.0, 0.01).split()
        cape_agn(pairs, spec1, spec2, 3, RngStream(24, "r"), ledger=ledger)
        eps, delta = ledger.total()
        assert eps == pytest.approx(1.0)
        assert delta == pytest.approx(0.01)
        assert [e for e, *_ in [(lbl, a, b) for lbl, a, b in ledger.entries]] == [
            "whitening-map release",
            "projected-tensor release",
        ]

    def test_trusted_sites(self):
        _, pairs = _site_moment_pairs(25)
        spec1, spec2 = PrivacySpec(2.0, 0.01).split()
        _, _, transcript = cape_agn(
            pairs, spec1, spec2, 3, RngStream(25, "r"), trusted_sites=True
        )
        f2 = [m.payload for m in transcript.select(kind="m2-f-share")]
        f3 = [m.payload for m in transcript.select(kind="m3-f-share")]
        assert all(np.all(v == 0.0) for v in f2 + f3)

    def test_conv_noiseless_matches(self):
        _, pairs = _site_moment_pairs(26)
        t1, w1 = conv_otd(pairs, None, None, 3, RngStream(26, "r"), noiseless=True)
        t2, w2, _ = cape_agn(pairs, None, None, 3, RngStream(26, "r"), noiseless=True)
        assert np.allclose(t1, t2, atol=1e-10)


class TestMetrics:
    def test_q_comp_zero_for_exact(self):
        a = np.random.default_rng(27).standard_normal((4, 3))
        assert q_comp(a, a) == 0.0

    def test_q_comp_permutation_invariant(self):
        a = np.random.default_rng(28).standard_normal((4, 3))
        assert q_comp(a[:, [2, 0, 1]], a) == 0.0

    def test_q_comp_hand_case(self):
        a_hat = np.eye(2)
        a_true = np.array([[1.0, 1.0], [0.0, 0.0]])
        assert q_comp(a_hat, a_true) == pytest.approx(np.sqrt(2.0) / 2.0)

    def test_q_comp_shape_mismatch(self):
        with pytest.raises(ValueError):
            q_comp(np.eye(2), np.eye(3))


class TestStmPostprocess:
    def test_clamp_and_normalize(self):
        col = np.array([[0.5], [-0.1], [0.6]])
        out, flags = stm_postprocess(col)
        assert np.allclose(out[:, 0], [0.5 / 1.1, 0.0, 0.6 / 1.1])
        assert not flags[0]

    def test_valid_column_unchanged(self):
        col = np.array([[0.25], [0.75]])
        out, _ = stm_postprocess(col)
        assert np.allclose(out, col)

    def test_all_negative_column_flagged(self):
        col = np.array([[-0.5], [-0.1]])
        out, flags = stm_postprocess(col)
        assert np.all(out == 0.0)
        assert flags[0]

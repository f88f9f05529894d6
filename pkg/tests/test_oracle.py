import numpy as np
import pytest

from mixtrain.loss import EmpiricalL2, SoftmaxCrossEntropy
from mixtrain.oracle import (CheckResult, DiscreteInstance, ExactEstimator, LinearLoss,
                             convexity_probe, exact_ensemble, exact_gradient, exact_loss,
                             load_instance, make_linear_support_instance, mc_consistency,
                             nonconvex_pair_demo, product_convexity_probe, product_mean,
                             project_by_active_sets, random_instance, save_instance,
                             verification_suite, verify_linear_case, verify_prop1)
from mixtrain.oracle import _check_fixture
from mixtrain.simplex import project_to_simplex


def small_instance():
    outputs = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
    components = np.array([[1.0, 0.0, 0.0], [0.2, 0.3, 0.5]])
    return DiscreteInstance(outputs, components, np.array([1.0, 0.0]), EmpiricalL2())


class TestLinearLoss:
    def test_value_and_gradient(self):
        loss = LinearLoss(np.array([1.0, -2.0]))
        u = np.array([3.0, 4.0])
        assert loss.value(u, None) == pytest.approx(3.0 - 8.0)
        np.testing.assert_array_equal(loss.functional_gradient(u, None),
                                      [1.0, -2.0])
        np.testing.assert_array_equal(loss.functional_gradient(10.0 * u, None),
                                      loss.functional_gradient(u, None))

    def test_rejects_nonfinite_weights(self):
        with pytest.raises(ValueError):
            LinearLoss(np.array([1.0, np.inf]))


class TestDiscreteInstance:
    def test_properties(self):
        inst = small_instance()
        assert inst.n == 2 and inst.point_count == 3

    def test_validation(self):
        ok_out = np.zeros((3, 2))
        ok_comp = np.full((2, 3), 1.0 / 3.0)
        ok_lab = np.zeros(2)
        DiscreteInstance(ok_out, ok_comp, ok_lab, EmpiricalL2())
        with pytest.raises(ValueError):
            DiscreteInstance(np.zeros(3), ok_comp, ok_lab, EmpiricalL2())
        with pytest.raises(ValueError):
            DiscreteInstance(ok_out, np.full((2, 4), 0.25), ok_lab, EmpiricalL2())
        with pytest.raises(ValueError):
            DiscreteInstance(ok_out, np.full((2, 3), 0.5), ok_lab, EmpiricalL2())
        with pytest.raises(ValueError):
            DiscreteInstance(ok_out, -ok_comp, ok_lab, EmpiricalL2())
        with pytest.raises(ValueError):
            DiscreteInstance(ok_out, ok_comp, np.zeros(5), EmpiricalL2())

    def test_components_kept_bit_exact(self):
        # validation must not renormalize: save/load depends on it
        comps = np.random.default_rng(0).dirichlet(np.ones(4), size=2)
        inst = DiscreteInstance(np.zeros((4, 2)), comps, np.zeros(2), EmpiricalL2())
        np.testing.assert_array_equal(inst.components, comps)


class TestExactQuantities:
    def test_ensemble_hand_computed(self):
        inst = small_instance()
        got = exact_ensemble(inst, np.array([0.5, 0.5]))
        # point weights: 0.5*[1,0,0] + 0.5*[0.2,0.3,0.5] = [0.6,0.15,0.25]
        want = 0.6 * inst.outputs[0] + 0.15 * inst.outputs[1] + 0.25 * inst.outputs[2]
        np.testing.assert_allclose(got, want, rtol=1e-15)

    def test_ensemble_is_affine_off_simplex(self):
        inst = small_instance()
        a = np.array([0.3, 0.7])
        d = np.array([0.1, -0.1])
        lhs = exact_ensemble(inst, a + d)
        rhs = exact_ensemble(inst, a) + (exact_ensemble(inst, a + 2 * d)
                                         - exact_ensemble(inst, a)) / 2.0
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
        with pytest.raises(ValueError):
            exact_ensemble(inst, np.array([1.0]))

    def test_loss_composes_ensemble(self):
        inst = small_instance()
        a = np.array([0.25, 0.75])
        assert exact_loss(inst, a) == pytest.approx(
            EmpiricalL2().value(exact_ensemble(inst, a), inst.labels), rel=1e-15)

    @pytest.mark.parametrize("classes", [None, 3])
    def test_gradient_matches_finite_differences(self, classes):
        rng = np.random.default_rng(1 if classes else 2)
        for _ in range(5):
            inst = random_instance(rng, class_count=classes)
            a = rng.dirichlet(np.ones(inst.n))
            g = exact_gradient(inst, a)
            h = 1e-6
            for i in range(inst.n):
                e = np.zeros(inst.n)
                e[i] = h
                fd = (exact_loss(inst, a + e) - exact_loss(inst, a - e)) / (2.0 * h)
                assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)

    def test_exact_estimator_ignores_rng(self):
        inst = small_instance()
        est = ExactEstimator(inst)
        a = np.array([0.4, 0.6])
        np.testing.assert_array_equal(est.ensemble(a, None),
                                      exact_ensemble(inst, a))
        np.testing.assert_array_equal(est.gradient(None, a, np.random.default_rng(0)),
                                      exact_gradient(inst, a))
        assert est.n == 2


class TestDiscreteWorld:
    def test_joint_only_and_fixed_inputs(self):
        world = small_instance().as_model_world()
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            world.sample_models(np.array([0.5, 0.5]), "product", rng.spawn(1))
        with pytest.raises(ValueError):
            world.sample_models(np.array([0.5, 0.5]), "joint", rng.spawn(1),
                                at=np.zeros(2))

    def test_samples_are_output_rows(self):
        inst = small_instance()
        world = inst.as_model_world()
        rng = np.random.default_rng(1)
        preds = world.sample_models(np.array([0.5, 0.5]), "joint", rng.spawn(20))
        for row in preds:
            assert any(np.array_equal(row, out) for out in inst.outputs)

    def test_point_mass_component_always_returns_its_row(self):
        inst = small_instance()  # component 0 is a point mass on point 0
        world = inst.as_model_world()
        preds = world.component_models(0, np.random.default_rng(2).spawn(10))
        np.testing.assert_array_equal(preds, np.tile(inst.outputs[0], (10, 1)))

    def test_model_fn_returns_constant_row(self):
        inst = small_instance()
        world = inst.as_model_world()
        fn = world.model_fn(np.array([1.0, 0.0]), "joint", np.random.default_rng(3))
        np.testing.assert_array_equal(fn.evaluate(None), inst.outputs[0])


class TestProp1:
    def test_mixture_strictly_better_than_points(self):
        # two opposite predictors, target zero: each point has loss 1, the
        # even mixture predicts 0 with loss 0
        outputs = np.array([[1.0], [-1.0]])
        inst = DiscreteInstance(outputs, np.eye(2), np.zeros(1), EmpiricalL2())
        rep = verify_prop1(inst)
        assert rep.holds
        assert rep.pointmass_min == pytest.approx(1.0)
        assert rep.mixture_min == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(rep.argmin_alpha, [0.5, 0.5], atol=1e-6)

    @pytest.mark.parametrize("classes", [None, 4])
    def test_holds_on_random_instances(self, classes):
        rng = np.random.default_rng(3)
        for _ in range(6):
            rep = verify_prop1(random_instance(rng, class_count=classes))
            assert rep.holds
            assert rep.mixture_min <= rep.pointmass_min + 1e-6

    def test_linear_loss_gives_equality(self):
        rng = np.random.default_rng(4)
        for _ in range(6):
            pts, m = 4, 3
            inst = DiscreteInstance(rng.standard_normal((pts, m)), np.eye(pts),
                                    np.zeros(m), LinearLoss(rng.standard_normal(m)))
            rep = verify_prop1(inst)
            assert rep.mixture_min == pytest.approx(rep.pointmass_min, abs=1e-9)


class TestLinearCase:
    def test_crafted_support_instance(self):
        rng = np.random.default_rng(5)
        inst, mask = make_linear_support_instance(rng, point_count=6, argmin_size=2,
                                                  gap=1e-3)
        assert mask.sum() == 2
        rep = verify_linear_case(inst, rng)
        assert rep.holds and rep.linear
        assert rep.on_support_gap <= 1e-10
        assert rep.route_gap <= 1e-10
        assert rep.off_support_gap > 1e-4

    def test_vertex_values_exact_on_argmin(self):
        rng = np.random.default_rng(6)
        inst, mask = make_linear_support_instance(rng, point_count=5, argmin_size=3)
        vertex = np.array([exact_loss(inst, np.eye(5)[j]) for j in range(5)])
        low = vertex.min()
        assert np.ptp(vertex[mask]) <= 1e-12
        assert np.all(vertex[~mask] >= low + 1e-3 * 0.99)

    def test_degenerate_all_argmin(self):
        rng = np.random.default_rng(7)
        inst, mask = make_linear_support_instance(rng, point_count=4, argmin_size=4)
        assert mask.all()
        rep = verify_linear_case(inst, rng)
        assert rep.holds
        assert np.isinf(rep.off_support_gap)

    def test_nonlinear_loss_fails_the_precondition(self):
        rep = verify_linear_case(small_instance())
        assert not rep.linear and not rep.holds

    def test_argmin_size_validation(self):
        rng = np.random.default_rng(8)
        with pytest.raises(ValueError):
            make_linear_support_instance(rng, point_count=3, argmin_size=0)
        with pytest.raises(ValueError):
            make_linear_support_instance(rng, point_count=3, argmin_size=4)


class TestConvexity:
    @pytest.mark.parametrize("classes", [None, 3])
    def test_joint_objective_has_no_midpoint_violation(self, classes):
        rng = np.random.default_rng(9)
        for _ in range(5):
            inst = random_instance(rng, class_count=classes)
            probe = convexity_probe(inst, 200, rng)
            assert probe.worst_violation <= 1e-10
            assert probe.trials == 200

    def test_product_mean_is_the_double_contraction(self):
        rng = np.random.default_rng(10)
        table = rng.standard_normal((3, 3, 2))
        alpha = rng.dirichlet(np.ones(3))
        want = sum(alpha[j] * alpha[k] * table[j, k]
                   for j in range(3) for k in range(3))
        np.testing.assert_allclose(product_mean(table, alpha), want, rtol=1e-13)
        with pytest.raises(ValueError):
            product_mean(rng.standard_normal((2, 3)), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            product_mean(table, np.array([0.5, 0.5]))

    def test_pair_demo_closed_form(self):
        # disagreement indicator pair: mean = 2a(1-a), loss its square
        pair_outputs, labels = nonconvex_pair_demo()
        loss = EmpiricalL2()
        for a in (0.0, 0.25, 0.5, 0.9):
            alpha = np.array([1.0 - a, a])
            mean = product_mean(pair_outputs, alpha)
            assert mean[0] == pytest.approx(2.0 * a * (1.0 - a), abs=1e-15)
            assert loss.value(mean, labels) == pytest.approx(
                (2.0 * a * (1.0 - a)) ** 2, abs=1e-15)
        # midpoint of a=0 and a=1/2 bends above the chord
        mid = loss.value(product_mean(pair_outputs, np.array([0.75, 0.25])), labels)
        chord = 0.5 * (0.0 + 0.25)
        assert mid == pytest.approx(0.140625)
        assert mid - chord == pytest.approx(0.015625)

    def test_pair_demo_probe_finds_the_violation(self):
        pair_outputs, labels = nonconvex_pair_demo()
        probe = product_convexity_probe(pair_outputs, labels, EmpiricalL2(), 300,
                                        np.random.default_rng(11))
        assert probe.worst_violation >= 1e-2


class TestMcConsistency:
    def test_engine_estimators_are_unbiased(self):
        rng = np.random.default_rng(12)
        inst = random_instance(rng, n=3, point_count=4, sample_count=5)
        rep = mc_consistency(inst, repeats=600, rng=rng)
        assert rep.holds
        assert rep.repeats == 600
        assert rep.max_ensemble_z <= 3.0 and rep.max_gradient_z <= 3.0

    def test_biased_estimator_is_caught(self):
        rng = np.random.default_rng(13)
        inst = random_instance(rng, n=3, point_count=4, sample_count=5)

        def biased_ensemble(a, r):
            return exact_ensemble(inst, a) + 1.0 + 0.01 * r.standard_normal(
                inst.outputs.shape[1])

        rep = mc_consistency(inst, repeats=100, rng=rng,
                             ensemble_fn=biased_ensemble)
        assert not rep.holds
        assert rep.max_ensemble_z > 3.0

    def test_constant_bias_with_zero_variance_is_infinite_z(self):
        rng = np.random.default_rng(14)
        inst = random_instance(rng, n=2, point_count=3, sample_count=4)
        rep = mc_consistency(inst, repeats=10, rng=rng,
                             gradient_fn=lambda u, a, r: exact_gradient(inst, a) + 0.5)
        assert np.isinf(rep.max_gradient_z)
        exact_rep = mc_consistency(inst, repeats=10, rng=rng,
                                   ensemble_fn=lambda a, r: exact_ensemble(inst, a),
                                   gradient_fn=lambda u, a, r: exact_gradient(inst, a))
        assert exact_rep.holds
        assert exact_rep.max_ensemble_z == 0.0

    def test_repeats_validated(self):
        with pytest.raises(ValueError):
            mc_consistency(small_instance(), repeats=1)


class TestRandomInstance:
    def test_regression_flavor(self):
        inst = random_instance(np.random.default_rng(15))
        assert inst.outputs.ndim == 2
        assert isinstance(inst.loss, EmpiricalL2)
        np.testing.assert_allclose(inst.components.sum(axis=1), 1.0, atol=1e-12)

    def test_classification_flavor(self):
        inst = random_instance(np.random.default_rng(16), class_count=4)
        assert inst.outputs.ndim == 3 and inst.outputs.shape[2] == 4
        assert isinstance(inst.loss, SoftmaxCrossEntropy)
        assert inst.labels.max() < 4

    def test_explicit_sizes(self):
        inst = random_instance(np.random.default_rng(17), n=5, point_count=6,
                               sample_count=7)
        assert inst.n == 5 and inst.point_count == 6 and inst.labels.shape == (7,)


class TestActiveSetProjection:
    def test_agrees_with_sort_threshold(self):
        rng = np.random.default_rng(18)
        for _ in range(60):
            v = rng.standard_normal(int(rng.integers(1, 8))) * 3.0
            np.testing.assert_allclose(project_by_active_sets(v),
                                       project_to_simplex(v).weights, atol=1e-9)

    def test_size_limits(self):
        with pytest.raises(ValueError):
            project_by_active_sets(np.zeros(0))
        with pytest.raises(ValueError):
            project_by_active_sets(np.zeros(21))


class TestInstanceSerialization:
    @pytest.mark.parametrize("kind", ["l2", "xent", "linear"])
    def test_round_trip_bitwise(self, tmp_path, kind):
        rng = np.random.default_rng(19)
        if kind == "l2":
            inst = random_instance(rng, n=3)
        elif kind == "xent":
            inst = random_instance(rng, class_count=3, n=3)
        else:
            inst, _ = make_linear_support_instance(rng)
        path = tmp_path / "inst.txt"
        alpha = rng.dirichlet(np.ones(inst.n))
        save_instance(inst, path, alpha=alpha,
                      expect_ensemble=exact_ensemble(inst, alpha),
                      expect_gradient=exact_gradient(inst, alpha))
        back, extras = load_instance(path)
        np.testing.assert_array_equal(back.outputs, inst.outputs)
        np.testing.assert_array_equal(back.components, inst.components)
        np.testing.assert_array_equal(back.labels, inst.labels)
        assert type(back.loss) is type(inst.loss)
        np.testing.assert_array_equal(extras["alpha"], alpha)
        np.testing.assert_array_equal(extras["expect_ensemble"].ravel(),
                                      exact_ensemble(inst, alpha).ravel())
        np.testing.assert_array_equal(extras["expect_gradient"],
                                      exact_gradient(inst, alpha))
        # exact quantities recomputed from the reload are identical
        np.testing.assert_array_equal(exact_gradient(back, extras["alpha"]),
                                      exact_gradient(inst, alpha))

    def test_integer_labels_stay_integers(self, tmp_path):
        inst = random_instance(np.random.default_rng(20), class_count=2)
        save_instance(inst, tmp_path / "x.txt")
        back, _ = load_instance(tmp_path / "x.txt")
        assert back.labels.dtype.kind == "i"

    def test_linear_weights_reshaped_to_outputs(self, tmp_path):
        rng = np.random.default_rng(21)
        weights = rng.standard_normal((4, 2))
        inst = DiscreteInstance(rng.standard_normal((3, 4, 2)),
                                np.eye(3), np.zeros(4), LinearLoss(weights))
        save_instance(inst, tmp_path / "x.txt")
        back, _ = load_instance(tmp_path / "x.txt")
        assert back.loss.weights.shape == (4, 2)
        np.testing.assert_array_equal(back.loss.weights, weights)

    def test_format_violations_rejected(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("# not an instance\n")
        with pytest.raises(ValueError, match="mixtrain instance v1"):
            load_instance(bad)
        bad.write_text("# mixtrain instance v1\nloss l2\nshape 1 1\n"
                       "component 0 1.0\noutputs 0 0.0\nlabels 0.0\nwhatever 3\n")
        with pytest.raises(ValueError, match="unknown line key"):
            load_instance(bad)
        bad.write_text("# mixtrain instance v1\nloss l2\nshape 2 1\n"
                       "component 0 1.0 0.0\noutputs 0 0.0\nlabels 0.0\n")
        with pytest.raises(ValueError, match="disagree with the declared shape"):
            load_instance(bad)
        bad.write_text("# mixtrain instance v1\nloss warp 3\nshape 1 1\n")
        with pytest.raises(ValueError, match="unknown loss kind"):
            load_instance(bad)
        bad.write_text("# mixtrain instance v1\nloss l2\n")
        with pytest.raises(ValueError, match="incomplete"):
            load_instance(bad)


class TestVerificationSuite:
    def test_all_checks_pass(self):
        checks = verification_suite(seed=0)
        names = [c.name for c in checks]
        assert names == ["projection_oracle", "projection_example", "convexity_l2",
                         "convexity_xent", "prop1_mixture_bound",
                         "prop1_linear_equality", "linear_equality_on_support",
                         "linear_gap_off_support", "gradient_fd", "mc_consistency",
                         "product_nonconvexity", "fixture_regression"]
        for check in checks:
            assert isinstance(check, CheckResult)
            assert check.passed, f"{check.name}: {check.statistic} vs {check.threshold}"

    def test_missing_fixture_fails_cleanly(self):
        check = _check_fixture("does_not_exist.txt")
        assert check.name == "fixture_regression"
        assert not check.passed
        assert np.isinf(check.statistic)

    def test_shipped_fixture_regression(self):
        check = _check_fixture("discrete_instance.txt")
        assert check.passed
        assert check.statistic <= 1e-12

"""Acceptance suite: one test (and one printed verdict line) per criterion.

Stochastic reproduction criteria run the full campaign engine on fixed
seeds; numeric criteria check closed forms against independent oracles at
pinned tolerances. Run with ``pytest tests/test_acceptance.py -s`` to see
the verdict lines as they happen.
"""

import json

import numpy as np

from tadkit.acquisition import (AcquisitionInputs, expected_information_gain,
                                expected_information_gain_with_gradient,
                                tad_acquisition, tad_acquisition_with_gradient)
from tadkit.campaign import run, step
from tadkit.config import CampaignConfig, build_session, default_config
from tadkit.gp import (Dataset, data_predictive,
                       marginal_log_likelihood_and_gradient, predictive_given_1,
                       prediction_update)
from tadkit.kernels import model_to_vector, vector_to_model
from tadkit.optim import gradient_check
from tadkit.persistence import encode_state, load_state, save_state
from tadkit.testbed import (SimulatedOracle, eval_test_function,
                            eval_test_function_batch, mc_expectation_oracle,
                            redundancy_limit_oracle)
from tadkit.validation import batch_validation, chi2_right_tail
from conftest import (joint_conditioning_oracle, random_dataset, random_model,
                      sample_from_model)

_cache = {}


def _verdict(name, ok, detail):
    print(f"ACCEPTANCE [{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _success_config(seed):
    cfg = default_config()
    cfg.seed = seed
    return cfg


def _failure_config(seed):
    cfg = default_config()
    cfg.seed = seed
    cfg.target_design = [-1.0, -1.0]
    cfg.x0 = [2.0, 2.0]
    return cfg


def _run_campaign(cfg, max_iters):
    state, oracle = build_session(cfg)
    run(state, oracle, max_iters)
    return state


def _truth_within_expanded_ttr(state):
    truth = np.array(eval_test_function(state.target_point))
    ub = state.latest_ub()
    allowance = state.spec.tolerance + ub.half_widths
    miss = np.abs(truth - state.spec.target_design)
    return bool(np.all(miss <= allowance)), float(np.max(miss - allowance))


def get_failure_runs():
    if "failure" not in _cache:
        _cache["failure"] = [_run_campaign(_failure_config(seed), 400)
                             for seed in range(5)]
    return _cache["failure"]


class TestSuccessReproduction:
    def test_success_reproduction(self):
        results = []
        for seed in range(10):
            state = _run_campaign(_success_config(seed), 60)
            ok_truth, margin = (True, 0.0)
            if state.outcome == "success":
                ok_truth, margin = _truth_within_expanded_ttr(state)
            results.append((seed, state.outcome, state.iteration,
                            len(state.samples), ok_truth, margin))
        n_success = sum(r[1] == "success" for r in results)
        median_samples = float(np.median([r[3] for r in results]))
        truth_ok = all(r[4] for r in results)
        detail = (f"{n_success}/10 success within 60 iterations, median samples "
                  f"{median_samples:.0f}, worst truth margin "
                  f"{max(r[5] for r in results):+.4f}; per-seed "
                  + str([(r[0], r[1], r[2], r[3]) for r in results]))
        _verdict("convergence/success reproduction",
                 n_success >= 8 and median_samples <= 200 and truth_ok, detail)


class TestFailureReproduction:
    def test_failure_reproduction(self):
        # The printed benchmark equations attain (-1, -1) inside the domain
        # (at (-2.2599, 2.5105) among other points), so a correct targeted
        # search converges on it; see the decisions ledger. The criterion
        # is asserted exactly as specified regardless.
        states = get_failure_runs()
        outcomes = [s.outcome for s in states]
        n_failure = sum(o == "failure" for o in outcomes)
        none_success = all(o != "success" for o in outcomes)
        tails_ok = []
        for s in states:
            if s.outcome == "failure":
                eigs = s.eig_history()[-(s.conv.eig_patience + 1):]
                tails_ok.append(all(e < s.conv.eig_threshold for e in eigs))
        detail = (f"outcomes {outcomes}; "
                  f"{n_failure}/5 failure, none_success={none_success}, "
                  f"low-eig tails ok={all(tails_ok) if tails_ok else 'n/a'}")
        _verdict("convergence/failure reproduction",
                 n_failure >= 4 and none_success and all(tails_ok), detail)


class TestComplexification:
    def test_complexification_mechanics(self):
        states = get_failure_runs()
        any_increase = any(s.n_components > 2 for s in states)
        pairing_ok = True
        for s in states:
            for i, rec in enumerate(s.history):
                if rec.branch == "complexified":
                    if rec.p_value > s.validation_threshold:
                        pairing_ok = False
                    if i == 0 or s.history[i - 1].branch != "alert":
                        pairing_ok = False
                    elif s.history[i - 1].p_value > s.validation_threshold:
                        pairing_ok = False
                    if i >= 2 and s.history[i - 2].branch == "alert":
                        pairing_ok = False  # more than two in a row
        detail = (f"components reached {[s.n_components for s in states]}; "
                  f"every increase preceded by exactly two consecutive "
                  f"sub-threshold p-values: {pairing_ok}")
        _verdict("complexification behavior", any_increase and pairing_ok, detail)


class TestExpectationIdentity:
    def test_monte_carlo_equivalence(self):
        worst_z = 0.0
        for case in range(20):
            r = np.random.default_rng(5000 + case)
            d = int(r.integers(1, 4))
            e = int(r.integers(1, 3))
            n1 = int(r.integers(1, 7))
            n2 = int(r.integers(1, 5))
            model = random_model(r, n_tasks=e, n_dims=d)
            data = random_dataset(r, model, n_points=n1, noise=0.05)
            inputs = AcquisitionInputs(model, data,
                                       r.uniform(-2, 2, size=(n2, d)),
                                       r.uniform(-2, 2, size=d),
                                       r.standard_normal(e),
                                       r.uniform(0.02, 0.1, size=e))
            total = tad_acquisition(inputs).total
            mean, stderr = mc_expectation_oracle(inputs, 100000, rng=r)
            worst_z = max(worst_z, abs(total - mean) / stderr)
        _verdict("expectation-identity Monte-Carlo equivalence", worst_z <= 3.0,
                 f"20 instances, worst |z| = {worst_z:.2f} (limit 3)")


class TestUpdateLemma:
    def test_update_vs_joint_conditioning(self):
        worst = 0.0
        for case in range(50):
            r = np.random.default_rng(6000 + case)
            d = int(r.integers(1, 4))
            e = int(r.integers(1, 4))
            n1 = int(r.integers(1, 7))
            n2 = int(r.integers(1, 5))
            model = random_model(r, n_tasks=e, n_dims=d)
            pts = r.uniform(-2, 2, size=(n1, d))
            data = Dataset(pts, r.standard_normal(n1 * e),
                           np.full(n1 * e, r.uniform(0.02, 0.3)))
            x = r.uniform(-2, 2, size=d)
            batch = r.uniform(-2, 2, size=(n2, d))
            obs = r.standard_normal(n2 * e)
            noise = r.uniform(0.02, 0.3, size=e)
            pred1 = predictive_given_1(model, data, x)
            updated = prediction_update(pred1, model, data, x, batch, obs, noise)
            mean, cov = joint_conditioning_oracle(model, data, x, batch, obs,
                                                  noise)
            worst = max(worst,
                        float(np.max(np.abs(updated.mean - mean))),
                        float(np.max(np.abs(updated.cov - cov))))
        _verdict("prediction-update oracle equivalence", worst <= 1e-9,
                 f"50 instances, max abs deviation {worst:.2e} (limit 1e-9)")


class TestRedundancyLadder:
    def test_noise_ladder(self):
        all_ok = True
        finals = []
        for seed in range(5):
            r = np.random.default_rng(7000 + seed)
            model = random_model(r)
            pts = r.uniform(-2, 2, size=(5, 2))
            data = Dataset(pts, r.standard_normal(10), np.zeros(10))
            rows = redundancy_limit_oracle(
                model, data, r.uniform(-2, 2, size=2),
                r.uniform(-2, 2, size=(2, 2)), [0, 3],
                eps_ladder=(1e-2, 1e-3, 1e-4, 1e-5))
            gaps = [row[1] for row in rows]
            monotone = all(a > b for a, b in zip(gaps, gaps[1:]))
            final_rel = gaps[-1] / rows[-1][2]
            finals.append(final_rel)
            all_ok = all_ok and monotone and final_rel <= 1e-3
        _verdict("redundant-batch noise-free limit", all_ok,
                 f"5 instances monotone, final relative discrepancies "
                 f"{['%.1e' % f for f in finals]} (limit 1e-3)")


class TestEigForms:
    def test_form_equivalence_and_sign(self):
        worst = 0.0
        min_eig = np.inf
        for case in range(100):
            r = np.random.default_rng(8000 + case)
            model = random_model(r)
            data = random_dataset(r, model, n_points=int(r.integers(1, 6)),
                                  noise=0.05)
            inputs = AcquisitionInputs(model, data,
                                       r.uniform(-2, 2, size=(int(r.integers(1, 5)), 2)),
                                       r.uniform(-2, 2, size=2),
                                       r.standard_normal(2),
                                       r.uniform(0.02, 0.1, size=2))
            compact = expected_information_gain(inputs)
            ratio = tad_acquisition(inputs).eig_nats
            worst = max(worst, abs(compact - ratio))
            min_eig = min(min_eig, compact)
        r = np.random.default_rng(8500)
        model = random_model(r)
        data = random_dataset(r, model, n_points=4, noise=0.05)
        empty = AcquisitionInputs(model, data, np.zeros((0, 2)),
                                  r.uniform(-2, 2, size=2),
                                  r.standard_normal(2), np.full(2, 0.05))
        empty_eig = expected_information_gain(empty)
        ok = worst <= 1e-9 and min_eig >= -1e-9 and empty_eig == 0.0
        _verdict("information-gain form equivalence", ok,
                 f"100 instances, max form gap {worst:.2e} (limit 1e-9), "
                 f"min value {min_eig:.2e}, empty batch {empty_eig}")


class TestGradientSuite:
    @staticmethod
    def _well_conditioned(seed_base, count, builder):
        """First ``count`` generated instances whose factorizations are
        comfortably away from singular."""
        picked = []
        seed = seed_base
        while len(picked) < count:
            r = np.random.default_rng(seed)
            seed += 1
            instance = builder(r)
            if instance is not None:
                picked.append(instance)
        return picked

    def test_likelihood_gradients(self):
        def build(r):
            model = random_model(r, n_tasks=2, n_dims=2)
            data = random_dataset(r, model, n_points=int(r.integers(3, 7)),
                                  noise=0.1)

            def objective(vec):
                probe = vector_to_model(vec, 2, 2, 2)
                value, grad, _ = marginal_log_likelihood_and_gradient(probe, data)
                return value, grad

            return objective, model_to_vector(model)

        worst = 0.0
        for objective, point in self._well_conditioned(9000, 20, build):
            worst = max(worst, gradient_check(objective, point))
        _verdict("model-fit gradient suite", worst <= 1e-4,
                 f"20 instances, worst relative error {worst:.2e} (limit 1e-4)")

    def _acquisition_instances(self, seed_base):
        def build(r):
            model = random_model(r, n_tasks=2, n_dims=2)
            data = random_dataset(r, model, n_points=int(r.integers(3, 7)),
                                  noise=0.05)
            n2 = int(r.integers(1, 4))
            inputs = AcquisitionInputs(model, data,
                                       r.uniform(-2, 2, size=(n2, 2)),
                                       r.uniform(-2, 2, size=2),
                                       r.standard_normal(2),
                                       r.uniform(0.03, 0.1, size=2))
            bd = tad_acquisition(inputs)
            # keep instances away from near-singular updated covariances
            eigs = np.linalg.eigvalsh(bd.cov_updated)
            if eigs.min() < 1e-4 * eigs.max():
                return None
            return inputs

        return self._well_conditioned(seed_base, 20, build)

    def test_acquisition_gradients(self):
        worst = 0.0
        for inputs in self._acquisition_instances(9500):
            d = inputs.model.n_dims
            n2 = inputs.batch_points.shape[0]

            def objective(z):
                probe = AcquisitionInputs(inputs.model, inputs.data,
                                          z[d:].reshape(n2, d), z[:d],
                                          inputs.target_design,
                                          inputs.batch_noise)
                bd, grad = tad_acquisition_with_gradient(probe)
                return bd.total, grad

            z0 = np.concatenate([inputs.target_point,
                                 inputs.batch_points.reshape(-1)])
            worst = max(worst, gradient_check(objective, z0))
        _verdict("acquisition gradient suite", worst <= 1e-4,
                 f"20 instances, worst relative error {worst:.2e} (limit 1e-4)")

    def test_information_gain_gradients(self):
        worst = 0.0
        for inputs in self._acquisition_instances(9800):
            d = inputs.model.n_dims
            n2 = inputs.batch_points.shape[0]

            def objective(z):
                probe = AcquisitionInputs(inputs.model, inputs.data,
                                          z[d:].reshape(n2, d), z[:d],
                                          inputs.target_design,
                                          inputs.batch_noise)
                return expected_information_gain_with_gradient(probe)

            z0 = np.concatenate([inputs.target_point,
                                 inputs.batch_points.reshape(-1)])
            worst = max(worst, gradient_check(objective, z0))
        _verdict("information-gain gradient suite", worst <= 1e-4,
                 f"20 instances, worst relative error {worst:.2e} (limit 1e-4)")


class TestValidationCalibration:
    def test_pvalue_uniformity(self):
        from scipy import stats
        r = np.random.default_rng(31)
        model = random_model(r, n_tasks=2, n_dims=2)
        train_pts = r.uniform(-2, 2, size=(5, 2))
        batch_pts = r.uniform(-2, 2, size=(3, 2))
        noise = np.array([0.05, 0.08])
        p_values = []
        n1e = 10
        for _ in range(500):
            stacked = sample_from_model(r, model,
                                        np.vstack([train_pts, batch_pts]), noise)
            data = Dataset(train_pts, stacked[:n1e], np.tile(noise, 5))
            pred = data_predictive(model, data, batch_pts, noise)
            p_values.append(batch_validation(pred, stacked[n1e:]).p_value)
        ks = stats.kstest(p_values, "uniform")
        _verdict("validation calibration", ks.pvalue > 0.01,
                 f"500 replicates, KS statistic {ks.statistic:.4f}, "
                 f"p-value {ks.pvalue:.3f} (level 0.01)")


class TestChi2Tail:
    def test_closed_form_and_monte_carlo(self):
        worst_exact = max(
            abs(chi2_right_tail(float(q), 2) - np.exp(-q / 2.0))
            for q in np.linspace(0.0, 40.0, 801))
        worst_z = 0.0
        r = np.random.default_rng(77)
        n = 10_000_000
        for dof, q in ((1, 1.0), (3, 3.5), (6, 6.0), (8, 9.0)):
            draws = r.chisquare(dof, size=n)
            estimate = float(np.mean(draws > q))
            sigma = np.sqrt(estimate * (1 - estimate) / n)
            worst_z = max(worst_z, abs(chi2_right_tail(q, dof) - estimate) / sigma)
        ok = worst_exact <= 1e-12 and worst_z <= 3.0
        _verdict("chi-squared tail accuracy", ok,
                 f"dof=2 closed-form error {worst_exact:.2e} (limit 1e-12); "
                 f"Monte-Carlo worst |z| = {worst_z:.2f} over dof 1,3,6,8 "
                 f"(limit 3)")


class TestPersistenceReplay:
    def test_bitwise_replay(self, tmp_path):
        # A target far outside the attainable set keeps the campaign
        # running long enough to snapshot at iterations 1, 5 and 10.
        cfg = default_config()
        cfg.seed = 3
        cfg.target_design = [6.0, -6.0]
        cfg.x0 = [2.0, 2.0]
        horizon = 12
        state, oracle = build_session(cfg)
        snapshots = {}
        while state.outcome == "running" and state.iteration < horizon:
            step(state, oracle)
            if state.iteration in (1, 5, 10) and state.iteration not in snapshots:
                path = tmp_path / f"k{state.iteration}.json"
                save_state(state, path, config=cfg, oracle=oracle)
                snapshots[state.iteration] = path
        reference = json.dumps(encode_state(state), sort_keys=True)
        ok = True
        details = []
        for k, path in sorted(snapshots.items()):
            loaded = load_state(path)
            twin = loaded.state
            twin_oracle = SimulatedOracle(eval_test_function_batch, cfg.noise_std)
            twin_oracle.set_rng_state(loaded.oracle_rng_state)
            while twin.outcome == "running" and twin.iteration < horizon:
                step(twin, twin_oracle)
            same = json.dumps(encode_state(twin), sort_keys=True) == reference
            ok = ok and same
            details.append(f"k={k}: {'identical' if same else 'DIVERGED'}")
        _verdict("persistence replay", ok and len(snapshots) == 3,
                 "; ".join(details))


class TestInteractiveEquivalence:
    def test_interactive_run_matches_simulated(self):
        # Supplementary to the dashboard loop criterion: driving the
        # campaign interactively with the simulated twin's measured values
        # reproduces the twin's state exactly.
        from tadkit.campaign import ingest, propose

        cfg = default_config()
        cfg.seed = 9
        twin, oracle = build_session(cfg)
        for _ in range(3):
            step(twin, oracle)

        init_pts = [s.point.tolist() for s in twin.samples
                    if s.stage == "initial_design"]
        init_obs = [s.observation.tolist() for s in twin.samples
                    if s.stage == "initial_design"]
        inter_cfg = CampaignConfig.from_dict(cfg.to_dict() | {
            "oracle_mode": "interactive", "init_points": init_pts,
            "init_observations": init_obs})
        inter, _ = build_session(inter_cfg)

        # initial cluster
        rows = np.array([s.observation for s in twin.samples
                         if s.stage == "initial_batch"])
        ingest(inter, rows)
        for step_index in range(1, twin.step_count + 1):
            propose(inter)
            rows = np.array([s.observation for s in twin.samples
                             if s.stage in (f"step-{step_index}",
                                            f"step-{step_index}-unused")])
            ingest(inter, rows)

        doc_a = encode_state(twin)
        doc_b = encode_state(inter)
        doc_a.pop("oracle_mode")
        doc_b.pop("oracle_mode")
        same = json.dumps(doc_a, sort_keys=True) == json.dumps(doc_b, sort_keys=True)
        _verdict("interactive/simulated state equivalence", same,
                 f"after {twin.step_count} steps (supplementary check)")


class TestFailurePathDemonstration:
    @staticmethod
    def _plane(points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.column_stack([0.5 * (2 * pts[:, 0] + pts[:, 1]),
                                0.5 * (pts[:, 0] - pts[:, 1])])

    def test_unattainable_target_declares_failure(self):
        # Supplementary: the benchmark equations attain the narrative's
        # "unattainable" target (see ledger), so the information-decay
        # stopping rule is demonstrated against a planar response whose
        # range verifiably excludes the target. Demo-scale threshold and
        # patience keep the run short; the rule's mechanics are identical.
        prep = np.random.default_rng(1000)
        init_pts = np.array([1.0, -1.0]) + 0.25 * prep.standard_normal((4, 2))
        init_obs = self._plane(init_pts) + 0.01 * prep.standard_normal((4, 2))
        cfg = default_config()
        cfg.seed = 0
        cfg.target_design = [6.0, -6.0]
        cfg.x0 = [2.0, 2.0]
        cfg.noise_std = [0.01, 0.01]
        cfg.eig_threshold = 0.05
        cfg.eig_patience = 15
        doc = cfg.to_dict()
        doc.update(init_points=init_pts.tolist(),
                   init_observations=init_obs.tolist())
        cfg = CampaignConfig.from_dict(doc)
        state, oracle = build_session(cfg)
        oracle.func = self._plane
        run(state, oracle, 120)
        ok = state.outcome == "failure"
        tail_ok = False
        if ok:
            eigs = state.eig_history()[-(state.conv.eig_patience + 1):]
            tail_ok = all(e < state.conv.eig_threshold for e in eigs)
        _verdict("failure-path demonstration (supplementary)", ok and tail_ok,
                 f"outcome {state.outcome} after {state.iteration} iterations, "
                 f"{len(state.samples)} samples; final "
                 f"{state.conv.eig_patience + 1} information gains below "
                 f"threshold: {tail_ok}")

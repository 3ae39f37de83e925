"""Acceptance suite: one test per release criterion, each printing a
PASS line with the measured value once its assertions hold.

Run with `pytest tests/test_acceptance.py -s` to see the lines.
"""

import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sonomap.agent import (
    FeatureSpace,
    MappingExplorer,
    SimulatedFeedbackOracle,
    replay_log,
    run_exploration,
)
from sonomap.corpus import (
    DESCRIPTOR_NAMES,
    AudioUnit,
    Corpus,
    analyze_unit,
    build_corpus,
    retrieve_knn,
)
from sonomap.features import (
    BandSpec,
    Window,
    bayes_amplitude,
    contraction_index,
    convex_hull_volume,
    fluidity_index,
    mav,
    pqom,
    quantity_of_motion,
    rms,
    tkeo,
    zcr,
)
from sonomap.ingest import gen_synthetic_gesture
from sonomap.models import (
    ClassPosterior,
    MlpRegressor,
    NaiveBayesClassifier,
    dtw_distance,
    gradient_check,
    interpolate_presets,
)
from sonomap.server import create_app
from sonomap.session import create_session

from conftest import burst_buffer, noise_buffer, sine_buffer
from test_cli import run_cli
from test_models_classify import dtw_oracle
from test_session import POSES, PRESETS, pointer_window, iml_session
from test_server import SESSION_CONFIG, drive_full_workflow


def ok(name, detail):
    print(f"[PASS] {name}: {detail}")


def frame_of(points):
    from sonomap.ingest import Marker, MarkerFrame
    return MarkerFrame(0.0, tuple(
        Marker(f"m{i}", tuple(float(v) for v in p)) for i, p in enumerate(points)
    ))


class TestAcceptance:
    def test_feature_correctness_suite(self, cubic_stream):
        square = frame_of([(1, 1, 0), (1, -1, 0), (-1, 1, 0), (-1, -1, 0)])
        ci = contraction_index(square)
        assert ci == pytest.approx(4 * np.sqrt(2), abs=1e-9)

        tetra = frame_of([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)])
        vol = convex_hull_volume(tetra)
        assert vol == pytest.approx(1 / 6, abs=1e-9)

        circle = gen_synthetic_gesture("circle", 100.0, 2.0, freq_hz=1.0,
                                       radius_m=1.0)
        qom = quantity_of_motion(Window.from_stream(circle))
        assert qom == pytest.approx(2 * np.pi, rel=0.02)

        psi = tkeo([0.0, 1.0, 2.0, 3.0])
        assert psi[1] == 1.0 and psi[2] == 1.0

        assert mav([-1, 2, -3]) == 2.0
        assert rms([3.0, 4.0]) == pytest.approx(np.sqrt(12.5), abs=1e-12)
        assert zcr([1, -1, 1, -1]) == 3

        wave = gen_synthetic_gesture("sine", 100.0, 4.0, freq_hz=2.0,
                                     radius_m=0.5)
        bands = pqom(Window.from_stream(wave), BandSpec(120.0))
        share = bands.values[list(bands.names).index("pqom_1")] / bands.values.sum()
        assert share > 0.8

        fi = fluidity_index(Window.from_stream(cubic_stream), epsilon=0.0)
        assert fi == pytest.approx(1 / 6, rel=0.02)

        ok("feature correctness",
           f"CI={ci:.9f}, hull={vol:.9f}, QoM={qom:.4f}, "
           f"PQoM share={share:.3f}, FI={fi:.5f}")

    def test_gradient_check_ten_seeds(self):
        worst = 0.0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            X = rng.uniform(size=(6, 3))
            Y = rng.uniform(size=(6, 2))
            model = MlpRegressor((5,), epochs=0, seed=seed).fit(X, Y)
            worst = max(worst, gradient_check(model, X, Y))
        assert worst < 1e-4
        ok("gradient check", f"max relative error over 10 seeds = {worst:.2e}")

    def test_dtw_oracle_equivalence(self):
        worst = 0.0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            a = rng.uniform(size=(int(rng.integers(1, 7)), 1))
            b = rng.uniform(size=(int(rng.integers(1, 7)), 1))
            cost, _ = dtw_distance(a, b)
            oracle = dtw_oracle(a, b)
            worst = max(worst, abs(cost - oracle))
            assert cost == pytest.approx(oracle, abs=1e-12)
            self_cost, _ = dtw_distance(a, a)
            assert self_cost == 0.0
        ok("dtw oracle equivalence",
           f"100 cases, max |dtw - enumeration| = {worst:.2e}; dtw(x,x)=0")

    def test_bayes_emg_filter(self):
        rng = np.random.default_rng(42)
        estimates = {}
        for sigma in (0.1, 0.3, 0.6):
            x = rng.normal(0.0, sigma, 2000)
            est = bayes_amplitude(x)
            steady = float(np.mean(est[1000:]))
            assert steady == pytest.approx(sigma, abs=0.05)
            estimates[sigma] = steady
        step_rng = np.random.default_rng(7)
        x = np.concatenate([step_rng.normal(0, 0.1, 500),
                            step_rng.normal(0, 0.6, 500)])
        est = bayes_amplitude(x)
        settle = next(i for i in range(500, 1000)
                      if abs(est[i] - 0.6) <= 0.05) - 500
        assert settle <= 100
        ok("bayes emg filter",
           f"steady errors: " +
           ", ".join(f"{s}->{estimates[s]:.3f}" for s in estimates) +
           f"; step settled in {settle} samples")

    def test_cbcs_suite(self):
        assert len(DESCRIPTOR_NAMES) == 19
        assert DESCRIPTOR_NAMES[0] == "duration"
        assert DESCRIPTOR_NAMES[1:3] == ("frequency_mu", "frequency_sigma")
        assert DESCRIPTOR_NAMES[17:] == ("kurtosis_mu", "kurtosis_sigma")

        sine = sine_buffer(440.0, 1.0)
        noise = noise_buffer(1.0, seed=5)
        units = (
            AudioUnit("sine", 0, sine.n_samples,
                      analyze_unit(sine, (0, sine.n_samples))),
            AudioUnit("noise", 0, noise.n_samples,
                      analyze_unit(noise, (0, noise.n_samples))),
        )
        mat = np.array([u.descriptor for u in units])
        corpus = Corpus(units, mat.mean(axis=0),
                        np.maximum(mat.std(axis=0), 1e-9),
                        {"sine": sine, "noise": noise})
        rng = np.random.default_rng(10)
        correct = 0
        for trial in range(50):
            truth = units[trial % 2]
            target = truth.descriptor + 0.1 * corpus.norm_std * rng.normal(size=19)
            hit, _ = retrieve_knn(corpus, target, k=1)[0]
            correct += hit is truth
        assert correct == 50

        big_rng = np.random.default_rng(31)
        descs = big_rng.normal(size=(1000, 19)) * 10 + 50
        big_units = tuple(AudioUnit("s", i, 100, descs[i]) for i in range(1000))
        big = Corpus(big_units, descs.mean(axis=0),
                     np.maximum(descs.std(axis=0), 1e-9), {"s": None})
        for _ in range(10):
            target = big_rng.normal(size=19) * 10 + 50
            z = (descs - big.norm_mean) / big.norm_std
            zt = (target - big.norm_mean) / big.norm_std
            dists = np.sqrt(((z - zt) ** 2).sum(axis=1))
            order = sorted(range(1000), key=lambda i: (dists[i], i))
            hits = retrieve_knn(big, target, k=7)
            assert [u is big_units[i] for (u, _), i in zip(hits, order[:7])] \
                == [True] * 7
            for (_, d), i in zip(hits, order[:7]):
                assert d == pytest.approx(dists[i], abs=1e-9)

        spans = build_corpus([burst_buffer([0.1, 1.2], total_s=1.6)])
        assert len(spans) == 2
        ok("cbcs suite",
           f"descriptor order fixed, 50/50 perturbed retrievals, "
           f"1000-unit scan exact, two-burst -> {len(spans)} units")

    def test_iml_round_trip(self):
        session = iml_session()
        for pose, preset in zip(POSES, PRESETS):
            session.record_example(pointer_window(*pose), preset)
        session.train()
        span = session.model.out_max_ - session.model.out_min_
        span = np.where(span > 0, span, 1.0)
        worst = 0.0
        for pose, preset in zip(POSES, PRESETS):
            result = session.predict(pointer_window(*pose))
            from sonomap.granular import validate_preset
            target = validate_preset(preset).to_vector()
            worst = max(worst, float(np.max(np.abs(result.params - target) / span)))
        assert worst <= 0.05

        # posterior-weighted interpolation stays inside the preset box
        X = np.array(POSES)
        labels = [f"p{i}" for i in range(4)]
        nb = NaiveBayesClassifier().fit(X, labels)
        presets = np.array([validate_preset(p).to_vector() for p in PRESETS])
        rng = np.random.default_rng(3)
        for _ in range(50):
            post = nb.predict_posterior(rng.uniform(0, 1, 2))
            out = interpolate_presets(post, presets)
            assert np.all(out >= presets.min(axis=0) - 1e-9)
            assert np.all(out <= presets.max(axis=0) + 1e-9)
        ok("iml round trip",
           f"4 postures reproduce presets, worst normalised error {worst:.4f}; "
           "interpolation stayed in the preset box")

    def test_incremental_retraining(self):
        session = iml_session()
        for pose, preset in zip(POSES, PRESETS):
            session.record_example(pointer_window(*pose), preset)
        session.train()
        fifth_pose = (0.5, 0.5)
        fifth = dict(start_s=0.1, duration_s=0.7, speed=1.2, pitch_shift=3.0,
                     cutoff_hz=1000.0, resonance_q=1.5)
        session.record_example(pointer_window(*fifth_pose), fifth)
        session.train()
        from sonomap.granular import validate_preset
        span = session.model.out_max_ - session.model.out_min_
        span = np.where(span > 0, span, 1.0)
        worst = 0.0
        for pose, preset in zip(POSES + [fifth_pose], PRESETS + [fifth]):
            result = session.predict(pointer_window(*pose))
            target = validate_preset(preset).to_vector()
            worst = max(worst, float(np.max(np.abs(result.params - target) / span)))
        assert worst <= 0.05
        ok("incremental retraining",
           f"all 5 examples reproduced, worst normalised error {worst:.4f}")

    def test_aiml_convergence_and_replay(self):
        space = FeatureSpace(("x", "y"), ((0.0, 1.0), (0.0, 1.0)))
        ratios = []
        for seed in range(20):
            targets = np.random.default_rng(10000 + 97 * seed).uniform(
                0, 1, (4, 2))
            explorer = MappingExplorer(space, 4, seed=seed, step_size=0.1)
            oracle = SimulatedFeedbackOracle(targets)
            dists = run_exploration(explorer, oracle, 200)
            ratios.append(dists[-1] / dists[0])
            log = [explorer.init_record()] + explorer.history
            assert replay_log(log).state_hash() == explorer.state_hash()
        median = float(np.median(ratios))
        assert median < 0.5
        ok("aiml convergence",
           f"median final/initial distance over 20 seeds = {median:.3f}; "
           "all 20 logs replayed bit-identically")

    def test_protocol_equivalence_and_latency(self, tmp_path):
        app = create_app(store_dir=str(tmp_path / "store"))
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                over_socket = drive_full_workflow(ws)
        session = create_session(SESSION_CONFIG)
        for pose, preset in zip(POSES, PRESETS):
            session.record_example(pointer_window(*pose), preset)
        session.train()
        for pose, socket_params in zip(POSES, over_socket):
            local = session.predict(pointer_window(*pose)).params
            assert np.array_equal(np.array(socket_params), local)

        # latency: 19-dim input through a 3-layer model + 10k-unit retrieval
        rng = np.random.default_rng(0)
        descs = rng.normal(size=(10000, 19)) * 5 + 20
        units = tuple(AudioUnit("s", i, 100, descs[i]) for i in range(10000))
        corpus = Corpus(units, descs.mean(axis=0),
                        np.maximum(descs.std(axis=0), 1e-9), {"s": None})
        live = create_session({"mode": "iml", "synthesis": "corpus",
                               "features": ["pos_xy"], "seed": 0,
                               "epochs": 200})
        live.bind_corpus(corpus)
        model = MlpRegressor((16,), epochs=200, learning_rate=0.5, seed=0)
        Xt = rng.uniform(size=(8, 19))
        Yt = descs[rng.integers(0, 10000, 8)]
        model.fit(Xt, Yt)
        live.model = model
        live.phase = "trained"
        from sonomap.features import FeatureVector
        names = tuple(f"f{i}" for i in range(19))
        queries = [FeatureVector(names, rng.uniform(size=19))
                   for _ in range(1000)]
        times = []
        for fv in queries:
            t0 = time.perf_counter()
            result = live.predict(fv)
            times.append(time.perf_counter() - t0)
            assert result.unit is not None
        median_ms = float(np.median(times)) * 1000.0
        assert median_ms < 5.0
        ok("protocol equivalence + latency",
           f"socket == in-process exactly; predict median {median_ms:.3f} ms "
           "(19-dim, 10k units)")

    def test_cli_determinism(self, capsys, tmp_path):
        from sonomap.ingest import dump_mocap_csv, write_wav
        circle = tmp_path / "circle.csv"
        circle.write_text(dump_mocap_csv(
            gen_synthetic_gesture("circle", 100.0, 2.0, freq_hz=1.0,
                                  radius_m=1.0)))
        wav = tmp_path / "bursts.wav"
        wav.write_bytes(write_wav(burst_buffer([0.1, 1.2], total_s=1.6)))
        dataset = tmp_path / "xor.csv"
        dataset.write_text("x0,x1,y\n0,0,0\n0,1,1\n1,0,1\n1,1,0\n")
        presets = tmp_path / "presets.json"
        presets.write_text(json.dumps([[0.1, 0.2], [0.3, 0.4],
                                       [0.5, 0.6], [0.7, 0.8]]))
        targets = tmp_path / "targets.json"
        targets.write_text(json.dumps([[0.2, 0.8], [0.8, 0.2],
                                       [0.3, 0.3], [0.7, 0.7]]))
        queries = tmp_path / "queries.csv"
        queries.write_text("x0,x1\n0,1\n1,1\n")

        def invocations(tag):
            d = tmp_path / tag
            d.mkdir()
            return [
                ("features", ["features", str(circle), "--feature", "qom,bbox",
                              "--out", str(d / "features.csv")]),
                ("train", ["train", str(dataset), "--inputs", "2",
                           "--model", str(d / "model.json"),
                           "--epochs", "500", "--lr", "0.5", "--seed", "3"]),
                ("predict", ["predict", str(queries),
                             "--model", str(d / "model.json"),
                             "--out", str(d / "pred.csv")]),
                ("corpus-build", ["corpus", "build", str(wav),
                                  "--corpus", str(d / "corpus.json")]),
                ("corpus-query", ["corpus", "query",
                                  "--corpus", str(d / "corpus.json"),
                                  "--target", ",".join(["1.0"] * 19),
                                  "-k", "2"]),
                ("aiml-sim", ["aiml-sim", "--presets", str(presets),
                              "--target", str(targets), "--iterations", "60",
                              "--seed", "4", "--log", str(d / "log.jsonl")]),
                ("replay", ["replay", "--log", str(d / "log.jsonl")]),
            ]

        outputs = {}
        for tag in ("run1", "run2"):
            for name, argv in invocations(tag):
                code, out, err = run_cli(capsys, *argv)
                assert code == 0, f"{name} failed: {err}"
                outputs.setdefault(name, []).append(out)
        for name, (a, b) in outputs.items():
            assert a == b, f"{name} stdout differs between runs"
        for fname in ("features.csv", "model.json", "pred.csv",
                      "corpus.json", "log.jsonl"):
            b1 = (tmp_path / "run1" / fname).read_bytes()
            b2 = (tmp_path / "run2" / fname).read_bytes()
            # corpus.json embeds relative source paths, identical here
            assert b1 == b2, f"{fname} differs between runs"
        ok("cli determinism",
           f"{len(outputs)} subcommands byte-identical across runs")

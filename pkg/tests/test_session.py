import numpy as np
import pytest

from sonomap.corpus import AudioUnit, Corpus
from sonomap.errors import (
    ConfigError,
    InsufficientDataError,
    ProtocolError,
    SchemaError,
)
from sonomap.features import Window
from sonomap.granular import SynthPreset, validate_preset
from sonomap.ingest import FrameStream, Marker, MarkerFrame
from sonomap.session import (
    MappingRecord,
    Session,
    SessionStore,
    create_session,
    load_mapping,
)


def pointer_window(x, y, n=8, rate=60.0, t0=0.0):
    frames = tuple(
        MarkerFrame(t0 + k / rate, (Marker("pointer", (x, y, 0.0)),))
        for k in range(n)
    )
    return Window.from_stream(FrameStream("marker", rate, frames))


POSES = [(0.1, 0.1), (0.9, 0.1), (0.1, 0.9), (0.9, 0.9)]
PRESETS = [
    dict(start_s=0.0, duration_s=0.5, speed=1.0, pitch_shift=0.0,
         cutoff_hz=400.0, resonance_q=0.8),
    dict(start_s=0.5, duration_s=1.0, speed=1.5, pitch_shift=7.0,
         cutoff_hz=2000.0, resonance_q=2.0),
    dict(start_s=1.0, duration_s=0.8, speed=0.8, pitch_shift=-5.0,
         cutoff_hz=8000.0, resonance_q=1.0),
    dict(start_s=0.2, duration_s=1.5, speed=2.0, pitch_shift=12.0,
         cutoff_hz=12000.0, resonance_q=4.0),
]


def iml_session(**over):
    cfg = {"mode": "iml", "features": ["pos_xy"], "window": 8, "hop": 4,
           "seed": 0}
    cfg.update(over)
    return create_session(cfg)


def aiml_session(**over):
    cfg = {"mode": "aiml", "presets": PRESETS, "seed": 0}
    cfg.update(over)
    return create_session(cfg)


def record_poses(session, poses=POSES, presets=PRESETS):
    for pose, preset in zip(poses, presets):
        session.record_example(pointer_window(*pose), preset)


class TestCreate:
    def test_default_is_iml_granular(self):
        s = create_session()
        assert s.mode == "iml"
        assert s.synthesis == "granular"
        assert s.phase == "idle"

    def test_aiml_with_four_presets(self):
        s = aiml_session()
        assert s.agent is not None
        assert s.agent.n_presets == 4

    def test_unknown_feature_named(self):
        with pytest.raises(ConfigError, match="wobble"):
            create_session({"features": ["wobble"]})

    def test_aiml_needs_presets(self):
        with pytest.raises(ConfigError):
            create_session({"mode": "aiml"})


class TestRecordTrain:
    def test_four_postures(self):
        s = iml_session()
        record_poses(s)
        assert len(s.examples) == 4
        assert s.phase == "recording"

    def test_record_in_aiml_is_protocol_error(self):
        s = aiml_session()
        with pytest.raises(ProtocolError):
            s.record_example(pointer_window(0.5, 0.5), PRESETS[0])

    def test_dimension_consistency(self):
        s = iml_session()
        s.record_example(pointer_window(0.1, 0.1), PRESETS[0])
        with pytest.raises(SchemaError):
            s.record_example(pointer_window(0.2, 0.2), [1.0, 2.0])

    def test_training_needs_two(self):
        s = iml_session()
        s.record_example(pointer_window(0.1, 0.1), PRESETS[0])
        with pytest.raises(InsufficientDataError):
            s.train()

    def test_four_pose_fit(self):
        s = iml_session()
        record_poses(s)
        losses = s.train()
        assert losses[-1] < 1e-2
        assert s.phase == "trained"

    def test_incremental_fifth_example(self):
        s = iml_session()
        record_poses(s)
        s.train()
        fifth_pose = (0.5, 0.5)
        fifth_preset = dict(start_s=0.1, duration_s=0.7, speed=1.2,
                            pitch_shift=3.0, cutoff_hz=1000.0,
                            resonance_q=1.5)
        s.record_example(pointer_window(*fifth_pose), fifth_preset)
        s.train()
        poses = POSES + [fifth_pose]
        presets = PRESETS + [fifth_preset]
        for pose, preset in zip(poses, presets):
            result = s.predict(pointer_window(*pose))
            target = validate_preset(preset).to_vector()
            span = s.model.out_max_ - s.model.out_min_
            span = np.where(span > 0, span, 1.0)
            assert np.all(np.abs(result.params - target) / span <= 0.05)


class TestPredict:
    def test_training_pose_reproduces_preset(self):
        s = iml_session()
        record_poses(s)
        s.train()
        span = s.model.out_max_ - s.model.out_min_
        span = np.where(span > 0, span, 1.0)
        for pose, preset in zip(POSES, PRESETS):
            result = s.predict(pointer_window(*pose))
            target = validate_preset(preset).to_vector()
            assert np.all(np.abs(result.params - target) / span <= 0.05)

    def test_output_always_valid_preset(self):
        s = iml_session()
        record_poses(s)
        s.train()
        rng = np.random.default_rng(0)
        for _ in range(25):
            x, y = rng.uniform(-0.5, 1.5, 2)  # deliberately out of range
            result = s.predict(pointer_window(float(x), float(y)))
            assert validate_preset(result.preset) is result.preset

    def test_untrained_predict_rejected(self):
        s = iml_session()
        with pytest.raises(ProtocolError):
            s.predict(pointer_window(0.5, 0.5))

    def test_corpus_target_exact_unit(self):
        rng = np.random.default_rng(2)
        descs = rng.normal(size=(3, 19)) * 5 + 10
        units = tuple(AudioUnit("s", i * 100, 100, descs[i]) for i in range(3))
        corpus = Corpus(units, descs.mean(axis=0),
                        np.maximum(descs.std(axis=0), 1e-9), {"s": None})
        s = iml_session(synthesis="corpus")
        s.bind_corpus(corpus)
        poses = POSES[:3]
        for pose, desc in zip(poses, descs):
            s.record_example(pointer_window(*pose), desc)
        s.train()
        for pose, unit in zip(poses, units):
            result = s.predict(pointer_window(*pose))
            assert result.unit is unit


class TestAimlStep:
    def test_propose_trains_model_on_proposal(self):
        s = aiml_session()
        proposal = s.aiml_step("propose")
        assert s.model is not None
        assert s.phase == "trained"
        Y = proposal.presets
        span = np.where(Y.max(axis=0) > Y.min(axis=0),
                        Y.max(axis=0) - Y.min(axis=0), 1.0)
        for x, y in zip(proposal.points, Y):
            pred = s.model.predict(x)
            assert np.all(np.abs(pred - y) / span <= 0.05)

    def test_guiding_before_propose_rejected(self):
        s = aiml_session()
        with pytest.raises(ProtocolError, match="propose"):
            s.aiml_step("guiding", 1)

    def test_guiding_and_zone_flow(self):
        s = aiml_session()
        s.aiml_step("propose")
        s.aiml_step("guiding", 1)
        s.aiml_step("guiding", -1)
        s.aiml_step("zone")
        s.aiml_step("propose")
        assert s.agent.proposal_count == 2

    def test_no_user_data_in_aiml_training(self):
        s = aiml_session()
        proposal = s.aiml_step("propose")
        assert len(s.examples) == 0
        assert np.array_equal(
            np.array([e for e in proposal.points]), proposal.points)


class TestStateMachine:
    def legal_map(self, session):
        from sonomap.session import _LEGAL
        return _LEGAL[(session.mode, session.phase)]

    def assert_illegal(self, session, action, *args):
        with pytest.raises(ProtocolError) as err:
            if action == "record":
                session.record_example(pointer_window(0.1, 0.1), PRESETS[0])
            elif action == "train":
                session.train()
            elif action == "predict":
                session.predict(pointer_window(0.1, 0.1))
            elif action == "save":
                session.save_mapping()
            else:
                session.aiml_step(action, *args)
        for legal in self.legal_map(session):
            assert legal in str(err.value)

    def test_iml_idle(self):
        s = iml_session()
        for action in ("train", "predict", "save"):
            self.assert_illegal(s, action)

    def test_iml_recording(self):
        s = iml_session()
        s.record_example(pointer_window(0.1, 0.1), PRESETS[0])
        for action in ("predict", "save"):
            self.assert_illegal(s, action)

    def test_aiml_idle(self):
        s = aiml_session()
        for action in ("guiding", "zone", "save"):
            args = (1,) if action == "guiding" else ()
            self.assert_illegal(s, action, *args)

    def test_phases_progress(self):
        s = iml_session()
        assert s.phase == "idle"
        record_poses(s)
        assert s.phase == "recording"
        s.train()
        assert s.phase == "trained"
        s.predict(pointer_window(0.2, 0.2))
        assert s.phase == "running"


class TestPersistence:
    def test_save_load_identical_predictions(self):
        s = iml_session()
        record_poses(s)
        s.train()
        record = s.save_mapping()
        again = load_mapping(record)
        rng = np.random.default_rng(8)
        for _ in range(100):
            x, y = rng.uniform(0, 1, 2)
            w = pointer_window(float(x), float(y))
            assert np.array_equal(s.predict(w).params, again.predict(w).params)

    def test_provenance(self):
        s = aiml_session()
        s.aiml_step("propose")
        record = s.save_mapping()
        assert record.provenance == "aiml"
        assert record.agent_history

    def test_version_mismatch(self):
        s = iml_session()
        record_poses(s)
        s.train()
        doc = s.save_mapping().to_json_dict()
        doc["version"] = 99
        with pytest.raises(SchemaError, match="version"):
            MappingRecord.from_json_dict(doc)

    def test_store_round_trip(self, tmp_path):
        s = iml_session()
        record_poses(s)
        s.train()
        record = s.save_mapping()
        store = SessionStore(str(tmp_path / "maps"))
        store.save(record)
        assert [e["id"] for e in store.list()] == [record.id]
        loaded = store.load(record.id)
        assert loaded.model_json == record.model_json

    def test_untrained_save_rejected(self):
        s = iml_session()
        with pytest.raises(ProtocolError):
            s.save_mapping()

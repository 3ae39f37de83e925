"""Workflow orchestration: example-driven mapping sessions, agent-assisted
sessions, and mapping persistence.

A session moves through idle -> recording/proposing -> trained -> running;
illegal actions raise a ProtocolError naming what is currently legal. In
assisted mode the training inputs come exclusively from the explorer's
proposals - recording user gestures is a protocol error there.
"""

import datetime
import json
import os
import uuid
from dataclasses import dataclass, field

import numpy as np

from .agent import FeatureSpace, MappingExplorer, build_training_set
from .corpus import N_DESCRIPTORS, retrieve_knn
from .errors import (
    ConfigError,
    InsufficientDataError,
    ProtocolError,
    SchemaError,
)
from .features import FeatureExtractor, Window
from .granular import PARAM_FIELDS, SynthPreset, validate_preset
from .models import MlpRegressor

RECORD_FORMAT = "sonomap-mapping"
RECORD_VERSION = 1

_LEGAL = {
    ("iml", "idle"): ("record",),
    ("iml", "recording"): ("record", "train"),
    ("iml", "trained"): ("record", "train", "predict", "save"),
    ("iml", "running"): ("record", "train", "predict", "save"),
    ("aiml", "idle"): ("propose",),
    ("aiml", "trained"): ("propose", "guiding", "zone", "predict", "save"),
    ("aiml", "running"): ("propose", "guiding", "zone", "predict", "save"),
}


def default_config():
    return {
        "mode": "iml",
        "synthesis": "granular",
        "features": ["pos_xy"],
        "window": 8,
        "hop": 4,
        "hidden_layer_sizes": [16],
        "epochs": 8000,
        "learning_rate": 1.0,
        "seed": 0,
        "step_size": 0.1,
        "space": None,  # aiml only; defaults to unit square on pos_x/pos_y
        "presets": None,
    }


def _preset_vectors(raw, synthesis):
    """Normalise configured presets to parameter vectors."""
    vectors = []
    presets = []
    for item in raw:
        if isinstance(item, dict):
            preset = validate_preset(item)
            presets.append(preset)
            vectors.append(preset.to_vector())
        elif isinstance(item, SynthPreset):
            presets.append(validate_preset(item))
            vectors.append(item.to_vector())
        else:
            vec = np.asarray(item, dtype=float).reshape(-1)
            expected = N_DESCRIPTORS if synthesis == "corpus" else len(PARAM_FIELDS)
            if len(vec) != expected:
                raise SchemaError(
                    f"preset vector has {len(vec)} values, expected {expected} "
                    f"for {synthesis} synthesis"
                )
            presets.append(None)
            vectors.append(vec)
    return presets, np.array(vectors) if vectors else None


@dataclass
class PredictResult:
    params: np.ndarray
    preset: SynthPreset = None
    unit: object = None
    features: object = None


class Session:
    def __init__(self, config=None):
        cfg = default_config()
        cfg.update(config or {})
        if cfg["mode"] not in ("iml", "aiml"):
            raise ConfigError(f"mode must be iml or aiml, got {cfg['mode']!r}")
        if cfg["synthesis"] not in ("granular", "corpus"):
            raise ConfigError(
                f"synthesis must be granular or corpus, got {cfg['synthesis']!r}"
            )
        self.id = cfg.get("id") or uuid.uuid4().hex[:12]
        self.mode = cfg["mode"]
        self.synthesis = cfg["synthesis"]
        self.config = cfg
        self.extractor = FeatureExtractor(
            features=tuple(cfg["features"]), window=cfg["window"], hop=cfg["hop"]
        ).fit()
        self.seed = cfg["seed"]
        self.model = None
        self.examples = []  # (feature values, target vector)
        self.presets = []
        self.preset_vectors = None
        self.corpus = None
        self.agent = None
        self.phase = "idle"
        if cfg["presets"]:
            self.presets, self.preset_vectors = _preset_vectors(
                cfg["presets"], self.synthesis
            )
        if cfg.get("corpus_path"):
            from .corpus import load_corpus
            self.corpus = load_corpus(cfg["corpus_path"])
        if self.mode == "aiml":
            if self.preset_vectors is None or len(self.preset_vectors) < 2:
                raise ConfigError("aiml mode needs at least 2 presets")
            space_cfg = cfg.get("space")
            if space_cfg:
                space = FeatureSpace(tuple(space_cfg["dims"]),
                                     tuple(tuple(b) for b in space_cfg["bounds"]))
            else:
                space = FeatureSpace(("pos_x", "pos_y"), ((0.0, 1.0), (0.0, 1.0)))
            self.space = space
            self.agent = MappingExplorer(
                space, len(self.preset_vectors), cfg["seed"],
                cfg["step_size"], self.preset_vectors,
            )

    # -- protocol ----------------------------------------------------------

    def _check(self, action):
        legal = _LEGAL[(self.mode, self.phase)]
        if action not in legal:
            raise ProtocolError(
                f"{action!r} is not legal in {self.mode}/{self.phase}; "
                f"legal actions: {', '.join(legal)}",
                legal_actions=legal,
            )

    def bind_corpus(self, corpus):
        self.corpus = corpus

    # -- example-driven workflow --------------------------------------------

    def record_example(self, window, target):
        if self.mode == "aiml":
            raise ProtocolError(
                "recording gesture examples is not part of the aiml workflow; "
                "legal actions: " + ", ".join(_LEGAL[("aiml", self.phase)]),
                legal_actions=_LEGAL[("aiml", self.phase)],
            )
        self._check("record")
        fv = self.extractor.extract(window)
        if isinstance(target, SynthPreset):
            target_vec = validate_preset(target).to_vector()
        elif isinstance(target, dict):
            target_vec = validate_preset(target).to_vector()
        else:
            target_vec = np.asarray(target, dtype=float).reshape(-1)
        if self.examples:
            d_in, d_out = len(self.examples[0][0]), len(self.examples[0][1])
            if len(fv.values) != d_in or len(target_vec) != d_out:
                raise SchemaError(
                    f"example dimensions ({len(fv.values)}, {len(target_vec)}) "
                    f"do not match earlier examples ({d_in}, {d_out})"
                )
        self.examples.append((fv.values, target_vec))
        if self.phase == "idle":
            self.phase = "recording"
        return fv

    def train(self, hyperparams=None):
        self._check("train")
        hp = dict(hyperparams or {})
        if len(self.examples) < 2:
            raise InsufficientDataError(
                f"training needs at least 2 examples, have {len(self.examples)}"
            )
        X = np.array([e[0] for e in self.examples])
        Y = np.array([e[1] for e in self.examples])
        self.model = MlpRegressor(
            hidden_layer_sizes=tuple(hp.get("hidden_layer_sizes",
                                            self.config["hidden_layer_sizes"])),
            epochs=int(hp.get("epochs", self.config["epochs"])),
            learning_rate=float(hp.get("learning_rate",
                                       self.config["learning_rate"])),
            seed=int(hp.get("seed", self.seed)),
        ).fit(X, Y)
        self.phase = "trained"
        return list(self.model.loss_curve_)

    def predict(self, window_or_features):
        self._check("predict")
        if isinstance(window_or_features, Window):
            fv = self.extractor.extract(window_or_features)
            values = fv.values
        else:
            fv = window_or_features
            values = np.asarray(
                getattr(fv, "values", window_or_features), dtype=float
            ).reshape(-1)
        raw = self.model.predict(values)
        self.phase = "running"
        if self.synthesis == "granular":
            preset = SynthPreset.from_vector(raw, clamp=True)
            return PredictResult(preset.to_vector(), preset=preset, features=fv)
        result = PredictResult(raw, features=fv)
        if self.corpus is not None and len(self.corpus) > 0:
            unit, _ = retrieve_knn(self.corpus, raw, k=1)[0]
            result.unit = unit
        return result

    # -- assisted workflow ---------------------------------------------------

    def aiml_step(self, action, sign=None):
        if self.mode != "aiml":
            raise ProtocolError(
                f"{action!r} requires an aiml session; legal actions: "
                + ", ".join(_LEGAL[(self.mode, self.phase)]),
                legal_actions=_LEGAL[(self.mode, self.phase)],
            )
        if action == "propose":
            self._check("propose")
            proposal = self.agent.propose()
            X, Y = build_training_set(proposal)
            self.model = MlpRegressor(
                hidden_layer_sizes=tuple(self.config["hidden_layer_sizes"]),
                epochs=int(self.config["epochs"]),
                learning_rate=float(self.config["learning_rate"]),
                seed=self.seed,
            ).fit(X, Y)
            self.phase = "trained"
            return proposal
        if action == "guiding":
            self._check("guiding")
            self.agent.guiding(sign)
            return None
        if action == "zone":
            self._check("zone")
            self.agent.zone()
            return None
        if action == "save":
            self._check("save")
            return self.save_mapping()
        raise ProtocolError(
            f"unknown aiml action {action!r}",
            legal_actions=_LEGAL[(self.mode, self.phase)],
        )

    # -- persistence ----------------------------------------------------------

    def save_mapping(self):
        self._check("save")
        return MappingRecord(
            id=uuid.uuid4().hex[:12],
            created_at=datetime.datetime.now(datetime.timezone.utc).isoformat(),
            provenance=self.mode,
            config={k: self.config[k] for k in
                    ("features", "window", "hop", "synthesis",
                     "hidden_layer_sizes", "epochs", "learning_rate", "seed")},
            model_json=self.model.to_json(),
            preset_vectors=(None if self.preset_vectors is None
                            else self.preset_vectors.tolist()),
            agent_history=(list(self.agent.history) if self.agent else None),
        )


@dataclass(frozen=True)
class MappingRecord:
    id: str
    created_at: str
    provenance: str
    config: dict
    model_json: str
    preset_vectors: list = None
    agent_history: list = field(default=None, repr=False)

    def to_json_dict(self):
        return {
            "format": RECORD_FORMAT,
            "version": RECORD_VERSION,
            "id": self.id,
            "created_at": self.created_at,
            "provenance": self.provenance,
            "config": self.config,
            "model": self.model_json,
            "preset_vectors": self.preset_vectors,
            "agent_history": self.agent_history,
        }

    @classmethod
    def from_json_dict(cls, doc):
        if doc.get("format") != RECORD_FORMAT:
            raise SchemaError(f"not a {RECORD_FORMAT} document")
        if doc.get("version") != RECORD_VERSION:
            raise SchemaError(
                f"mapping record version {doc.get('version')} unsupported "
                f"(expected {RECORD_VERSION})"
            )
        return cls(
            id=doc["id"],
            created_at=doc["created_at"],
            provenance=doc["provenance"],
            config=doc["config"],
            model_json=doc["model"],
            preset_vectors=doc.get("preset_vectors"),
            agent_history=doc.get("agent_history"),
        )


def create_session(config=None):
    return Session(config)


def load_mapping(record):
    """Rebuild a runnable session from a saved mapping record."""
    cfg = dict(record.config)
    cfg["mode"] = "iml"  # loaded mappings run; provenance is kept on the record
    cfg["presets"] = None
    session = Session(cfg)
    session.model = MlpRegressor.from_json(record.model_json)
    if record.preset_vectors is not None:
        session.preset_vectors = np.array(record.preset_vectors, dtype=float)
    session.phase = "trained"
    session.provenance = record.provenance
    return session


class SessionStore:
    """Flat JSON files in a directory plus an index file."""

    def __init__(self, root):
        self.root = root
        os.makedirs(root, exist_ok=True)
        self.index_path = os.path.join(root, "index.json")

    def _read_index(self):
        if not os.path.exists(self.index_path):
            return []
        with open(self.index_path, "r", encoding="utf-8") as f:
            return json.load(f)

    def save(self, record):
        path = os.path.join(self.root, f"{record.id}.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(record.to_json_dict(), f, sort_keys=True, indent=0)
            f.write("\n")
        index = [e for e in self._read_index() if e["id"] != record.id]
        index.append({"id": record.id, "created_at": record.created_at,
                      "provenance": record.provenance})
        index.sort(key=lambda e: e["created_at"])
        with open(self.index_path, "w", encoding="utf-8") as f:
            json.dump(index, f, sort_keys=True, indent=0)
            f.write("\n")
        return path

    def load(self, record_id):
        path = os.path.join(self.root, f"{record_id}.json")
        if not os.path.exists(path):
            raise SchemaError(f"no mapping record {record_id!r}")
        with open(path, "r", encoding="utf-8") as f:
            return MappingRecord.from_json_dict(json.load(f))

    def list(self):
        return self._read_index()

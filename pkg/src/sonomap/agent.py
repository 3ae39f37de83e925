"""Mapping explorer steered by human feedback.

The explorer proposes points in gesture-feature space to pair with sound
presets. It walks the product space (one point per preset slot) along a
shared direction with a feedback-modulated step size: positive guiding
feedback keeps the direction and grows the step, negative feedback
reflects the direction and shrinks it, and negative zone feedback
teleports the whole mapping to a distant region. A directional random
walk satisfies every behavioural requirement here while staying fully
inspectable; the propose/guiding/zone boundary leaves room to swap in a
learned value-function agent later.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParameterError, ProtocolError, SchemaError

STEP_MIN = 0.01
STEP_MAX = 0.5
STEP_GROW = 1.1
STEP_SHRINK = 0.9
ZONE_DISPLACEMENT = 0.25  # fraction of the bounds diagonal
ZONE_MAX_ATTEMPTS = 1000
JITTER_FRACTION = 0.25  # jitter sigma = step * diagonal * this


@dataclass(frozen=True)
class FeatureSpace:
    dims: tuple
    bounds: tuple  # ((lo, hi), ...) per dimension

    def __post_init__(self):
        if len(self.dims) < 1 or len(self.dims) != len(self.bounds):
            raise ConfigError("feature space needs one (lo, hi) bound per dimension")
        for name, (lo, hi) in zip(self.dims, self.bounds):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ConfigError(f"bad bounds for {name!r}: ({lo}, {hi})")
        object.__setattr__(self, "dims", tuple(self.dims))
        object.__setattr__(self, "bounds", tuple((float(a), float(b))
                                                 for a, b in self.bounds))

    @property
    def n_dims(self):
        return len(self.dims)

    def lo(self):
        return np.array([b[0] for b in self.bounds])

    def hi(self):
        return np.array([b[1] for b in self.bounds])

    def diagonal(self):
        return float(np.linalg.norm(self.hi() - self.lo()))


@dataclass(frozen=True)
class MappingProposal:
    id: int
    points: np.ndarray = field(repr=False)  # (n_presets, n_dims)
    presets: np.ndarray = field(default=None, repr=False)  # (n_presets, d_out)


def build_training_set(proposal):
    """Proposal points become inputs, paired presets become targets.

    By construction no user-recorded gesture data can enter this set; the
    explorer itself supplies every input row.
    """
    if proposal.presets is None:
        raise SchemaError("proposal carries no preset parameter vectors")
    X = np.array(proposal.points, dtype=float)
    Y = np.array(proposal.presets, dtype=float)
    if len(X) != len(Y):
        raise SchemaError("one preset vector required per proposal point")
    return X, Y


class MappingExplorer:
    """Value-semantics explorer; one logical owner advances it by calls."""

    def __init__(self, space, n_presets, seed, step_size=0.1, presets=None):
        if n_presets < 2:
            raise ParameterError(f"n_presets must be >= 2, got {n_presets}")
        if not 0.0 <= step_size <= STEP_MAX:
            raise ParameterError(f"step_size {step_size:g} outside (0, {STEP_MAX}]")
        self.space = space
        self.n_presets = n_presets
        self.seed = seed
        self.initial_step = float(step_size)
        self.step_size = float(step_size)
        self.presets = None if presets is None else np.array(presets, dtype=float)
        if self.presets is not None and len(self.presets) != n_presets:
            raise SchemaError(f"{len(self.presets)} preset vectors for {n_presets} slots")
        self.rng = np.random.default_rng(seed)
        lo, hi = space.lo(), space.hi()
        self.positions = self.rng.uniform(lo, hi, size=(n_presets, space.n_dims))
        self.direction = self._random_unit()
        self.proposal_count = 0
        self.history = []

    # -- internals ---------------------------------------------------------

    def _random_unit(self):
        v = self.rng.normal(size=self.n_presets * self.space.n_dims)
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            v = np.ones_like(v)
            norm = np.linalg.norm(v)
        return v / norm

    def _clamp(self, points):
        return np.clip(points, self.space.lo(), self.space.hi())

    def _require_proposal(self, action):
        if self.proposal_count == 0:
            raise ProtocolError(
                f"{action} before any proposal", legal_actions=("propose",)
            )

    # -- the three moves ---------------------------------------------------

    def propose(self):
        """Advance along the current direction (plus jitter) and emit the
        new mapping proposal."""
        diag = self.space.diagonal()
        step_vec = (self.step_size * diag *
                    self.direction.reshape(self.n_presets, -1))
        # sigma scales the jitter vector's norm; spread it over coordinates
        sigma = (self.step_size * diag * JITTER_FRACTION /
                 math.sqrt(self.positions.size))
        jitter = self.rng.normal(0.0, 1.0, size=self.positions.shape) * sigma
        self.positions = self._clamp(self.positions + step_vec + jitter)
        self.proposal_count += 1
        proposal = MappingProposal(self.proposal_count, self.positions.copy(),
                                   None if self.presets is None else self.presets.copy())
        self.history.append({"event": "proposal", "id": proposal.id,
                             "points": proposal.points.tolist()})
        return proposal

    def guiding(self, sign):
        """Binary evaluation of the exploration direction."""
        if sign not in (1, -1):
            raise ParameterError(f"guiding sign must be +1 or -1, got {sign!r}")
        self._require_proposal("guiding feedback")
        if sign == 1:
            self.step_size = min(self.step_size * STEP_GROW, STEP_MAX)
        else:
            reflected = -self.direction
            r = self.rng.normal(size=reflected.shape)
            r -= np.dot(r, reflected) * reflected
            r_norm = np.linalg.norm(r)
            theta = self.rng.uniform(0.0, math.pi / 2.0)
            if r_norm > 1e-12:
                self.direction = (math.cos(theta) * reflected +
                                  math.sin(theta) * r / r_norm)
            else:
                self.direction = reflected
            self.direction /= np.linalg.norm(self.direction)
            self.step_size = max(self.step_size * STEP_SHRINK, STEP_MIN)
        self.history.append({"event": "guiding", "sign": int(sign)})

    def zone(self):
        """Negative zone feedback: teleport every point to a region at
        least ZONE_DISPLACEMENT x diagonal away from its current spot."""
        self._require_proposal("zone feedback")
        lo, hi = self.space.lo(), self.space.hi()
        min_dist = ZONE_DISPLACEMENT * self.space.diagonal()
        best = None
        best_score = -1.0
        for _ in range(ZONE_MAX_ATTEMPTS):
            candidate = self.rng.uniform(lo, hi, size=self.positions.shape)
            score = float(np.min(np.linalg.norm(candidate - self.positions, axis=1)))
            if score > best_score:
                best, best_score = candidate, score
            if score >= min_dist:
                break
        self.positions = best
        self.direction = self._random_unit()
        self.step_size = self.initial_step
        self.history.append({"event": "zone"})

    # -- reproducibility ---------------------------------------------------

    def state_hash(self):
        doc = {
            "positions": self.positions.tolist(),
            "direction": self.direction.tolist(),
            "step_size": self.step_size,
            "proposal_count": self.proposal_count,
        }
        return hashlib.sha256(
            json.dumps(doc, sort_keys=True).encode("utf-8")
        ).hexdigest()

    def init_record(self):
        return {
            "event": "init",
            "dims": list(self.space.dims),
            "bounds": [list(b) for b in self.space.bounds],
            "n_presets": self.n_presets,
            "seed": self.seed,
            "step_size": self.initial_step,
            "presets": None if self.presets is None else self.presets.tolist(),
        }


def replay_log(events):
    """Rebuild an explorer from a history log, verifying every proposal.

    The first event must be the init record; proposal events are checked
    bit-identical against the re-derived points.
    """
    if not events or events[0].get("event") != "init":
        raise SchemaError("history log must start with an init event")
    head = events[0]
    space = FeatureSpace(tuple(head["dims"]),
                         tuple(tuple(b) for b in head["bounds"]))
    explorer = MappingExplorer(space, head["n_presets"], head["seed"],
                               head["step_size"], head.get("presets"))
    for i, event in enumerate(events[1:], start=2):
        kind = event.get("event")
        if kind == "proposal":
            proposal = explorer.propose()
            logged = np.array(event["points"], dtype=float)
            if proposal.points.shape != logged.shape or not np.array_equal(
                    proposal.points, logged):
                raise SchemaError(f"replay diverged at log entry {i}")
        elif kind == "guiding":
            explorer.guiding(int(event["sign"]))
        elif kind == "zone":
            explorer.zone()
        else:
            raise SchemaError(f"unknown history event {kind!r} at entry {i}")
    return explorer


class SimulatedFeedbackOracle:
    """Stands in for the human: +1 when the mean distance between proposal
    points and the hidden targets decreased vs the previous proposal, -1
    otherwise, and zone feedback after 10 consecutive non-improvements.

    `threshold` is relative: a decrease only counts when it exceeds
    threshold x the previous distance, which keeps aimless dithering from
    registering as progress.
    """

    def __init__(self, target_points, threshold=0.01, patience=10):
        if threshold < 0:
            raise ParameterError("threshold must be >= 0")
        self.targets = np.array(target_points, dtype=float)
        self.threshold = float(threshold)
        self.patience = patience
        self.previous = math.inf
        self.stalls = 0

    def mean_distance(self, proposal):
        return float(np.mean(
            np.linalg.norm(proposal.points - self.targets, axis=1)
        ))

    def __call__(self, proposal):
        dist = self.mean_distance(proposal)
        improved = dist < self.previous * (1.0 - self.threshold)
        self.previous = dist
        if improved:
            self.stalls = 0
            return 1
        self.stalls += 1
        if self.stalls >= self.patience:
            self.stalls = 0
            return "zone"
        return -1


def run_exploration(explorer, oracle, iterations):
    """Drive the propose/feedback loop; per-iteration mean distances."""
    distances = []
    for _ in range(iterations):
        proposal = explorer.propose()
        distances.append(oracle.mean_distance(proposal))
        feedback = oracle(proposal)
        if feedback == "zone":
            explorer.zone()
        else:
            explorer.guiding(feedback)
    return distances

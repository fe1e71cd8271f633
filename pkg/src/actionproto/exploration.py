"""Uniform motion babbling: sample motions, run each from the reset pose and
record the observation change it causes."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, UnknownPredicate
from .rng import substream
from .stairworld import OBS_NAMES, MotionCommand, SimConfig, StairGeometry, StairWorld

DEFAULT_FEATURES = ("y", "z")


@dataclass
class Sample:
    motion: MotionCommand
    effect: tuple[float, ...]
    full_effect: tuple[float, ...]
    label: int | None = None


@dataclass
class SampleSet:
    samples: list[Sample]
    feature_subset: tuple[str, ...]
    config: SimConfig
    rng_seed: int
    config_fingerprint: str = ""

    def __post_init__(self):
        if not self.config_fingerprint:
            self.config_fingerprint = fingerprint(self.config, self.feature_subset)

    def __len__(self):
        return len(self.samples)

    def motions(self) -> np.ndarray:
        return np.array([s.motion for s in self.samples], dtype=float).reshape(-1, 2)

    def effects(self) -> np.ndarray:
        return np.array([s.effect for s in self.samples], dtype=float).reshape(
            -1, len(self.feature_subset))

    def full_effects(self) -> np.ndarray:
        return np.array([s.full_effect for s in self.samples], dtype=float).reshape(
            -1, len(OBS_NAMES))

    def labels(self) -> list[int | None]:
        return [s.label for s in self.samples]

    def subset(self, indices: Iterable[int]) -> "SampleSet":
        return replace(self, samples=[self.samples[i] for i in indices])

    def with_labels(self, labels: Sequence[int]) -> "SampleSet":
        samples = [replace(s, label=int(k)) for s, k in zip(self.samples, labels)]
        return replace(self, samples=samples)


def _check_features(feature_subset) -> tuple[str, ...]:
    feats = tuple(feature_subset)
    if not feats:
        raise ConfigError("feature_subset must not be empty")
    unknown = [f for f in feats if f not in OBS_NAMES]
    if unknown:
        raise ConfigError(f"unknown effect features {unknown}; choose from {OBS_NAMES}")
    return feats


def config_to_dict(config: SimConfig) -> dict:
    return asdict(config)


def config_from_dict(d: dict) -> SimConfig:
    d = dict(d)
    geom = StairGeometry(**d.pop("geometry"))
    return SimConfig(geometry=geom, **d)


def fingerprint(config: SimConfig, feature_subset: Sequence[str]) -> str:
    payload = json.dumps({"sim": config_to_dict(config),
                          "features": list(feature_subset)}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def execute(world: StairWorld, m: MotionCommand, feature_subset: Sequence[str]) -> Sample:
    """Run ``m`` from the reset pose and return the resulting sample."""
    s0 = world.reset()
    s1, _, _, _ = world.step(s0, m, record=False)
    full = tuple(b - a for a, b in zip(s0.observation_vector(), s1.observation_vector()))
    idx = [OBS_NAMES.index(f) for f in feature_subset]
    return Sample(m, tuple(full[i] for i in idx), full)


def sample_motions(n: int, seed: int, feature_subset=DEFAULT_FEATURES,
                   config: SimConfig | None = None) -> SampleSet:
    """Draw ``n`` motions uniformly from the motion box and record their effects."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    feats = _check_features(feature_subset)
    config = config or SimConfig()
    world = StairWorld(config)
    rng = substream(seed, "explore")
    draws = rng.uniform(config.motion_low, config.motion_high, size=(n, 2))
    samples = [execute(world, MotionCommand(float(a), float(m)), feats) for a, m in draws]
    return SampleSet(samples, feats, config, int(seed))


def _beyond_stairs(s: Sample, config: SimConfig) -> bool:
    final_y = config.start_forward + s.full_effect[OBS_NAMES.index("y")]
    return final_y >= config.geometry.end


FILTERS = {
    "none": lambda s, c: False,
    "overshoot": _beyond_stairs,
}


def filter_overshoot(sample_set: SampleSet, predicate: str = "overshoot"
                     ) -> tuple[SampleSet, int]:
    """Drop samples rejected by the named filter.

    Returns the retained set and the number of removed samples.
    """
    try:
        reject = FILTERS[predicate]
    except KeyError:
        raise UnknownPredicate(predicate) from None
    keep = [i for i, s in enumerate(sample_set.samples)
            if not reject(s, sample_set.config)]
    return sample_set.subset(keep), len(sample_set) - len(keep)


# -- JSON Lines persistence -------------------------------------------------

def dumps_jsonl(sample_set: SampleSet) -> str:
    header = {
        "kind": "sample_set",
        "seed": sample_set.rng_seed,
        "fingerprint": sample_set.config_fingerprint,
        "feature_subset": list(sample_set.feature_subset),
        "n": len(sample_set),
        "config": config_to_dict(sample_set.config),
    }
    lines = [json.dumps(header, sort_keys=True)]
    for s in sample_set.samples:
        lines.append(json.dumps({
            "motion": {"angle": s.motion.angle, "magnitude": s.motion.magnitude},
            "effect": list(s.effect),
            "full_effect": list(s.full_effect),
            "label": s.label,
        }, sort_keys=True))
    return "\n".join(lines) + "\n"


def loads_jsonl(text: str) -> SampleSet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = json.loads(lines[0])
    samples = []
    for ln in lines[1:]:
        d = json.loads(ln)
        m = d["motion"]
        samples.append(Sample(MotionCommand(m["angle"], m["magnitude"]),
                              tuple(d["effect"]), tuple(d["full_effect"]), d["label"]))
    return SampleSet(samples, tuple(header["feature_subset"]),
                     config_from_dict(header["config"]), header["seed"],
                     header["fingerprint"])


def save_jsonl(sample_set: SampleSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_jsonl(sample_set))


def load_jsonl(path) -> SampleSet:
    with open(path, encoding="utf-8") as f:
        return loads_jsonl(f.read())

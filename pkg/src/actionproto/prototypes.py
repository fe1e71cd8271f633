"""Action prototype generation.

Each effect class receives a prototype budget from its effect variability:
classes with a wide but consistent spread of effects get more prototypes,
unreliable classes (high coefficient of variation) and tight classes get fewer.
A class with a budget of one is represented by its mean motion, larger budgets
are filled by a growing-neural-gas pass over the class's motions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import EffectClass
from .errors import DegenerateClass
from .gng import GngParams, gng_fit
from .rng import derive_seed, substream
from .stairworld import MotionCommand, SimConfig

CV_EPS = 1e-9
TERM_FLOOR = 0.05

GENERATORS = ("effect", "fixed_rgng", "random", "uniform")


@dataclass
class PrototypeBudget:
    cv: np.ndarray
    std: np.ndarray
    mean: np.ndarray
    term: np.ndarray
    xi: np.ndarray
    class_index: np.ndarray

    def rows(self) -> list[dict]:
        return [{"k": int(k), "cv": float(c), "std": float(s), "mean": float(m),
                 "term": float(t), "xi": int(x)}
                for k, c, s, m, t, x in zip(self.class_index, self.cv, self.std,
                                            self.mean, self.term, self.xi)]

    @property
    def total(self) -> int:
        return int(self.xi.sum())


@dataclass(frozen=True)
class ActionPrototype:
    motion: MotionCommand
    class_index: int
    generator: str


def normalized_stats(means: np.ndarray, stds: np.ndarray):
    """Scale class means and stds per dimension by the largest absolute mean.

    Both statistics share the scale, so their ratio keeps its meaning while
    every dimension of the means lands in [0, 1].
    """
    means = np.abs(np.asarray(means, dtype=float))
    stds = np.asarray(stds, dtype=float)
    scale = means.max(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return means / scale, stds / scale


def budget_from_scalars(cv, std, term_floor: float = TERM_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Prototype counts from scalar (cv, std) pairs; returns ``(term, xi)``."""
    cv = np.asarray(cv, dtype=float)
    std = np.asarray(std, dtype=float)
    term = np.maximum(1.0 - cv, term_floor) * std
    positive = term[term > 0]
    if positive.size == 0:
        return term, np.ones(len(term), dtype=int)
    ref = positive.min()
    # small slack so ratios that are exact integers in exact arithmetic are not floored
    # one below by rounding
    xi = np.floor(term / ref + 1e-9).astype(int)
    return term, np.maximum(xi, 1)


def prototype_budget(classes: list[EffectClass], term_floor: float = TERM_FLOOR,
                     max_per_class: int | None = None) -> PrototypeBudget:
    """Per-class prototype counts from class effect statistics.

    Means and standard deviations are normalised per effect dimension across
    classes (see :func:`normalized_stats`) and reduced to scalars by their
    Euclidean norm before the coefficient of variation is formed. Budgets are
    capped at the class size, and optionally at ``max_per_class``.
    """
    if not classes:
        raise ValueError("need at least one class")
    for c in classes:
        if len(c) < 2:
            raise DegenerateClass(f"class {c.index} has {len(c)} member(s); need >= 2")
    means, stds = normalized_stats([c.effect_mean for c in classes],
                                   [c.effect_std for c in classes])
    mean_s = np.linalg.norm(means, axis=1)
    std_s = np.linalg.norm(stds, axis=1)
    cv = std_s / np.maximum(mean_s, CV_EPS)
    term, xi = budget_from_scalars(cv, std_s, term_floor)
    if max_per_class is not None:
        xi = np.minimum(xi, max_per_class)
    xi = np.minimum(xi, [len(c) for c in classes])
    return PrototypeBudget(cv, std_s, mean_s, term, xi,
                           np.array([c.index for c in classes]))


def _class_motions(c: EffectClass, motions: np.ndarray) -> np.ndarray:
    return motions[c.members]


def snap_to_members(centers: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Move each centre onto a distinct nearest member motion.

    Distances are taken in the class bounding box scaled to unit size. A
    class that is not convex in motion space can have its mean (or a GNG
    node) outside the region that produces the class effect; a member motion
    reproduces it exactly because the simulator is deterministic.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    span = np.ptp(pts, axis=0)
    span[span == 0] = 1.0
    d = (((centers[:, None, :] - pts[None, :, :]) / span) ** 2).sum(-1)
    out = np.empty_like(centers)
    used = np.zeros(len(pts), dtype=bool)
    # closest pairs first, so a well-placed centre keeps its member
    for i in np.argsort(d.min(axis=1), kind="stable"):
        row = np.where(used, np.inf, d[i])
        j = int(np.argmin(row)) if np.isfinite(row).any() else int(np.argmin(d[i]))
        used[j] = True
        out[i] = pts[j]
    return out


def _centers(pts: np.ndarray, n: int, params: GngParams | None, seed: int,
             snap: bool) -> np.ndarray:
    centers = pts.mean(axis=0, keepdims=True) if n == 1 else gng_fit(pts, n, params, seed).nodes
    return snap_to_members(centers, pts) if snap else np.asarray(centers)


def generate_prototypes(classes: list[EffectClass], budget: PrototypeBudget,
                        motions: np.ndarray, params: GngParams | None = None,
                        seed: int = 0, snap: bool = True) -> list[ActionPrototype]:
    """Class mean motion for a budget of one, GNG node positions otherwise.

    With ``snap`` each centre is moved onto a member motion (see
    ``snap_to_members``).
    """
    xi_of = dict(zip(budget.class_index.tolist(), budget.xi.tolist()))
    missing = [c.index for c in classes if c.index not in xi_of]
    if missing:
        raise ValueError(f"budget does not cover classes {missing}")
    out = []
    for c in classes:
        if len(c) < 2:
            raise DegenerateClass(f"class {c.index} has {len(c)} member(s)")
        pts = _class_motions(c, motions)
        centers = _centers(pts, xi_of[c.index], params, derive_seed(seed, "class", c.index), snap)
        out += [ActionPrototype(MotionCommand(float(a), float(m)), c.index, "effect")
                for a, m in centers]
    return out


def baseline_fixed_rgng(classes: list[EffectClass], per_class: int, motions: np.ndarray,
                        params: GngParams | None = None, seed: int = 0,
                        snap: bool = True) -> list[ActionPrototype]:
    """Same node count for every class, ignoring effect variability."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    out = []
    for c in classes:
        pts = _class_motions(c, motions)
        centers = _centers(pts, per_class, params, derive_seed(seed, "class", c.index), snap)
        out += [ActionPrototype(MotionCommand(float(a), float(m)), c.index, "fixed_rgng")
                for a, m in centers]
    return out


def baseline_random(n: int, config: SimConfig, seed: int = 0) -> list[ActionPrototype]:
    rng = substream(seed, "random-prototypes")
    draws = rng.uniform(config.motion_low, config.motion_high, size=(n, 2))
    return [ActionPrototype(MotionCommand(float(a), float(m)), -1, "random") for a, m in draws]


def baseline_uniform_grid(rows: int, cols: int, config: SimConfig) -> list[ActionPrototype]:
    """Cell centres of a ``rows`` x ``cols`` lattice; rows span the angle axis."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    a_lo, m_lo = config.motion_low
    a_hi, m_hi = config.motion_high
    angles = a_lo + (np.arange(rows) + 0.5) * (a_hi - a_lo) / rows
    mags = m_lo + (np.arange(cols) + 0.5) * (m_hi - m_lo) / cols
    return [ActionPrototype(MotionCommand(float(a), float(m)), -1, "uniform")
            for a in angles for m in mags]


def grid_shape(n: int) -> tuple[int, int]:
    """Most square ``rows x cols`` factorisation of ``n`` (rows <= cols)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rows = max(r for r in range(1, math.isqrt(n) + 1) if n % r == 0)
    return rows, n // rows


def row_sizes(n: int) -> list[int]:
    """Cells per angle row for an ``n``-point uniform layout.

    Uses the exact lattice from :func:`grid_shape` when it is no more than 2:1;
    otherwise (e.g. prime ``n``) ``round(sqrt(n))`` rows whose sizes differ by
    at most one, with the longer rows spread evenly.
    """
    rows, cols = grid_shape(n)
    if cols <= 2 * rows:
        return [cols] * rows
    rows = max(1, round(math.sqrt(n)))
    base, extra = divmod(n, rows)
    return [base + ((i + 1) * extra // rows - i * extra // rows) for i in range(rows)]


def baseline_uniform(n: int, config: SimConfig) -> list[ActionPrototype]:
    """Exactly ``n`` prototypes spread as evenly as possible over the motion box.

    Each row sits at an angle cell centre and places its cells at equally
    spaced impulse cell centres; equals :func:`baseline_uniform_grid` whenever
    ``n`` has a near-square factorisation.
    """
    sizes = row_sizes(n)
    a_lo, m_lo = config.motion_low
    a_hi, m_hi = config.motion_high
    out = []
    for i, cols in enumerate(sizes):
        a = a_lo + (i + 0.5) * (a_hi - a_lo) / len(sizes)
        for j in range(cols):
            m = m_lo + (j + 0.5) * (m_hi - m_lo) / cols
            out.append(ActionPrototype(MotionCommand(float(a), float(m)), -1, "uniform"))
    return out


# -- persistence ------------------------------------------------------------

@dataclass
class PrototypeFile:
    generator: str
    prototypes: list[ActionPrototype]
    parameters: dict = field(default_factory=dict)
    budget: list[dict] = field(default_factory=list)
    fingerprint: str = ""

    def motions(self) -> list[MotionCommand]:
        return [p.motion for p in self.prototypes]

    def to_dict(self) -> dict:
        return {
            "kind": "prototype_set",
            "generator": self.generator,
            "fingerprint": self.fingerprint,
            "parameters": self.parameters,
            "budget": self.budget,
            "prototypes": [{"angle": p.motion.angle, "magnitude": p.motion.magnitude,
                            "class_index": p.class_index, "generator": p.generator}
                           for p in self.prototypes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrototypeFile":
        protos = [ActionPrototype(MotionCommand(p["angle"], p["magnitude"]),
                                  p["class_index"], p["generator"]) for p in d["prototypes"]]
        return cls(d["generator"], protos, d.get("parameters", {}), d.get("budget", []),
                   d.get("fingerprint", ""))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "PrototypeFile":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

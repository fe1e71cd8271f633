"""Deep Q-learning over a fixed set of action prototypes, and the protocol that
compares prototype sets by their learning curves."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .qnet import Adam, QNetwork, mlp_gradient
from .rng import derive_seed, substream
from .stairworld import MotionCommand, SimConfig, StairWorld, max_return


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 30000
    warmup_steps: int = 3000
    batch_size: int = 64
    gamma: float = 0.95
    learning_rate: float = 1e-3
    target_sync: int = 100  # in gradient updates
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 5000
    eval_interval: int = 500
    eval_episodes: int = 5
    buffer_capacity: int = 10000
    hidden: tuple[int, ...] = (48, 48)
    seeds: tuple[int, ...] = (0, 1, 2, 3)
    scale_obs: bool = True

    def __post_init__(self):
        if not 0 <= self.warmup_steps < self.total_steps:
            raise ValueError("need 0 <= warmup_steps < total_steps")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.eps_end > self.eps_start:
            raise ValueError("eps_end must be <= eps_start")
        if self.batch_size < 1 or self.eval_interval < 1 or self.eval_episodes < 1:
            raise ValueError("batch_size, eval_interval and eval_episodes must be >= 1")

    def epsilon(self, step: int) -> float:
        if self.eps_decay_steps <= 0:
            return self.eps_end
        frac = min(1.0, step / self.eps_decay_steps)
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["seeds"] = list(self.seeds)
        return d


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int = 8):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=int)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self.size = 0
        self._pos = 0

    def __len__(self):
        return self.size

    def add(self, obs, action, reward, next_obs, done) -> None:
        i = self._pos
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = float(done)
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.size, size=min(batch_size, self.size), replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = self.sample_indices(batch_size, rng)
        return (self.obs[idx], self.actions[idx], self.rewards[idx],
                self.next_obs[idx], self.dones[idx])


@dataclass
class LearningCurve:
    """Evaluation returns per checkpoint; ``returns[i][s]`` is seed ``s`` at
    checkpoint ``i`` (already averaged over the evaluation episodes)."""

    steps: list[int]
    returns: list[list[float]]
    seeds: list[int]
    label: str = ""

    @property
    def mean(self) -> np.ndarray:
        return np.array([np.mean(r) for r in self.returns])

    @property
    def std(self) -> np.ndarray:
        return np.array([np.std(r) for r in self.returns])

    def to_csv(self) -> str:
        head = ["env_step", "mean_return", "std_return"] + [f"seed{s}" for s in self.seeds]
        lines = [",".join(head)]
        for step, m, s, row in zip(self.steps, self.mean, self.std, self.returns):
            lines.append(",".join([str(step), repr(float(m)), repr(float(s))]
                                  + [repr(float(v)) for v in row]))
        return "\n".join(lines) + "\n"

    @classmethod
    def merge(cls, runs: list["RunResult"], label: str = "") -> "LearningCurve":
        steps = runs[0].eval_steps
        returns = [[r.eval_returns[i] for r in runs] for i in range(len(steps))]
        return cls(list(steps), returns, [r.seed for r in runs], label)

    def steps_to_threshold(self, threshold: float) -> int | None:
        for step, m in zip(self.steps, self.mean):
            if m >= threshold:
                return step
        return None


@dataclass
class RunResult:
    seed: int
    net: QNetwork
    eval_steps: list[int]
    eval_returns: list[float]
    first_update_step: int | None
    updates: int
    train_episode_returns: list[float] = field(default_factory=list)


def obs_scale(sim: SimConfig) -> np.ndarray:
    """Fixed per-feature divisors bringing observations to roughly unit range."""
    g = sim.geometry
    return np.array([1.0, g.end, g.top_height, 1.0, 1.0, 1.0, 1.0,
                     max(g.step_depth, g.ground_extent)])


def _observe(state, scale: np.ndarray | None) -> np.ndarray:
    obs = np.array(state.observation_vector())
    if scale is None:
        return obs
    obs = obs / scale
    obs[7] = min(obs[7], 1.0)  # the top-step sentinel is not a distance
    return obs


def evaluate(net: QNetwork, world: StairWorld, motions: list[MotionCommand],
             episodes: int, scale: np.ndarray | None = None) -> float:
    """Mean undiscounted return of the greedy policy."""
    total = 0.0
    for _ in range(episodes):
        state = world.reset()
        done = False
        ret = 0.0
        while not done:
            a = int(np.argmax(net.forward(_observe(state, scale))))
            state, _, r, done = world.step(state, motions[a], record=False,
                                           check_bounds=False)
            ret += r
        total += ret
    return total / episodes


def train_dqn(sim: SimConfig, motions: list[MotionCommand], cfg: TrainConfig,
              seed: int) -> RunResult:
    """Train one DQN agent whose discrete actions are ``motions``."""
    if not motions:
        raise ValueError("need at least one prototype")
    world = StairWorld(sim)
    n_actions = len(motions)
    net = QNetwork((8, *cfg.hidden, n_actions), substream(seed, "dqn-init"))
    target = net.copy()
    opt = Adam(net.params(), lr=cfg.learning_rate)
    buf = ReplayBuffer(cfg.buffer_capacity)
    act_rng = substream(seed, "dqn-act")
    replay_rng = substream(seed, "dqn-replay")

    scale = obs_scale(sim) if cfg.scale_obs else None
    state = world.reset()
    obs = _observe(state, scale)
    ep_ret = 0.0
    result = RunResult(seed, net, [], [], None, 0)
    for step in range(1, cfg.total_steps + 1):
        if step <= cfg.warmup_steps or act_rng.random() < cfg.epsilon(step):
            a = int(act_rng.integers(n_actions))
        else:
            a = int(np.argmax(net.forward(obs)))
        state, _, r, done = world.step(state, motions[a], record=False, check_bounds=False)
        next_obs = _observe(state, scale)
        # running out of jumps is a time limit, not a terminal state
        terminal = state.pos_up >= sim.geometry.top_height - 1e-9
        buf.add(obs, a, r, next_obs, terminal)
        ep_ret += r
        if done:
            result.train_episode_returns.append(ep_ret)
            ep_ret = 0.0
            state = world.reset()
            next_obs = _observe(state, scale)
        obs = next_obs

        if step > cfg.warmup_steps:
            o, acts, rews, o2, dn = buf.sample(cfg.batch_size, replay_rng)
            q_next = target.forward(o2).max(axis=1)
            y = rews + cfg.gamma * (1.0 - dn) * q_next
            opt.step(mlp_gradient(net, o, acts, y))
            result.updates += 1
            if result.first_update_step is None:
                result.first_update_step = step
            if result.updates % cfg.target_sync == 0:
                target.load_from(net)

        if step % cfg.eval_interval == 0:
            result.eval_steps.append(step)
            result.eval_returns.append(evaluate(net, world, motions, cfg.eval_episodes, scale))
    return result


def train_seeds(sim: SimConfig, motions, cfg: TrainConfig, seeds=None, label: str = ""):
    seeds = list(cfg.seeds if seeds is None else seeds)
    runs = [train_dqn(sim, motions, cfg, s) for s in seeds]
    return LearningCurve.merge(runs, label), runs


@dataclass
class ComparisonReport:
    curves: dict[str, LearningCurve]
    offsets: dict[str, int]
    ceiling: float
    prototype_counts: dict[str, int]
    warmup_steps: int = 0
    threshold_fraction: float = 0.8

    def summary(self) -> dict:
        out = {}
        thr = self.threshold_fraction * self.ceiling
        for name, c in self.curves.items():
            reach = c.steps_to_threshold(thr)
            out[name] = {
                "final_mean_return": float(c.mean[-1]),
                "final_std_return": float(c.std[-1]),
                "max_mean_return": float(c.mean.max()),
                "steps_to_threshold": reach,
                "steps_to_threshold_with_offset": None if reach is None
                else reach + self.offsets[name],
                "offset": self.offsets[name],
                "learning_start": self.offsets[name] + self.warmup_steps,
                "n_prototypes": self.prototype_counts[name],
            }
        return out

    def ordering(self) -> dict:
        """The headline comparisons between the effect arm and the baselines.

        Steps-to-threshold include each arm's offset, so the effect arm is
        charged for its exploration samples.
        """
        s = self.summary()
        if not {"effect", "random", "uniform"} <= s.keys():
            return {}
        inf = math.inf
        eff_reach = s["effect"]["steps_to_threshold_with_offset"]
        uni_reach = s["uniform"]["steps_to_threshold_with_offset"]
        return {
            "effect_final_ge_random": s["effect"]["final_mean_return"]
            >= s["random"]["final_mean_return"],
            "effect_reaches_threshold": eff_reach is not None,
            "effect_faster_than_uniform": (eff_reach is not None)
            and eff_reach <= (inf if uni_reach is None else uni_reach),
        }

    def to_dict(self) -> dict:
        return {
            "ceiling": self.ceiling,
            "threshold": self.threshold_fraction * self.ceiling,
            "offsets": self.offsets,
            "summary": self.summary(),
            "ordering": self.ordering(),
        }

    def long_csv(self) -> str:
        """One row per (arm, checkpoint, seed) for external plotting."""
        lines = ["arm,env_step,offset_step,seed,return"]
        for name, c in self.curves.items():
            for step, row in zip(c.steps, c.returns):
                for seed, v in zip(c.seeds, row):
                    lines.append(f"{name},{step},{step + self.offsets[name]},{seed},{float(v)!r}")
        return "\n".join(lines) + "\n"


def run_comparison(sim: SimConfig, arms: dict[str, list[MotionCommand]], cfg: TrainConfig,
                   seeds=None, exploration_samples: int = 2000) -> ComparisonReport:
    """Train every arm on every seed.

    The ``effect`` arm's step axis is offset by the exploration samples spent
    before its prototypes existed.
    """
    seeds = list(cfg.seeds if seeds is None else seeds)
    curves = {}
    for name, motions in arms.items():
        curves[name], _ = train_seeds(sim, motions, cfg, seeds, label=name)
    offsets = {name: (exploration_samples if name == "effect" else 0) for name in arms}
    return ComparisonReport(curves, offsets, max_return(sim.geometry.num_steps),
                            {name: len(m) for name, m in arms.items()}, cfg.warmup_steps)

"""The four Q-learning variants: tabular and linear, on- and off-policy.

All four act epsilon-greedily on their current value estimates and back up
toward the best next-state value. What separates the two families is the
policy object they keep updated: on-policy variants maintain the stochastic
epsilon-greedy distribution they are acting out, off-policy variants maintain
a one-hot greedy target alongside their exploratory behavior.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .mdp import (
    Action,
    AlphaSchedule,
    Hyperparameters,
    MappingEnvironment,
    MappingEpisodeState,
)
from .metrics import EpisodeLog, RunRecord
from .scenario import Scenario

FEATURE_DIM = 7
DIVERGENCE_LIMIT = 1e9
POLICY_FILE_VERSION = 1


class DivergenceError(RuntimeError):
    """Linear weights left the sane range; carries the offending weights."""

    def __init__(self, weights: np.ndarray, updates: int):
        self.weights = np.array(weights)
        self.updates = updates
        super().__init__(
            f"weight magnitude exceeded {DIVERGENCE_LIMIT:g} after {updates} updates: "
            f"{self.weights.tolist()}"
        )


class AgentVariant(Enum):
    ON_POLICY_TABULAR = "on-tab"
    OFF_POLICY_TABULAR = "off-tab"
    ON_POLICY_LINEAR = "on-lin"
    OFF_POLICY_LINEAR = "off-lin"

    @property
    def on_policy(self) -> bool:
        return self in (AgentVariant.ON_POLICY_TABULAR, AgentVariant.ON_POLICY_LINEAR)

    @property
    def tabular(self) -> bool:
        return self in (AgentVariant.ON_POLICY_TABULAR, AgentVariant.OFF_POLICY_TABULAR)


class QTable:
    """Dense action values keyed by (next component index, anchor machine)."""

    def __init__(self, num_components: int, num_vms: int):
        self.num_components = num_components
        self.num_vms = num_vms
        self.values = np.zeros((num_components, num_vms, num_vms))
        self.visits = np.zeros((num_components, num_vms, num_vms), dtype=np.int64)

    def state_key(self, state: MappingEpisodeState) -> tuple[int, int]:
        return state.next_component_index - 1, state.anchor_vm - 1

    def action_values(self, state: MappingEpisodeState) -> np.ndarray:
        i, a = self.state_key(state)
        return self.values[i, a]

    def value(self, state: MappingEpisodeState, action: Action) -> float:
        i, a = self.state_key(state)
        return float(self.values[i, a, action.target_vm - 1])

    def greedy_action(self, state: MappingEpisodeState) -> int:
        return int(np.argmax(self.action_values(state))) + 1

    def max_value(self, state: MappingEpisodeState) -> float:
        return float(self.action_values(state).max())


def feature_map(
    state: MappingEpisodeState,
    action: Action,
    scenario: Scenario,
    num_components: Optional[int] = None,
) -> np.ndarray:
    """Feature vector for one (state, action) pair.

    Layout: bias, compute and storage demand-to-capacity ratios (capped at 2),
    predicted compute and storage idle fractions (clamped to [0, 1]), a
    capacity-fit bit, and the placement progress fraction.

    The map is deliberately occupancy-blind: a machine's features do not
    change when it gets taken, so the linear agents generalize aggressively
    across placement stages and keep re-ranking already-used machines. This
    coarseness is what caps their attainable reward well below the tabular
    agents'.
    """
    k = num_components if num_components is not None else len(scenario.subnet.components)
    comp = scenario.subnet.components[state.next_component_index - 1]
    vm = scenario.vms[action.target_vm - 1]
    return np.array(
        [
            1.0,
            min(comp.compute_req / vm.compute_cap, 2.0),
            min(comp.storage_req / vm.storage_cap, 2.0),
            min(max(1.0 - comp.compute_req / vm.compute_cap, 0.0), 1.0),
            min(max(1.0 - comp.storage_req / vm.storage_cap, 0.0), 1.0),
            1.0 if vm.fits(comp) else 0.0,
            (state.next_component_index - 1) / k,
        ]
    )


class LinearQ:
    """Linear value estimates over the fixed 7-dimensional feature map."""

    def __init__(self, scenario: Scenario, num_components: Optional[int] = None):
        comps = scenario.subnet.components
        if num_components is None:
            num_components = len(comps)
        comps = comps[:num_components]
        self.num_components = num_components
        self.num_vms = scenario.num_vms
        self.weights = np.zeros(FEATURE_DIM)
        self.updates = 0

        req_c = np.array([c.compute_req for c in comps], dtype=float)
        req_s = np.array([c.storage_req for c in comps], dtype=float)
        cap_c = np.array([v.compute_cap for v in scenario.vms], dtype=float)
        cap_s = np.array([v.storage_cap for v in scenario.vms], dtype=float)
        ratio_c = req_c[:, None] / cap_c[None, :]
        ratio_s = req_s[:, None] / cap_s[None, :]
        self._ratio_c = np.minimum(ratio_c, 2.0)
        self._ratio_s = np.minimum(ratio_s, 2.0)
        self._waste_c = np.clip(1.0 - ratio_c, 0.0, 1.0)
        self._waste_s = np.clip(1.0 - ratio_s, 0.0, 1.0)
        self._sufficient = (ratio_c <= 1.0) & (ratio_s <= 1.0)

        # Feature blocks depend only on the component index, so they are
        # assembled once and reused for every state at that placement stage.
        self._blocks = np.empty((num_components, self.num_vms, FEATURE_DIM))
        for i in range(num_components):
            self._blocks[i, :, 0] = 1.0
            self._blocks[i, :, 1] = self._ratio_c[i]
            self._blocks[i, :, 2] = self._ratio_s[i]
            self._blocks[i, :, 3] = self._waste_c[i]
            self._blocks[i, :, 4] = self._waste_s[i]
            self._blocks[i, :, 5] = self._sufficient[i].astype(float)
            self._blocks[i, :, 6] = i / num_components
        self._blocks.flags.writeable = False

    def feature_matrix(self, state: MappingEpisodeState) -> np.ndarray:
        """Features of every action in one read-only (m, 7) block."""
        return self._blocks[state.next_component_index - 1]

    def feature_vector(self, state: MappingEpisodeState, action: Action) -> np.ndarray:
        return self.feature_matrix(state)[action.target_vm - 1]

    def action_values(self, state: MappingEpisodeState) -> np.ndarray:
        return self.feature_matrix(state) @ self.weights

    def value(self, state: MappingEpisodeState, action: Action) -> float:
        return float(self.feature_vector(state, action) @ self.weights)

    def greedy_action(self, state: MappingEpisodeState) -> int:
        return int(np.argmax(self.action_values(state))) + 1

    def max_value(self, state: MappingEpisodeState) -> float:
        return float(self.action_values(state).max())


ValueEstimator = Union[QTable, LinearQ]


class PolicyMode(Enum):
    EPSILON_GREEDY = "epsilon-greedy"
    GREEDY_TARGET = "greedy-target"


class PolicyTable:
    """Explicit per-state action distributions.

    Rows start from the all-zero value estimates, so the exploit mass sits on
    the lowest machine id until a state is first updated.
    """

    def __init__(self, num_components: int, num_vms: int, mode: PolicyMode, epsilon: float = 0.0):
        self.mode = mode
        self.num_vms = num_vms
        self.probs = np.zeros((num_components, num_vms, num_vms))
        if mode is PolicyMode.EPSILON_GREEDY:
            self.probs[:, :, :] = epsilon / num_vms
            self.probs[:, :, 0] = 1.0 - (epsilon / num_vms) * (num_vms - 1)
        else:
            self.probs[:, :, 0] = 1.0

    def row(self, state: MappingEpisodeState) -> np.ndarray:
        return self.probs[state.next_component_index - 1, state.anchor_vm - 1]

    def greedy_action(self, state: MappingEpisodeState) -> int:
        return int(np.argmax(self.row(state))) + 1


def epsilon_greedy_policy_update(
    policy: PolicyTable,
    state: MappingEpisodeState,
    q: ValueEstimator,
    epsilon: float,
) -> None:
    """Point the state's exploit mass at the current best action; every other
    action keeps the uniform exploration share."""
    if policy.mode is not PolicyMode.EPSILON_GREEDY:
        raise ValueError("policy is not in epsilon-greedy mode")
    m = policy.num_vms
    row = policy.row(state)
    row[:] = epsilon / m
    row[q.greedy_action(state) - 1] = 1.0 - (epsilon / m) * (m - 1)


def greedy_target_update(
    policy: PolicyTable,
    state: MappingEpisodeState,
    q: ValueEstimator,
) -> None:
    """Unit mass on the current best action."""
    if policy.mode is not PolicyMode.GREEDY_TARGET:
        raise ValueError("policy is not in greedy-target mode")
    row = policy.row(state)
    row[:] = 0.0
    row[q.greedy_action(state) - 1] = 1.0


def _explore_index(u: float, epsilon: float, num_vms: int) -> int:
    # u is uniform on [0, epsilon); rescaling it keeps one draw per step.
    return min(int(num_vms * u / epsilon), num_vms - 1)


def select_action(
    q: ValueEstimator,
    state: MappingEpisodeState,
    epsilon: float,
    rng: np.random.Generator,
) -> tuple[Action, bool]:
    """Epsilon-greedy pick over current value estimates.

    Returns the action and whether it came from the exploration branch. Greedy
    ties resolve to the lowest machine id.
    """
    u = float(rng.random())
    if u < epsilon:
        return Action(_explore_index(u, epsilon, q.num_vms) + 1), True
    return Action(q.greedy_action(state)), False


def _effective_alpha(hyper: Hyperparameters, visits: int) -> float:
    if hyper.alpha_schedule is AlphaSchedule.HARMONIC:
        return hyper.alpha / (1.0 + visits / 100.0)
    return hyper.alpha


def tabular_update(
    q: QTable,
    state: MappingEpisodeState,
    action: Action,
    reward: float,
    next_state: MappingEpisodeState,
    hyper: Hyperparameters,
) -> float:
    """One backup toward reward plus the discounted best next value.

    Terminal successors contribute nothing. Returns the temporal-difference
    error before the step was applied.
    """
    i, a = q.state_key(state)
    j = action.target_vm - 1
    bootstrap = 0.0 if next_state.terminal else q.max_value(next_state)
    target = reward + hyper.gamma * bootstrap
    current = q.values[i, a, j]
    alpha = _effective_alpha(hyper, int(q.visits[i, a, j]))
    q.values[i, a, j] = current - alpha * (current - target)
    q.visits[i, a, j] += 1
    return target - current


def linear_update(
    lq: LinearQ,
    state: MappingEpisodeState,
    action: Action,
    reward: float,
    next_state: MappingEpisodeState,
    hyper: Hyperparameters,
) -> float:
    """Semi-gradient step: the features of the taken action are the gradient
    of the linear estimate, so the weights move by alpha * td_error * features."""
    phi = lq.feature_vector(state, action)
    bootstrap = 0.0 if next_state.terminal else lq.max_value(next_state)
    td_error = reward + hyper.gamma * bootstrap - float(lq.weights @ phi)
    alpha = _effective_alpha(hyper, lq.updates)
    lq.weights += alpha * td_error * phi
    lq.updates += 1
    if np.any(np.abs(lq.weights) > DIVERGENCE_LIMIT):
        raise DivergenceError(lq.weights, lq.updates)
    return td_error


@dataclass
class Learner:
    variant: AgentVariant
    q: ValueEstimator
    policy: PolicyTable


def make_learner(
    variant: AgentVariant,
    scenario: Scenario,
    hyper: Hyperparameters,
    num_components: Optional[int] = None,
) -> Learner:
    k = num_components if num_components is not None else len(scenario.subnet.components)
    m = scenario.num_vms
    q: ValueEstimator = QTable(k, m) if variant.tabular else LinearQ(scenario, k)
    if variant.on_policy:
        policy = PolicyTable(k, m, PolicyMode.EPSILON_GREEDY, epsilon=hyper.epsilon)
    else:
        policy = PolicyTable(k, m, PolicyMode.GREEDY_TARGET)
    return Learner(variant=variant, q=q, policy=policy)


def run_episode(
    env: MappingEnvironment,
    learner: Learner,
    hyper: Hyperparameters,
    rng: np.random.Generator,
    episode_index: int = 1,
) -> EpisodeLog:
    """Play one episode, updating values and the policy after every step."""
    state = env.reset()
    total = 0.0
    length = 0
    exploratory = 0
    all_feasible = True
    while not state.terminal:
        # Both families act epsilon-greedily on the current value estimates;
        # they differ in the policy object they keep updated (stochastic
        # epsilon-greedy rows versus a one-hot greedy target).
        action, explored = select_action(learner.q, state, hyper.epsilon, rng)
        outcome = env.step(state, action)
        if learner.variant.tabular:
            tabular_update(learner.q, state, action, outcome.reward, outcome.next_state, hyper)
        else:
            linear_update(learner.q, state, action, outcome.reward, outcome.next_state, hyper)
        if learner.variant.on_policy:
            epsilon_greedy_policy_update(learner.policy, state, learner.q, hyper.epsilon)
        else:
            greedy_target_update(learner.policy, state, learner.q)
        total += outcome.reward
        length += 1
        exploratory += int(explored)
        all_feasible = all_feasible and outcome.feasible
        state = outcome.next_state
    return EpisodeLog(
        episode_index=episode_index,
        total_reward=total,
        length=length,
        exploratory_actions=exploratory,
        success=all_feasible and length == env.num_components,
    )


def train(
    variant: AgentVariant,
    scenario: Scenario,
    hyper: Hyperparameters,
    seed: int,
    num_components: Optional[int] = None,
) -> tuple[RunRecord, Learner]:
    """Full training run: one seeded generator drives both the environment
    resets and the action selection, which makes runs reproducible."""
    rng = np.random.default_rng(seed)
    env = MappingEnvironment(scenario, rng, hyper.reward_mode, num_components)
    learner = make_learner(variant, scenario, hyper, num_components)
    logs = [
        run_episode(env, learner, hyper, rng, episode_index=e)
        for e in range(1, hyper.episodes + 1)
    ]
    record = RunRecord(variant=variant.value, seed=seed, hyper=hyper, episodes=tuple(logs))
    return record, learner


def greedy_rollout(
    q: ValueEstimator,
    env: MappingEnvironment,
    start_anchor: int = 1,
) -> Optional[dict[int, int]]:
    """Replay the greedy policy without exploration.

    Returns the component-to-machine pairs, or None when the greedy choice is
    ever infeasible.
    """
    state = MappingEpisodeState(
        next_component_index=1, anchor_vm=start_anchor, occupied=frozenset()
    )
    pairs: dict[int, int] = {}
    while not state.terminal:
        action = Action(q.greedy_action(state))
        outcome = env.step(state, action)
        if not outcome.feasible:
            return None
        pairs[state.next_component_index] = action.target_vm
        state = outcome.next_state
    return pairs


# ---------------------------------------------------------------------------
# Trained-policy persistence (consumed by the decision service)


def save_policy(learner: Learner, path: str | Path) -> None:
    doc: dict = {
        "version": POLICY_FILE_VERSION,
        "variant": learner.variant.value,
        "state_key": "component-index,anchor-vm",
        "num_components": learner.q.num_components,
        "num_vms": learner.q.num_vms,
    }
    if isinstance(learner.q, QTable):
        doc["kind"] = "tabular"
        doc["values"] = learner.q.values.tolist()
    else:
        doc["kind"] = "linear"
        doc["weights"] = learner.q.weights.tolist()
    Path(path).write_text(json.dumps(doc) + "\n")


@dataclass(frozen=True)
class PolicySnapshot:
    variant: str
    kind: str
    num_components: int
    num_vms: int
    values: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    def estimator_for(self, scenario: Scenario) -> ValueEstimator:
        if self.kind == "tabular":
            if self.num_vms != scenario.num_vms:
                raise ValueError(
                    f"policy trained for {self.num_vms} vms, scenario has {scenario.num_vms}"
                )
            table = QTable(self.num_components, self.num_vms)
            table.values = np.array(self.values)
            return table
        lq = LinearQ(scenario, self.num_components)
        lq.weights = np.array(self.weights)
        return lq


def load_policy(path: str | Path) -> PolicySnapshot:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != POLICY_FILE_VERSION:
        raise ValueError(f"unsupported policy file version {doc.get('version')!r}")
    kind = doc["kind"]
    return PolicySnapshot(
        variant=doc["variant"],
        kind=kind,
        num_components=doc["num_components"],
        num_vms=doc["num_vms"],
        values=np.array(doc["values"]) if kind == "tabular" else None,
        weights=np.array(doc["weights"]) if kind == "linear" else None,
    )

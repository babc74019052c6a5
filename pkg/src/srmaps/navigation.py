"""Reward-driven maze navigation with a softmax action network.

The agent's network maps a one-hot state to eight action values, one per
compass move. Training uses one-step Q-learning targets with a single
network (no replay buffer, no target network). Action probabilities are
the softmax of the action values divided by a temperature.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .environments import MOVES, StateSpace, TransitionMatrix
from .errors import ConfigError, InvalidStateError
from .network import LayeredNetwork, init_network, softmax

N_ACTIONS = len(MOVES)


class Termination(enum.Enum):
    GOAL = "Goal"
    WALL_CHOICE = "WallChoice"
    STEP_LIMIT = "StepLimit"


@dataclass(frozen=True)
class AgentConfig:
    episodes: int = 40000
    max_steps: int = 200
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    epsilon_decay: float = 0.9997
    learning_rate: float = 0.1
    discount: float = 0.9
    reward_goal: float = 1.0
    reward_step: float = 0.0
    reward_wall: float = -1.0
    temperature: float = 0.05
    hidden_width: int | None = None
    seed: int | None = 0

    def __post_init__(self):
        for name in ("epsilon_start", "epsilon_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigError("epsilon_decay must lie in (0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ConfigError("discount must lie in [0, 1)")
        if self.learning_rate <= 0 or self.temperature <= 0:
            raise ConfigError("learning_rate and temperature must be positive")
        if self.episodes < 0 or self.max_steps < 1:
            raise ConfigError("episodes must be >= 0 and max_steps >= 1")

    def epsilon(self, episode: int) -> float:
        return max(self.epsilon_end, self.epsilon_start * self.epsilon_decay**episode)


@dataclass
class Episode:
    visited: list[int]
    actions: list[int]
    rewards: list[float]
    cause: Termination

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))

    @property
    def length(self) -> int:
        return len(self.actions)


@dataclass
class NavAgent:
    net: LayeredNetwork
    space: StateSpace
    config: AgentConfig
    episodes: list[Episode] = field(default_factory=list)


def make_agent(space: StateSpace, cfg: AgentConfig = AgentConfig()) -> NavAgent:
    """Untrained agent whose initial policy is uniform (output layer at zero)."""
    if space.grid_shape is None:
        raise TypeError("navigation needs a spatial state space")
    net = init_network(space.n_states, cfg.hidden_width, cfg.seed, output_width=N_ACTIONS, zero_output=True)
    return NavAgent(net, space, cfg)


def _check_state(agent: NavAgent, state: int) -> int:
    state = int(state)
    if not 0 <= state < agent.space.n_states:
        raise IndexError(f"state {state} out of range")
    if not agent.space.valid_mask[state]:
        raise InvalidStateError(f"state {state} is a wall")
    return state


def action_values(agent: NavAgent, state: int) -> np.ndarray:
    net = agent.net
    h = np.maximum(net.W1[:, state] + net.b1, 0.0)
    return net.W2 @ h + net.b2


def action_distribution(agent: NavAgent, state: int) -> np.ndarray:
    """Probabilities of the eight compass moves at ``state``."""
    state = _check_state(agent, state)
    return softmax(action_values(agent, state) / agent.config.temperature)


def select_action(agent: NavAgent, state: int, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy move; greedy ties go to the first move in compass order."""
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(action_values(agent, state)))


def _td_update(net: LayeredNetwork, state: int, action: int, target: float, lr: float) -> None:
    pre = net.W1[:, state] + net.b1
    h = np.maximum(pre, 0.0)
    err = net.W2[action] @ h + net.b2[action] - target
    dh = err * net.W2[action]
    dh[pre <= 0.0] = 0.0
    net.W2[action] -= lr * err * h
    net.b2[action] -= lr * err
    net.W1[:, state] -= lr * dh
    net.b1 -= lr * dh


def train_agent(space: StateSpace, cfg: AgentConfig = AgentConfig(), record: bool = True) -> NavAgent:
    """Episodic Q-learning on ``space``.

    Episodes start from a uniformly drawn valid non-reward state. Picking a
    move into a wall (or across a wall corner, or off the grid) ends the
    episode with ``reward_wall``; entering a reward cell ends it with
    ``reward_goal``.
    """
    if not space.reward_states:
        raise ConfigError(f"{space.name} has no reward state to navigate to")
    agent = make_agent(space, cfg)
    starts = np.array([s for s in space.valid_states if s not in space.reward_states])
    rng = np.random.default_rng(cfg.seed)
    for ep in range(cfg.episodes):
        eps = cfg.epsilon(ep)
        s = int(starts[rng.integers(starts.size)])
        visited, actions, rewards = [s], [], []
        cause = Termination.STEP_LIMIT
        for _ in range(cfg.max_steps):
            a = select_action(agent, s, eps, rng)
            nxt = space.move_target(s, a)
            actions.append(a)
            if nxt is None:
                r, target, cause = cfg.reward_wall, cfg.reward_wall, Termination.WALL_CHOICE
            elif nxt in space.reward_states:
                r, target, cause = cfg.reward_goal, cfg.reward_goal, Termination.GOAL
            else:
                r = cfg.reward_step
                target = r + cfg.discount * float(action_values(agent, nxt).max())
            rewards.append(r)
            _td_update(agent.net, s, a, target, cfg.learning_rate)
            if nxt is None:
                break
            visited.append(nxt)
            if cause is Termination.GOAL:
                break
            s = nxt
        if record:
            agent.episodes.append(Episode(visited, actions, rewards, cause))
    return agent


def policy_tp_matrix(agent: NavAgent, space: StateSpace | None = None, absorbing_rewards: bool = True) -> TransitionMatrix:
    """Transition matrix induced by the agent's action distribution.

    Mass on moves that are blocked is spread over the allowed moves in
    proportion to their probability. Walls get zero rows; reward cells too
    when ``absorbing_rewards`` is set.
    """
    space = space or agent.space
    n = space.n_states
    probs = np.zeros((n, n))
    for s in space.valid_states:
        if absorbing_rewards and s in space.reward_states:
            continue
        dist = action_distribution(agent, s)
        dests = [space.move_target(s, a) for a in range(N_ACTIONS)]
        allowed = sum(dist[a] for a, d in enumerate(dests) if d is not None)
        if allowed <= 0:
            continue
        for a, d in enumerate(dests):
            if d is not None:
                probs[s, d] += dist[a] / allowed
    excluded = ~probs.any(axis=1)
    return TransitionMatrix(probs, excluded=excluded)


def greedy_rollout(agent: NavAgent, start: int, max_steps: int = 500) -> Episode:
    """Follow argmax moves from ``start`` until goal, wall choice or step cap."""
    space, cfg = agent.space, agent.config
    s = _check_state(agent, start)
    if s in space.reward_states:
        return Episode([s], [], [], Termination.GOAL)
    visited, actions, rewards = [s], [], []
    for _ in range(max_steps):
        a = int(np.argmax(action_values(agent, s)))
        nxt = space.move_target(s, a)
        actions.append(a)
        if nxt is None:
            rewards.append(cfg.reward_wall)
            return Episode(visited, actions, rewards, Termination.WALL_CHOICE)
        visited.append(nxt)
        if nxt in space.reward_states:
            rewards.append(cfg.reward_goal)
            return Episode(visited, actions, rewards, Termination.GOAL)
        rewards.append(cfg.reward_step)
        s = nxt
    return Episode(visited, actions, rewards, Termination.STEP_LIMIT)


def bfs_distances(space: StateSpace, sources) -> np.ndarray:
    """Shortest step counts from the nearest of ``sources``; -1 if unreachable.

    Edges are followed backwards, which equals forwards for spatial spaces.
    """
    dist = np.full(space.n_states, -1, dtype=np.int64)
    queue = deque()
    for s in sources:
        dist[s] = 0
        queue.append(s)
    while queue:
        s = queue.popleft()
        for t in space.adjacency[s]:
            if dist[t] < 0:
                dist[t] = dist[s] + 1
                queue.append(t)
    return dist


def route_states(space: StateSpace, start: int) -> tuple[np.ndarray, np.ndarray]:
    """Split valid states into those on some shortest route from ``start`` to
    the nearest reward, and the remaining detour states (start excluded)."""
    to_goal = bfs_distances(space, sorted(space.reward_states))
    from_start = bfs_distances(space, [start])
    valid = space.valid_mask & (to_goal >= 0) & (from_start >= 0)
    on_route = valid & (from_start + to_goal == to_goal[start])
    detour = space.valid_mask & ~on_route
    on_route[start] = detour[start] = False
    return np.flatnonzero(on_route), np.flatnonzero(detour)

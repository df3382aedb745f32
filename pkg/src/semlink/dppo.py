"""PPO with a dynamic (masked) action space for per-feature bit allocation.

Each episode is a ``C``-step decision process: at step ``i`` the agent picks
how many quantization bits the ``i``-th visited feature map receives.  The
actor outputs a softmax over ``1..max_bits`` bits, masked so that every
feature still to be visited keeps at least one bit.  The reward of a step is
``L0 + L - beta * d`` evaluated on the partially decided allocation, with
``L`` the negative cross-entropy of the task head and ``d`` the weighted
distortion after transmission over the episode's fixed channel.

Actor and critic are small ``tanh`` MLPs with hand-written backprop so the
loss gradient can be checked against finite differences.
"""

from dataclasses import dataclass, field

import numpy as np

from .alloc import BitAllocation, SubcarrierAssignment, allocate_bits_eam, weighted_distortion
from .importance import importance
from .link import LinkConfig, LinkRealization, realize_link, transmit_digital
from .semcodec import CodecParams, cross_entropy, encode, task_logits
from .seeds import derive_seed

STATE_DIM = 9


@dataclass
class DppoHyper:
    eta: float = 0.99
    beta: float = 0.5
    epsilon_clip: float = 0.25
    c1: float = 0.5
    c2: float = 0.01
    lr: float = 1e-3
    epochs: int = 20
    L0: float = 10.0
    seed: int = 0
    hidden: tuple = (64, 64)
    dropout: float = 0.0
    batch_episodes: int = 4
    max_bits: int = None
    fill: str = "one"            # provisional bits for unvisited features: one | even
    order: str = "index"         # visiting order: index | importance
    use_isr: bool = True
    normalize_advantages: bool = False
    value_scale: float = None
    optimizer: str = "adam"
    penalty: float = -1.0
    mask: bool = True
    episode_baseline: bool = False  # subtract the reward of the initial allocation from returns

    def __post_init__(self):
        if not 0 < self.epsilon_clip < 1:
            raise ValueError("epsilon_clip must lie in (0, 1)")
        for name in ("eta", "lr", "L0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.fill not in ("one", "even"):
            raise ValueError(f"unknown fill rule {self.fill!r}")
        if self.order not in ("index", "importance"):
            raise ValueError(f"unknown visiting order {self.order!r}")


def default_max_bits(B: int, C: int) -> int:
    return int(min(16, B - C + 1))


# --------------------------------------------------------------------- state

def visiting_order(omega, rule: str = "index") -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if rule == "index":
        return np.arange(omega.size)
    return np.argsort(-omega, kind="stable")


def encode_state(A, omega, i: int, allocated_so_far: int, B: int, order=None) -> np.ndarray:
    """Fixed 9-value summary for step ``i`` (1-based).

    Layout: mean, std, min, max of the visited map; ``C * omega`` of the
    visited map; mean and max of ``C * omega`` over maps still to come
    (zero at the last step); fraction of budget left; ``i / C``.
    """
    A = np.asarray(A, dtype=float)
    omega = np.asarray(getattr(omega, "omega", omega), dtype=float)
    C = A.shape[0]
    if not 1 <= i <= C:
        raise ValueError(f"step {i} outside 1..{C}")
    order = np.arange(C) if order is None else np.asarray(order)
    k = order[i - 1]
    a = A[k].ravel()
    rest = omega[order[i:]] * C
    return np.array([
        a.mean(), a.std(), a.min(), a.max(),
        omega[k] * C,
        rest.mean() if rest.size else 0.0,
        rest.max() if rest.size else 0.0,
        (B - allocated_so_far) / B,
        i / C,
    ])


@dataclass(frozen=True)
class ActionSpace:
    max_bits: int
    valid_upper: int

    @classmethod
    def at_step(cls, max_bits: int, B: int, allocated: int, C: int, i: int) -> "ActionSpace":
        """Bits still spendable at step ``i`` keeping one per later feature."""
        return cls(max_bits, int(min(max_bits, B - allocated - (C - i))))

    @property
    def actions(self) -> np.ndarray:
        return np.arange(1, self.valid_upper + 1)


# ------------------------------------------------------------------ networks

def _init_mlp(sizes, rng, out_scale=0.01):
    params = []
    for j, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = j == len(sizes) - 2
        scale = out_scale if last else 1.0
        params.append(scale * rng.standard_normal((n_out, n_in)) / np.sqrt(n_in))
        params.append(np.zeros(n_out))
    return params


def _mlp_forward(params, x, drop_masks=None):
    """Returns output and the hidden activations needed for backprop."""
    hs = [x]
    h = x
    n_layers = len(params) // 2
    for j in range(n_layers):
        z = h @ params[2 * j].T + params[2 * j + 1]
        if j < n_layers - 1:
            h = np.tanh(z)
            if drop_masks is not None:
                h = h * drop_masks[j]
            hs.append(h)
        else:
            h = z
    return h, hs


def _mlp_backward(params, hs, dout, drop_masks=None):
    grads = [None] * len(params)
    n_layers = len(params) // 2
    d = dout
    for j in range(n_layers - 1, -1, -1):
        h_in = hs[j]
        grads[2 * j] = d.T @ h_in
        grads[2 * j + 1] = d.sum(axis=0)
        if j > 0:
            d = d @ params[2 * j]
            if drop_masks is not None:
                d = d * drop_masks[j - 1]
                # hs[j] already includes the mask; recover tanh for the derivative
                t = np.divide(hs[j], drop_masks[j - 1], out=np.zeros_like(hs[j]),
                              where=drop_masks[j - 1] != 0)
            else:
                t = hs[j]
            d = d * (1.0 - t ** 2)
    return grads


@dataclass
class PolicyParams:
    actor: list
    critic: list
    max_bits: int
    value_scale: float = 1.0
    hidden: tuple = (64, 64)

    def copy(self) -> "PolicyParams":
        return PolicyParams([p.copy() for p in self.actor], [p.copy() for p in self.critic],
                            self.max_bits, self.value_scale, tuple(self.hidden))

    @property
    def arrays(self) -> list:
        return self.actor + self.critic

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.arrays])

    def with_flat(self, vec) -> "PolicyParams":
        out = self.copy()
        pos = 0
        for p in out.arrays:
            p[...] = vec[pos:pos + p.size].reshape(p.shape)
            pos += p.size
        return out


def init_policy(max_bits: int, hidden=(64, 64), seed=0, value_scale: float = 1.0,
                state_dim: int = STATE_DIM) -> PolicyParams:
    rng = np.random.default_rng(seed)
    sizes_a = (state_dim,) + tuple(hidden) + (max_bits,)
    sizes_c = (state_dim,) + tuple(hidden) + (1,)
    return PolicyParams(_init_mlp(sizes_a, rng), _init_mlp(sizes_c, rng, out_scale=1.0),
                        int(max_bits), float(value_scale), tuple(hidden))


def _valid_mask(valid_upper, max_bits):
    return np.arange(max_bits)[None, :] < np.asarray(valid_upper)[:, None]


def masked_log_softmax(logits, valid_upper) -> np.ndarray:
    """Row-wise log-softmax over the first ``valid_upper`` entries; -inf elsewhere."""
    logits = np.atleast_2d(logits)
    valid_upper = np.atleast_1d(valid_upper)
    if np.any(valid_upper < 1):
        raise ValueError("no valid action: every step needs at least one bit")
    mask = _valid_mask(valid_upper, logits.shape[1])
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax + np.log(np.exp(z - zmax).sum(axis=1, keepdims=True))
    return z - lse


def actor_forward(state, params: PolicyParams, space: ActionSpace) -> np.ndarray:
    """Probabilities over ``1..max_bits`` bits; invalid actions get exactly 0."""
    logits, _ = _mlp_forward(params.actor, np.atleast_2d(state))
    return np.exp(masked_log_softmax(logits, [space.valid_upper]))[0]


def critic_forward(state, params: PolicyParams) -> float:
    out, _ = _mlp_forward(params.critic, np.atleast_2d(state))
    return float(out[0, 0] * params.value_scale)


# ------------------------------------------------------------------- episode

@dataclass
class EpisodeContext:
    """Everything fixed during one episode: input, weights, channel, seeds."""
    A: np.ndarray
    label: int
    omega: np.ndarray
    codec: CodecParams
    real: LinkRealization
    assignment: SubcarrierAssignment
    B: int
    beta: float = 0.5
    L0: float = 10.0
    fill: str = "one"
    order: np.ndarray = None

    def __post_init__(self):
        if self.order is None:
            self.order = np.arange(self.A.shape[0])
        self._cache = {}

    @property
    def C(self) -> int:
        return self.A.shape[0]

    def evaluate(self, b):
        """Transmit with allocation ``b``; returns ``(L, d, correct, result)``.

        Results are cached per allocation since the episode's randomness is frozen.
        """
        key = tuple(int(x) for x in b)
        if key not in self._cache:
            res = transmit_digital(self.A, np.asarray(key), self.assignment, self.real)
            logits = task_logits(res.features, self.codec)
            L = -float(cross_entropy(logits, self.label)[0])
            d = weighted_distortion(self.A, res.features, self.omega)
            self._cache[key] = (L, d, bool(np.argmax(logits) == self.label), res)
        return self._cache[key]

    def complete(self, partial_b) -> np.ndarray:
        """Fill unvisited (zero) entries according to the fill rule."""
        b = np.asarray(partial_b, dtype=np.int64).copy()
        todo = [k for k in self.order if b[k] == 0]
        if not todo:
            return b
        if self.fill == "one":
            b[todo] = 1
        else:
            left = self.B - int(b.sum())
            share, extra = divmod(left, len(todo))
            b[todo] = share
            b[todo[:extra]] += 1
            b[todo] = np.maximum(b[todo], 1)
        return b


def make_context(codec: CodecParams, g, x, label, link_cfg: LinkConfig, B: int, seed,
                 hyper: DppoHyper = None) -> EpisodeContext:
    hyper = hyper or DppoHyper()
    A = encode(x, codec)
    w = importance(A, g, use_isr=hyper.use_isr).omega
    real = realize_link(link_cfg, A.shape[0], int(np.prod(A.shape[1:])), seed)
    return EpisodeContext(A, int(label), w, codec, real, real.assignment(w), B,
                          hyper.beta, hyper.L0, hyper.fill, visiting_order(w, hyper.order))


def step_reward(partial_b, ctx: EpisodeContext) -> float:
    """``L0 + L - beta * d`` for the provisionally completed allocation."""
    L, d, _, _ = ctx.evaluate(ctx.complete(partial_b))
    return ctx.L0 + L - ctx.beta * d


def allocation_rewards(b, ctx: EpisodeContext) -> np.ndarray:
    """Per-step rewards obtained by replaying a fixed allocation ``b``."""
    partial = np.zeros(ctx.C, dtype=np.int64)
    out = np.empty(ctx.C)
    for i, k in enumerate(ctx.order):
        partial[k] = b[k]
        out[i] = step_reward(partial, ctx)
    return out


# --------------------------------------------------------------- trajectory

@dataclass
class Trajectory:
    states: np.ndarray
    actions: np.ndarray        # bits chosen, 1-based
    rewards: np.ndarray
    values: np.ndarray
    logp_old: np.ndarray
    valid_upper: np.ndarray
    allocation: np.ndarray
    returns: np.ndarray = None
    advantages: np.ndarray = None
    baseline: float = 0.0         # per-episode reward offset removed before computing returns

    def __len__(self):
        return len(self.actions)


def discounted_returns(rewards, eta: float) -> np.ndarray:
    """``R_t = sum_{k>=t} eta**(k-t) r_k``."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        raise ValueError("empty reward sequence")
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(rewards.size - 1, -1, -1):
        acc = rewards[t] + eta * acc
        out[t] = acc
    return out


def advantages(returns, values) -> np.ndarray:
    returns = np.asarray(returns, dtype=float)
    values = np.asarray(values, dtype=float)
    if returns.shape != values.shape:
        raise ValueError("returns and values differ in length")
    return returns - values


def prob_ratio(logp_new, logp_old):
    return np.exp(np.asarray(logp_new, dtype=float) - np.asarray(logp_old, dtype=float))


def clipped_surrogate(p, m, epsilon: float, reduce: bool = True):
    """``min(p m, clip(p, 1-eps, 1+eps) m)``, averaged unless ``reduce=False``."""
    p = np.asarray(p, dtype=float)
    m = np.asarray(m, dtype=float)
    s = np.minimum(p * m, np.clip(p, 1 - epsilon, 1 + epsilon) * m)
    return float(s.mean()) if reduce else s


def collect_trajectory(ctx: EpisodeContext, params: PolicyParams, rng=None, greedy: bool = False,
                       mask: bool = True, penalty: float = -1.0, with_rewards: bool = True,
                       episode_baseline: bool = False) -> Trajectory:
    """Roll the policy through the ``C`` steps of one episode."""
    C, B = ctx.C, ctx.B
    b = np.zeros(C, dtype=np.int64)
    states = np.empty((C, STATE_DIM))
    actions = np.empty(C, dtype=np.int64)
    rewards = np.zeros(C)
    logp = np.empty(C)
    uppers = np.empty(C, dtype=np.int64)
    allocated = 0
    for i in range(1, C + 1):
        s = encode_state(ctx.A, ctx.omega, i, allocated, B, ctx.order)
        space = ActionSpace.at_step(params.max_bits, B, allocated, C, i)
        logits, _ = _mlp_forward(params.actor, s[None])
        upper_for_policy = space.valid_upper if mask else params.max_bits
        lp = masked_log_softmax(logits, [upper_for_policy])[0]
        if greedy:
            j = int(np.argmax(lp))
        else:
            j = int(rng.choice(params.max_bits, p=np.exp(lp)))
        a = j + 1
        penalised = a > space.valid_upper
        if penalised:
            a = space.valid_upper
        k = ctx.order[i - 1]
        b[k] = a
        allocated += a
        states[i - 1] = s
        actions[i - 1] = j + 1 if not penalised else a
        logp[i - 1] = lp[actions[i - 1] - 1]
        uppers[i - 1] = upper_for_policy
        if with_rewards:
            rewards[i - 1] = penalty if penalised else step_reward(b, ctx)
    values, _ = _mlp_forward(params.critic, states)
    values = values[:, 0] * params.value_scale
    base = step_reward(np.zeros(C, dtype=np.int64), ctx) if episode_baseline and with_rewards else 0.0
    return Trajectory(states, actions, rewards, values, logp, uppers, b, baseline=base)


def finish_trajectory(traj: Trajectory, eta: float) -> Trajectory:
    """Fill returns and advantages.

    ``traj.baseline`` depends only on the episode (never on the actions), so
    subtracting it from every reward leaves the policy gradient unbiased
    while removing the sample-to-sample offset the critic cannot see.
    """
    traj.returns = discounted_returns(traj.rewards - traj.baseline, eta)
    traj.advantages = advantages(traj.returns, traj.values)
    return traj


def _stack(trajs):
    cat = lambda name: np.concatenate([getattr(t, name) for t in trajs])
    return (cat("states"), cat("actions"), cat("valid_upper"), cat("logp_old"),
            cat("returns"), cat("advantages"))


# --------------------------------------------------------------------- loss

def total_loss(trajectories, params: PolicyParams, hyper: DppoHyper, drop_rng=None):
    """Clipped-surrogate PPO loss with value and entropy terms.

    ``trajectories`` is a Trajectory or a list of them (with returns and
    advantages filled).  Returns ``(loss, grads, stats)`` where ``grads``
    matches ``params.arrays``.
    """
    if isinstance(trajectories, Trajectory):
        trajectories = [trajectories]
    S, act, upper, logp_old, R, m = _stack(trajectories)
    T = S.shape[0]
    eps = hyper.epsilon_clip

    masks = None
    if hyper.dropout > 0 and drop_rng is not None:
        keep = 1.0 - hyper.dropout
        masks = [(drop_rng.random((T, h)) < keep) / keep for h in params.hidden]
    logits, hs_a = _mlp_forward(params.actor, S, masks)
    lp = masked_log_softmax(logits, upper)
    valid = np.isfinite(lp)
    pi = np.where(valid, np.exp(np.where(valid, lp, 0.0)), 0.0)
    rows = np.arange(T)
    lp_a = lp[rows, act - 1]
    ratio = np.exp(lp_a - logp_old)
    unclipped = ratio * m
    clipped = np.clip(ratio, 1 - eps, 1 + eps) * m
    surr = np.minimum(unclipped, clipped)
    plogp = np.where(valid, pi * np.where(valid, lp, 0.0), 0.0)
    entropy = -plogp.sum(axis=1)

    v_raw, hs_c = _mlp_forward(params.critic, S)
    v = v_raw[:, 0] * params.value_scale
    verr = v - R
    loss = float(np.mean(-surr + hyper.c1 * verr ** 2 - hyper.c2 * entropy))

    # d loss / d log pi(a)
    active = unclipped <= clipped
    d_lpa = np.where(active, -unclipped, 0.0) / T
    onehot = np.zeros_like(pi)
    onehot[rows, act - 1] = 1.0
    d_logits = d_lpa[:, None] * (onehot - pi)
    # entropy: dS/dz_j = -pi_j (log pi_j + S)
    log_pi = np.where(valid, lp, 0.0)
    dS = -pi * (log_pi + entropy[:, None])
    d_logits += (-hyper.c2 / T) * dS
    g_actor = _mlp_backward(params.actor, hs_a, d_logits, masks)

    dv = (2.0 * hyper.c1 / T) * verr * params.value_scale
    g_critic = _mlp_backward(params.critic, hs_c, dv[:, None])

    stats = {"entropy": float(entropy.mean()), "surrogate": float(surr.mean()),
             "value_loss": float(np.mean(verr ** 2)),
             "clip_frac": float(np.mean(np.abs(ratio - 1) > eps))}
    return loss, g_actor + g_critic, stats


# ---------------------------------------------------------------- optimiser

class Adam:
    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, arrays, grads, lr):
        if self.m is None:
            self.m = [np.zeros_like(a) for a in arrays]
            self.v = [np.zeros_like(a) for a in arrays]
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        out = []
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            out.append(a - lr * (m / c1) / (np.sqrt(v / c2) + self.eps))
        return out


def update(params: PolicyParams, grads, lr: float, optimizer: Adam = None) -> PolicyParams:
    """One descent step; plain ``theta - lr * grad`` unless an Adam state is given."""
    if any(not np.all(np.isfinite(g)) for g in grads):
        raise FloatingPointError("non-finite gradient; aborting update")
    arrays = params.arrays
    if len(grads) != len(arrays) or any(g.shape != a.shape for g, a in zip(grads, arrays)):
        raise ValueError("gradient shapes do not match parameters")
    if optimizer is None:
        new = [a - lr * g for a, g in zip(arrays, grads)]
    else:
        new = optimizer.step(arrays, grads, lr)
    n_a = len(params.actor)
    return PolicyParams(new[:n_a], new[n_a:], params.max_bits, params.value_scale, params.hidden)


# ------------------------------------------------------------------ training

@dataclass
class TrainResult:
    params: PolicyParams
    curve: list = field(default_factory=list)
    converged_at: int = None
    episodes: list = field(default_factory=list)   # (iteration, sample index, seed)

    def rewards(self) -> np.ndarray:
        return np.array([row["mean_reward"] for row in self.curve])


def train(codec: CodecParams, g, dataset, link_cfg: LinkConfig, hyper: DppoHyper, B: int,
          iterations: int = 500, tol: float = None, window: int = 50, params: PolicyParams = None,
          callback=None) -> TrainResult:
    """Alternate trajectory collection under the frozen policy and ``epochs``
    gradient steps on the clipped loss.

    Stops after ``iterations`` or, when ``tol`` is given, once the mean
    reward of the last ``window`` iterations moves by less than ``tol``
    relative to the preceding window.
    """
    C = codec.shape[0]
    max_bits = hyper.max_bits or default_max_bits(B, C)
    if params is None:
        vs = hyper.value_scale or hyper.L0 * min(C, 1.0 / (1.0 - hyper.eta))
        params = init_policy(max_bits, hyper.hidden, derive_seed(hyper.seed, "init"), vs)
    rng = np.random.default_rng(derive_seed(hyper.seed, "train"))
    opt = Adam() if hyper.optimizer == "adam" else None
    result = TrainResult(params)
    for it in range(iterations):
        old = params.copy()
        trajs = []
        picks = rng.integers(0, len(dataset), hyper.batch_episodes)
        for e, n in enumerate(picks):
            seed = derive_seed(hyper.seed, "episode", it, e)
            result.episodes.append((it, int(n), seed))
            ctx = make_context(codec, g, dataset.inputs[n], dataset.labels[n], link_cfg, B, seed, hyper)
            traj = finish_trajectory(
                collect_trajectory(ctx, old, rng, mask=hyper.mask, penalty=hyper.penalty,
                                   episode_baseline=hyper.episode_baseline), hyper.eta)
            if not np.all(traj.allocation >= 1) or traj.allocation.sum() > B:
                raise AssertionError("infeasible allocation sampled")
            trajs.append(traj)
        if hyper.normalize_advantages:
            allm = np.concatenate([t.advantages for t in trajs])
            mu, sd = allm.mean(), allm.std() + 1e-8
            for t in trajs:
                t.advantages = (t.advantages - mu) / sd
        loss = stats = None
        for _ in range(hyper.epochs):
            loss, grads, stats = total_loss(trajs, params, hyper, rng)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at iteration {it}: {stats}")
            params = update(params, grads, hyper.lr, opt)
        row = {"iteration": it, "mean_reward": float(np.mean([t.rewards.mean() for t in trajs])),
               "loss": float(loss), "entropy": stats["entropy"]}
        result.curve.append(row)
        if callback is not None:
            callback(row)
        if tol is not None and it + 1 >= 2 * window:
            r = result.rewards()
            cur, prev = r[-window:].mean(), r[-2 * window:-window].mean()
            if abs(cur - prev) < tol * abs(prev):
                result.converged_at = it
                break
    result.params = params
    return result


def infer_allocation(params: PolicyParams, A, omega, B: int, order=None) -> BitAllocation:
    """Greedy rollout: at each step take the most probable valid action
    (ties to the fewest bits)."""
    A = np.asarray(A, dtype=float)
    omega = np.asarray(getattr(omega, "omega", omega), dtype=float)
    C = A.shape[0]
    order = np.arange(C) if order is None else np.asarray(order)
    b = np.zeros(C, dtype=np.int64)
    allocated = 0
    for i in range(1, C + 1):
        s = encode_state(A, omega, i, allocated, B, order)
        space = ActionSpace.at_step(params.max_bits, B, allocated, C, i)
        probs = actor_forward(s, params, space)
        a = int(np.argmax(probs)) + 1
        b[order[i - 1]] = a
        allocated += a
    return BitAllocation(b, B)


def eam_reference_reward(codec, g, dataset, link_cfg, hyper: DppoHyper, B: int, seeds) -> float:
    """Mean per-step reward of the even allocation on the given episode seeds."""
    vals = []
    for n, s in seeds:
        ctx = make_context(codec, g, dataset.inputs[n], dataset.labels[n], link_cfg, B, s, hyper)
        vals.append(allocation_rewards(allocate_bits_eam(B, ctx.C, ctx.omega).b, ctx).mean())
    return float(np.mean(vals))


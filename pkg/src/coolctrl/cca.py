"""Offline actor-critic training on a fixed trace.

The critic body is a dense network that maps a normalized window of recent
(state, action) pairs to the normalized plant readings one slot ahead. A
fixed, non-trainable head denormalizes those readings and folds them into the
scalar training cost, so the full critic value is

    q(x) = cost(denormalize(body(x)))

and stays differentiable end to end. The actor maps the same window minus
the final action to a tanh-bounded action that fills that final slot.

Each epoch shuffles the training rows into fixed-size batches and, per batch,
takes one critic step (squared error between body output and the observed
readings) followed by one actor step (mean critic value of the actor's own
actions, gradients flowing through the frozen critic into the actor only).
After every epoch both networks are validated on the held-out rows and the
best weights are checkpointed. The critic validation error is either a mean
squared error on the full critic value or, in `due` mode, a one-sided error
that counts only underestimates — selecting for checkpoints that do not
promise less cost/heat than actually materializes. The actor's tracked best
error is reset periodically because early actor scores are meaningless while
the critic is still immature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .objective import CostParams, cost, cost_gradient
from .trace import ActionBounds, NormalizationSpec, WindowedDataset


@dataclass
class Critic:
    """Trainable body plus the fixed cost head (parameters and normalization)."""

    body: nn.Network
    cost_params: CostParams
    norm: NormalizationSpec

    def predict_readings(self, critic_inputs):
        """Normalized readings predicted for normalized input rows."""
        out, _ = nn.forward(self.body, critic_inputs)
        return out

    def value(self, critic_inputs):
        """Full critic output: physical-unit cost of each input row."""
        pred = self.predict_readings(critic_inputs)
        return cost(self.norm.denormalize(pred, "reading"), self.cost_params)


@dataclass
class Actor:
    """Policy network; final tanh keeps outputs inside (-1, 1)."""

    net: nn.Network

    def actions(self, actor_inputs):
        out, _ = nn.forward(self.net, actor_inputs)
        return out


@dataclass
class TrainConfig:
    max_epoch: int = 200
    batch_size: int = 128
    tau: int = 1
    cost: CostParams = field(default_factory=CostParams)
    due: bool = False
    mu_val_reset_period: int = 20
    seed: int = 1
    rho: float = 0.95
    eps: float = 1e-6
    critic_hidden: tuple[int, ...] = (50, 50)
    actor_hidden: tuple[int, ...] = (50, 50)
    # Whether an actor batch step sees the critic as updated by the same
    # batch (True) or as it stood before it (False).
    actor_sees_fresh_critic: bool = True

    def __post_init__(self):
        if self.max_epoch < 1:
            raise ValueError("max_epoch must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.mu_val_reset_period < 1:
            raise ValueError("mu_val_reset_period must be >= 1")


@dataclass
class TrainReport:
    """Per-epoch diagnostics and the checkpoint bookkeeping of one run."""

    critic_train_loss: list[float]
    critic_val_error: list[float]       # in the configured selection mode
    critic_val_mse: list[float]         # both modes always recorded
    critic_val_under: list[float]
    actor_val_error: list[float]
    best_critic_epoch: int
    best_actor_epoch: int
    due: bool
    seed: int
    underestimation_fraction: float

    def to_dict(self) -> dict:
        return {
            "critic_train_loss": self.critic_train_loss,
            "critic_val_error": self.critic_val_error,
            "critic_val_mse": self.critic_val_mse,
            "critic_val_under": self.critic_val_under,
            "actor_val_error": self.actor_val_error,
            "best_critic_epoch": self.best_critic_epoch,
            "best_actor_epoch": self.best_actor_epoch,
            "due": self.due,
            "seed": self.seed,
            "underestimation_fraction": self.underestimation_fraction,
        }


def _mean_fsum(values) -> float:
    # Order-independent mean: exact compensated summation over the rows.
    arr = np.asarray(values, dtype=float).ravel()
    return math.fsum(arr.tolist()) / arr.size


def critic_batch_update(critic: Critic, critic_inputs, target_readings,
                        optstate: nn.AdadeltaState) -> float:
    """One Adadelta step on (1/m) * sum of squared reading errors; returns the loss."""
    x = np.asarray(critic_inputs, dtype=float)
    y = np.asarray(target_readings, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    pred, cache = nn.forward(critic.body, x)
    err = pred - y
    m = x.shape[0]
    loss = float(np.sum(err * err) / m)
    grads, _ = nn.backprop(critic.body, cache, 2.0 * err / m)
    nn.adadelta_step(critic.body, optstate, grads)
    return loss


def actor_batch_update(actor: Actor, critic: Critic, actor_inputs,
                       optstate: nn.AdadeltaState) -> float:
    """One Adadelta step on the mean critic value of the actor's own actions.

    The critic is read-only here: gradients flow through its body and cost
    head into the actor's parameters only. Returns the pre-update mean value.
    """
    x_mu = np.asarray(actor_inputs, dtype=float)
    if x_mu.shape[0] == 0:
        raise ValueError("empty batch")
    m = x_mu.shape[0]
    act_out, act_cache = nn.forward(actor.net, x_mu)
    x_q = np.hstack([x_mu, act_out])
    pred, critic_cache = nn.forward(critic.body, x_q)
    phys = critic.norm.denormalize(pred, "reading")
    value = float(np.mean(cost(phys, critic.cost_params)))
    # d(mean cost)/d(normalized readings), chained through the denormalization.
    dcost = cost_gradient(phys, critic.cost_params) * critic.norm.scale("reading") / m
    _, dx_q = nn.backprop(critic.body, critic_cache, dcost)
    d_action = dx_q[:, x_mu.shape[1]:]
    grads, _ = nn.backprop(actor.net, act_cache, d_action)
    nn.adadelta_step(actor.net, optstate, grads)
    return value


def validate_critic(critic: Critic, val: WindowedDataset, due: bool) -> float:
    """Validation error of the full critic value on held-out rows.

    due=False: mean squared error. due=True: mean of max(y_true - y_pred, 0),
    charging only underestimates.
    """
    if val.n_rows == 0:
        raise ValueError("validation set is empty")
    y_pred = critic.value(val.critic_inputs)
    y_true = cost(critic.norm.denormalize(val.next_readings, "reading"),
                  critic.cost_params)
    if due:
        return _mean_fsum(np.maximum(y_true - y_pred, 0.0))
    diff = y_true - y_pred
    return _mean_fsum(diff * diff)


def underestimation_fraction(critic: Critic, val: WindowedDataset,
                             margin: float = 0.02) -> float:
    """Share of validation rows where any normalized reading channel is
    predicted more than `margin` below the observed value."""
    pred = critic.predict_readings(val.critic_inputs)
    under = pred < val.next_readings - margin
    return float(np.mean(np.any(under, axis=1)))


def validate_actor(actor: Actor, critic: Critic, val: WindowedDataset) -> float:
    """Mean critic-evaluated cost of the actor's actions on held-out rows."""
    if val.n_rows == 0:
        raise ValueError("validation set is empty")
    acts = actor.actions(val.actor_inputs)
    x_q = np.hstack([val.actor_inputs, acts])
    return _mean_fsum(critic.value(x_q))


def train(train_set: WindowedDataset, val_set: WindowedDataset,
          cfg: TrainConfig, norm: NormalizationSpec):
    """Full batch-training run; returns (best critic, best actor, report)."""
    if train_set.tau != cfg.tau:
        raise ValueError(
            f"dataset was built with tau={train_set.tau}, config says {cfg.tau}"
        )
    n = train_set.n_rows
    m = cfg.batch_size
    if m > n:
        raise ValueError(f"batch size {m} exceeds training rows {n}")
    reading_dim = train_set.next_readings.shape[1]
    xq_width = train_set.critic_inputs.shape[1]
    xmu_width = train_set.actor_inputs.shape[1]
    action_dim = train_set.action_dim

    master = np.random.default_rng(cfg.seed)
    seed_q = int(master.integers(2 ** 31))
    seed_mu = int(master.integers(2 ** 31))
    shuffle_rng = np.random.default_rng(int(master.integers(2 ** 31)))

    critic = Critic(
        body=nn.init_network(
            [xq_width, *cfg.critic_hidden, reading_dim],
            ["tanh"] * len(cfg.critic_hidden) + ["linear"],
            seed=seed_q,
        ),
        cost_params=cfg.cost,
        norm=norm,
    )
    # Actor hidden stack: first hidden layer linear, the rest tanh; tanh output.
    actor = Actor(
        net=nn.init_network(
            [xmu_width, *cfg.actor_hidden, action_dim],
            ["linear"] + ["tanh"] * (len(cfg.actor_hidden) - 1) + ["tanh"],
            seed=seed_mu,
        )
    )
    opt_q = nn.init_adadelta(critic.body, rho=cfg.rho, eps=cfg.eps)
    opt_mu = nn.init_adadelta(actor.net, rho=cfg.rho, eps=cfg.eps)

    best_q_err = math.inf
    best_mu_err = math.inf
    best_q_body = nn.copy_network(critic.body)
    best_mu_net = nn.copy_network(actor.net)
    best_q_epoch = 0
    best_mu_epoch = 0

    report_train_loss: list[float] = []
    report_val: list[float] = []
    report_val_mse: list[float] = []
    report_val_under: list[float] = []
    report_actor_val: list[float] = []

    n_batches = n // m  # remainder rows are dropped; reshuffling cycles them in
    for epoch in range(1, cfg.max_epoch + 1):
        order = shuffle_rng.permutation(n)
        epoch_losses = []
        for b in range(n_batches):
            idx = order[b * m:(b + 1) * m]
            stale = None
            if not cfg.actor_sees_fresh_critic:
                stale = Critic(nn.copy_network(critic.body), cfg.cost, norm)
            loss = critic_batch_update(
                critic, train_set.critic_inputs[idx],
                train_set.next_readings[idx], opt_q,
            )
            epoch_losses.append(loss)
            actor_batch_update(
                actor, stale if stale is not None else critic,
                train_set.actor_inputs[idx], opt_mu,
            )
        report_train_loss.append(float(np.mean(epoch_losses)))

        val_mse = validate_critic(critic, val_set, due=False)
        val_under = validate_critic(critic, val_set, due=True)
        e_q = val_under if cfg.due else val_mse
        report_val.append(e_q)
        report_val_mse.append(val_mse)
        report_val_under.append(val_under)
        if e_q < best_q_err:
            best_q_err = e_q
            best_q_body = nn.copy_network(critic.body)
            best_q_epoch = epoch

        best_critic = Critic(best_q_body, cfg.cost, norm)
        if epoch % cfg.mu_val_reset_period == 0:
            best_mu_err = math.inf  # early actor scores mean little; re-arm
        e_mu = validate_actor(actor, best_critic, val_set)
        report_actor_val.append(e_mu)
        if e_mu < best_mu_err:
            best_mu_err = e_mu
            best_mu_net = nn.copy_network(actor.net)
            best_mu_epoch = epoch

    best_critic = Critic(best_q_body, cfg.cost, norm)
    best_actor = Actor(best_mu_net)
    report = TrainReport(
        critic_train_loss=report_train_loss,
        critic_val_error=report_val,
        critic_val_mse=report_val_mse,
        critic_val_under=report_val_under,
        actor_val_error=report_actor_val,
        best_critic_epoch=best_q_epoch,
        best_actor_epoch=best_mu_epoch,
        due=cfg.due,
        seed=cfg.seed,
        underestimation_fraction=underestimation_fraction(best_critic, val_set),
    )
    return best_critic, best_actor, report


def act(actor: Actor, past_pairs, state, norm: NormalizationSpec,
        bounds: ActionBounds) -> np.ndarray:
    """Physical action for the current state given the recent history.

    past_pairs is the list of the last tau-1 (state, action) pairs in
    physical units, oldest first; its length must match the actor's input
    width exactly.
    """
    state = np.asarray(state, dtype=float)
    state_dim = state.shape[0]
    pair_width = state_dim + bounds.dim
    expected_pairs, rem = divmod(actor.net.input_dim - state_dim, pair_width)
    if rem:
        raise ValueError("actor input width is inconsistent with state/action dims")
    if len(past_pairs) != expected_pairs:
        raise ValueError(
            f"history has {len(past_pairs)} (state, action) pairs, actor "
            f"expects {expected_pairs}"
        )
    parts = []
    for s, a in past_pairs:
        parts.append(norm.normalize(np.asarray(s, dtype=float), "state"))
        parts.append(norm.normalize(np.asarray(a, dtype=float), "action"))
    parts.append(norm.normalize(state, "state"))
    x_mu = np.concatenate(parts)
    out, _ = nn.forward(actor.net, x_mu)
    return bounds.clip(norm.denormalize(out, "action"))


def make_controller(actor: Actor, norm: NormalizationSpec, bounds: ActionBounds,
                    tau: int):
    """Wrap a trained actor as a rollout controller.

    Until tau-1 real steps have happened, the missing history is padded with
    the current state and mid-range actions.
    """

    def controller(state, past):
        pairs = list(past[-(tau - 1):]) if tau > 1 else []
        while len(pairs) < tau - 1:
            pairs.insert(0, (state, bounds.mid()))
        return act(actor, pairs, state, norm, bounds)

    return controller

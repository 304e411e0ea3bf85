"""Gradient-descent fitting of metric parameters to judgement data.

The trainer threads exact distance gradients through the ranking head into
a binary cross-entropy objective. Judgements store the fraction of judges
who picked the *second* candidate while the head scores the *first*, so the
fitting target for each record is one minus its stored judgement.

All optimization runs in the unconstrained parameter space from
:mod:`watsonsim.grad`; the head slope occupies the final slot and trains
jointly with the metric.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from watsonsim.color import Colorspace, to_grey, to_ycbcr
from watsonsim.errors import (
    InputDomainError,
    NumericalError,
    TrainingError,
    ValidationError,
)
from watsonsim.grad import n_free, from_unconstrained, to_unconstrained, \
    watson_pair_gradients
from watsonsim.transforms import BlockGrid, dct_matrix, dft_matrix, \
    sample_grid_offset
from watsonsim.twoafc import PROB_CLAMP, RankingHead, bce_loss, predict_preference
from watsonsim.watson import WatsonParams, pair_forward, reference_side

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 1e-3
    epochs: int = 20
    batch_size: int = 64
    seed: int = 0
    optimizer: str = "adam"
    grid_randomization: bool = True
    threads: int = 1

    def validate(self) -> None:
        if not self.learning_rate > 0.0:
            raise InputDomainError("learning_rate must be positive")
        if self.epochs < 0:
            raise InputDomainError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise InputDomainError("batch_size must be at least 1")
        if self.optimizer not in OPTIMIZERS:
            raise InputDomainError(
                f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}"
            )
        if self.threads < 1:
            raise InputDomainError("threads must be at least 1")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainingResult:
    params: WatsonParams
    head: RankingHead
    loss_curve: list[float] = field(default_factory=list)


class _Optimizer:
    """Adam or plain SGD over one flat float64 vector."""

    def __init__(self, size: int, config: TrainerConfig):
        self.lr = config.learning_rate
        self.kind = config.optimizer
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, vec: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.kind == "sgd":
            return vec - self.lr * grad
        self.t += 1
        self.m = ADAM_BETA1 * self.m + (1.0 - ADAM_BETA1) * grad
        self.v = ADAM_BETA2 * self.v + (1.0 - ADAM_BETA2) * grad * grad
        m_hat = self.m / (1.0 - ADAM_BETA1 ** self.t)
        v_hat = self.v / (1.0 - ADAM_BETA2 ** self.t)
        return vec - self.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


# ---------------------------------------------------------------------------
# per-record evaluation


def _prepare_rows(records, params: WatsonParams):
    """Convert records to channel arrays plus the first-candidate target."""
    rows = []
    for record in records:
        arrays = []
        for img in (record.reference, record.first, record.second):
            if params.channels == "grey":
                arrays.append(to_grey(img).pixels[:, :, 0])
            else:
                if img.colorspace is Colorspace.GREY:
                    raise InputDomainError(
                        "color parameters need color records; got a grey image"
                    )
                arrays.append(to_ycbcr(img).pixels)
        rows.append((arrays[0], arrays[1], arrays[2], 1.0 - record.judgement))
    return rows


def pair_distances(ref, first, second, params: WatsonParams, grid: BlockGrid,
                   basis=None):
    """Both candidate distances with the reference side computed once.

    Returns (d0, d1, caches0, caches1); caches are a single channel cache in
    grey mode or a per-channel list in color mode, matching what
    :func:`watsonsim.grad.watson_pair_gradients` consumes.
    """
    if params.channels == "grey":
        side = reference_side(ref, params, grid, 0, basis)
        d0, cache0 = pair_forward(side, first, params.p, params.epsilon, basis)
        d1, cache1 = pair_forward(side, second, params.p, params.epsilon, basis)
        return d0, d1, cache0, cache1
    caches0, caches1 = [], []
    d0 = d1 = 0.0
    for c in range(3):
        side = reference_side(ref[:, :, c], params, grid, c, basis)
        v0, k0 = pair_forward(side, first[:, :, c], params.p, params.epsilon, basis)
        v1, k1 = pair_forward(side, second[:, :, c], params.p, params.epsilon, basis)
        d0 += params.lam[c] * v0
        d1 += params.lam[c] * v1
        caches0.append(k0)
        caches1.append(k1)
    return d0, d1, caches0, caches1


def head_gradients(d0: float, d1: float, gamma: float, target: float):
    """(loss, dLoss/dd0, dLoss/dd1, dLoss/dlog gamma) through the head.

    Zero gradients at the all-zero tie and wherever the probability clamp
    saturates the objective.
    """
    g = predict_preference(d0, d1, RankingHead(gamma))
    loss = bce_loss(g, target)
    if (d0 == 0.0 and d1 == 0.0) or not PROB_CLAMP <= g <= 1.0 - PROB_CLAMP:
        return loss, 0.0, 0.0, 0.0
    dz = g - target
    total = d0 + d1
    dd0 = dz * gamma * (-2.0 * d1 / (total * total))
    dd1 = dz * gamma * (2.0 * d0 / (total * total))
    dlog_gamma = dz * ((d1 - d0) / total) * gamma
    return loss, dd0, dd1, dlog_gamma


def _record_loss_grad(row, params: WatsonParams, grid: BlockGrid, basis):
    ref, first, second, target = row
    d0, d1, caches0, caches1 = pair_distances(ref, first, second, params,
                                              grid, basis)
    loss, dd0, dd1, dlog_gamma = head_gradients(d0, d1, params.gamma, target)
    grad = np.zeros(n_free(params))
    if dd0 != 0.0:
        grad += watson_pair_gradients(caches0, params, d_value=dd0)[2]
    if dd1 != 0.0:
        grad += watson_pair_gradients(caches1, params, d_value=dd1)[2]
    grad[-1] += dlog_gamma
    return loss, grad


def _batch_results(batch, params, grid, basis, threads):
    if threads <= 1:
        return [_record_loss_grad(row, params, grid, basis) for row in batch]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_record_loss_grad, row, params, grid, basis)
                   for row in batch]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# training loops


def train_metric(params: WatsonParams, records, config: TrainerConfig,
                 head: RankingHead | None = None) -> TrainingResult:
    """Fit all free parameters (head slope included) by mini-batch descent.

    Records keep their given order; batches are consecutive slices. With
    grid randomization each batch draws a fresh block-partition offset so
    the fit cannot lock onto one block alignment. The loss curve holds the
    mean per-record loss of each epoch, measured before that batch's update.
    Identical inputs reproduce the final parameters bit for bit.
    """
    config.validate()
    records = list(records)
    if not records:
        raise InputDomainError("training needs at least one record")
    template = params.copy()
    if head is not None:
        template.gamma = float(head.gamma)
        template.validate()
    rows = _prepare_rows(records, template)
    size = template.block_size
    basis = dct_matrix(size) if template.variant == "dct" else dft_matrix(size)
    vec = to_unconstrained(template)
    optimizer = _Optimizer(vec.size, config)
    rng = np.random.default_rng(config.seed)
    current = template.copy()
    curve: list[float] = []
    for epoch in range(config.epochs):
        loss_sum = 0.0
        for batch_index, start in enumerate(
            range(0, len(rows), config.batch_size)
        ):
            batch = rows[start : start + config.batch_size]
            if config.grid_randomization:
                offset = sample_grid_offset(rng)
            else:
                offset = (0, 0)
            grid = BlockGrid(size, offset)
            try:
                results = _batch_results(batch, current, grid, basis,
                                         config.threads)
            except NumericalError as exc:
                raise TrainingError(str(exc), epoch, batch_index)
            batch_grad = np.zeros_like(vec)
            batch_loss = 0.0
            for loss, grad in results:
                batch_loss += loss
                batch_grad += grad
            batch_grad /= len(batch)
            batch_loss /= len(batch)
            if not (np.isfinite(batch_loss) and np.all(np.isfinite(batch_grad))):
                raise TrainingError("non-finite batch loss or gradient",
                                    epoch, batch_index)
            loss_sum += batch_loss * len(batch)
            vec = optimizer.step(vec, batch_grad)
            try:
                current = from_unconstrained(vec, template)
            except ValidationError as exc:
                raise TrainingError(
                    f"update left the feasible region: {exc}", epoch, batch_index
                )
        curve.append(loss_sum / len(rows))
    return TrainingResult(params=current, head=RankingHead(current.gamma),
                          loss_curve=curve)


def fit_head(d0s, d1s, judgements, config: TrainerConfig,
             head: RankingHead | None = None) -> tuple[RankingHead, list[float]]:
    """Fit only the head slope on precomputed distance pairs.

    Useful for metrics without trainable parameters. Optimizes log-slope;
    the loss curve matches :func:`train_metric` semantics.
    """
    config.validate()
    d0s = np.asarray(d0s, dtype=np.float64)
    d1s = np.asarray(d1s, dtype=np.float64)
    ps = np.asarray(judgements, dtype=np.float64)
    if d0s.size == 0 or d0s.shape != d1s.shape or d0s.shape != ps.shape:
        raise InputDomainError("need matching nonempty distance/judgement arrays")
    log_gamma = np.array([np.log(head.gamma if head is not None else 1.0)])
    optimizer = _Optimizer(1, config)
    curve: list[float] = []
    for epoch in range(config.epochs):
        loss_sum = 0.0
        for batch_index, start in enumerate(range(0, d0s.size, config.batch_size)):
            stop = min(start + config.batch_size, d0s.size)
            gamma = float(np.exp(log_gamma[0]))
            batch_loss = 0.0
            batch_grad = 0.0
            for i in range(start, stop):
                loss, _, _, dlg = head_gradients(
                    float(d0s[i]), float(d1s[i]), gamma, 1.0 - float(ps[i])
                )
                batch_loss += loss
                batch_grad += dlg
            count = stop - start
            if not np.isfinite(batch_loss):
                raise TrainingError("non-finite batch loss", epoch, batch_index)
            loss_sum += batch_loss
            log_gamma = optimizer.step(
                log_gamma, np.array([batch_grad / count])
            )
        curve.append(loss_sum / d0s.size)
    return RankingHead(float(np.exp(log_gamma[0]))), curve


# ---------------------------------------------------------------------------
# reporting


def training_report(config: TrainerConfig, result: TrainingResult,
                    evaluation: dict | None = None) -> dict:
    """JSON-ready summary: config echo, loss curve, final evaluation."""
    report = {
        "config": config.as_dict(),
        "gamma": result.head.gamma,
        "loss_curve": list(result.loss_curve),
    }
    if result.loss_curve:
        report["initial_loss"] = result.loss_curve[0]
        report["final_loss"] = result.loss_curve[-1]
    if evaluation is not None:
        report["evaluation"] = evaluation
    return report

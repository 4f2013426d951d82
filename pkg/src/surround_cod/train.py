"""Joint loss and the CPU training loop.

The total loss is the sum of three groups: the first-stage cross-entropy
terms (coarse map vs mask, edge map vs boundary, surrounding map vs the
binarized halo label), the per-layer cross-entropy of every refined
prediction map, and the surrounding-anchored contrastive loss on the
fusion features (compressed sampling by default).

Optimization is Adam (beta1 0.9, beta2 0.999) with a continuously decayed
learning rate lr0 * decay**(epoch / decay_period). Runs are deterministic
for a fixed seed: data order, initialization, and updates all come from
one seeded generator and no thread-dependent reductions are used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .metrics import MetricReport, bce_loss, score_pair
from .model import ModelConfig, ToyModel
from .sacloss import SacConfig, sacloss_multi_layer, sacloss_multi_layer_grad
from .synth import SynthSample

__all__ = ["TrainConfig", "learning_rate", "joint_loss", "train", "AdamState"]

_CLAMP = 1e-7


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-3
    decay: float = 0.1
    decay_period: int = 10
    max_epochs: int = 30
    batch: int = 4
    side: int = 64
    sigma: float | None = None
    seed: int = 0
    channels: tuple = (8, 16, 32, 64)
    guide_channels: int = 8
    sac: SacConfig | None = field(default_factory=SacConfig)
    w_coarse: float = 1.0
    w_pred: float = 1.0
    w_sac: float = 1.0
    soft_surround_targets: bool = False
    holdout: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ConfigError(f"lr0 must be positive, got {self.lr0}")
        if not (0.0 < self.decay <= 1.0):
            raise ConfigError(f"decay must lie in (0, 1], got {self.decay}")
        if self.batch < 1 or self.max_epochs < 1 or self.decay_period < 1:
            raise ConfigError("batch, max_epochs, and decay_period must be >= 1")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            side=self.side, channels=tuple(self.channels), guide_channels=self.guide_channels
        )


def learning_rate(cfg: TrainConfig, epoch: int) -> float:
    """lr0 * decay**(epoch / decay_period), with the exponent taken as a real."""
    return cfg.lr0 * cfg.decay ** (epoch / cfg.decay_period)


def _surround_target(sample: SynthSample, cfg: TrainConfig) -> np.ndarray:
    lm = sample.lm.map
    if cfg.soft_surround_targets:
        return lm
    threshold = cfg.sac.surround_threshold if cfg.sac is not None else 0.1
    return (lm >= threshold).astype(np.float64)


def _bce_value_and_logit_grad(logit: np.ndarray, target: np.ndarray):
    """Stable mean BCE through a sigmoid, with the probability clamp respected."""
    p = 1.0 / (1.0 + np.exp(-np.clip(logit, -50.0, 50.0)))
    pc = np.clip(p, _CLAMP, 1.0 - _CLAMP)
    value = float(-(target * np.log(pc) + (1.0 - target) * np.log(1.0 - pc)).mean())
    grad = (p - target) / p.size
    grad[(p < _CLAMP) | (p > 1.0 - _CLAMP)] = 0.0
    return value, grad


def joint_loss(outputs, sample: SynthSample, cfg: TrainConfig):
    """Total loss and its weighted components for already-computed outputs."""
    comps = {
        "coarse": cfg.w_coarse
        * (
            bce_loss(outputs.o_c, sample.gt)
            + bce_loss(outputs.o_edge, sample.edge)
            + bce_loss(outputs.o_sur, _surround_target(sample, cfg))
        ),
        "pred": cfg.w_pred * sum(bce_loss(p, sample.gt) for p in outputs.layer_preds),
    }
    if cfg.sac is not None:
        comps["sac"] = cfg.w_sac * sacloss_multi_layer(
            outputs.features, sample.gt, sample.lm.map, cfg.sac
        )
    else:
        comps["sac"] = 0.0
    return sum(comps.values()), comps


def _loss_and_grads(model: ToyModel, sample: SynthSample, cfg: TrainConfig):
    """Fused forward, loss, and parameter-gradient computation for one sample."""
    result = model.forward(sample.image)
    st = result.state

    head_grads: dict = {}
    v_c, g_c = _bce_value_and_logit_grad(st["oc_logit"], sample.gt)
    v_e, g_e = _bce_value_and_logit_grad(st["oedge_logit"], sample.edge)
    v_s, g_s = _bce_value_and_logit_grad(st["osur_logit"], _surround_target(sample, cfg))
    head_grads["oc_logit"] = cfg.w_coarse * g_c
    head_grads["oedge_logit"] = cfg.w_coarse * g_e
    head_grads["osur_logit"] = cfg.w_coarse * g_s
    coarse = cfg.w_coarse * (v_c + v_e + v_s)

    pred = 0.0
    pred_grads = []
    for logit in st["pred_logits"]:
        v, g = _bce_value_and_logit_grad(logit, sample.gt)
        pred += cfg.w_pred * v
        pred_grads.append(cfg.w_pred * g)
    head_grads["pred_logits"] = pred_grads

    sac = 0.0
    if cfg.sac is not None:
        value, fgrads = sacloss_multi_layer_grad(
            result.features, sample.gt, sample.lm.map, cfg.sac
        )
        sac = cfg.w_sac * value
        head_grads["features"] = {
            k: cfg.w_sac * g for (_, k), g in zip(result.features, fgrads)
        }

    grads = model.backward(result, head_grads)
    comps = {"coarse": coarse, "pred": pred, "sac": sac}
    return sum(comps.values()), comps, grads


@dataclass
class AdamState:
    """First/second moment accumulators keyed like the parameter dict."""

    beta1: float
    beta2: float
    eps: float
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def update(self, params: dict, grads: dict, lr: float) -> None:
        self.step += 1
        b1, b2 = self.beta1, self.beta2
        for key, g in grads.items():
            m = self.m.setdefault(key, np.zeros_like(g))
            v = self.v.setdefault(key, np.zeros_like(g))
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            m_hat = m / (1.0 - b1**self.step)
            v_hat = v / (1.0 - b2**self.step)
            params[key] -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(dataset: list, cfg: TrainConfig):
    """Train on the given samples; returns (model, per-epoch curve, held-out report).

    The last `holdout` samples (default: a quarter of the dataset, at
    least one) are kept for evaluation and never trained on. Aborts with a
    diagnostic if the loss turns non-finite.
    """
    if not dataset:
        raise ConfigError("dataset is empty")
    holdout = cfg.holdout or max(1, len(dataset) // 4)
    if holdout >= len(dataset):
        raise ConfigError(f"holdout {holdout} leaves no training samples")
    train_set = dataset[:-holdout]
    eval_set = dataset[-holdout:]

    rng = np.random.default_rng(cfg.seed)
    model = ToyModel(cfg.model_config(), rng)
    adam = AdamState(beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)

    curve = []
    for epoch in range(cfg.max_epochs):
        lr = learning_rate(cfg, epoch)
        order = rng.permutation(len(train_set))
        sums = {"total": 0.0, "coarse": 0.0, "pred": 0.0, "sac": 0.0}
        seen = 0
        for start in range(0, len(order), cfg.batch):
            batch = order[start : start + cfg.batch]
            acc = None
            for idx in batch:
                total, comps, grads = _loss_and_grads(model, train_set[idx], cfg)
                if not np.isfinite(total):
                    raise RuntimeError(
                        f"training diverged at epoch {epoch}: loss={total}, "
                        f"components={comps}"
                    )
                sums["total"] += total
                for name in ("coarse", "pred", "sac"):
                    sums[name] += comps[name]
                seen += 1
                if acc is None:
                    acc = grads
                else:
                    for key in acc:
                        acc[key] += grads[key]
            for key in acc:
                acc[key] /= len(batch)
            adam.update(model.params, acc, lr)
        curve.append(
            {
                "epoch": epoch,
                "lr": lr,
                "total": sums["total"] / seen,
                "coarse": sums["coarse"] / seen,
                "pred": sums["pred"] / seen,
                "sac": sums["sac"] / seen,
            }
        )

    rows = []
    for i, sample in enumerate(eval_set):
        result = model.forward(sample.image)
        rows.append(score_pair(result.o_f, sample.gt, stem=f"holdout-{i}"))
    means = None
    if rows:
        means = type(rows[0])(
            stem="mean",
            s_alpha=float(np.mean([r.s_alpha for r in rows])),
            f_wbeta=float(np.nanmean([r.f_wbeta for r in rows])),
            mae=float(np.mean([r.mae for r in rows])),
            e_phi=float(np.mean([r.e_phi for r in rows])),
        )
    report = MetricReport(rows=rows, means=means, unmatched=[])
    return model, curve, report

"""A tiny encoder with surrounding-aware heads and hand-written backprop.

Four conv+relu+avgpool stages produce layer features at side/2^k for
k = 1..4. On top of them sit:

* a coarse segmentation head on the deepest features,
* an edge head on the shallowest features,
* per layer k in {4, 3, 2}: texture and edge feature branches fused by a
  3x3 conv, a surrounding logit head whose sigmoid gates the fusion
  features into surrounding guidance, and an object guidance branch.

The coarse logit map is refined layer by layer (add object guidance,
subtract surrounding guidance, upsample x2), and every head/every
post-step map is bilinearly upsampled to the input resolution before the
sigmoid. There is no autodiff graph: `backward` walks the exact reverse
of `forward` using cached activations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    concat_channels,
    conv2d_mc,
    conv2d_mc_vjp,
    downsample_avg,
    sigmoid_map,
    upsample_bilinear,
    upsample_bilinear_vjp,
)
from .errors import ConfigError

REFINE_LAYERS = (4, 3, 2)

__all__ = ["ModelConfig", "ForwardResult", "ToyModel", "REFINE_LAYERS"]


@dataclass(frozen=True)
class ModelConfig:
    side: int = 64
    channels: tuple = (8, 16, 32, 64)
    guide_channels: int = 8

    def __post_init__(self):
        if self.side % 16:
            raise ConfigError(f"side must be divisible by 16 (4 pooling stages), got {self.side}")
        if len(self.channels) != 4:
            raise ConfigError(f"need 4 encoder channel counts, got {self.channels}")


@dataclass
class ForwardResult:
    """Probability maps at input resolution plus the per-layer fusion features."""

    o_c: np.ndarray
    o_edge: np.ndarray
    o_sur: np.ndarray
    o_f: np.ndarray
    layer_preds: list  # post-refinement probability maps, deepest first
    features: list  # [(fusion tensor, k)] for the contrastive loss
    state: dict = field(repr=False, default_factory=dict)


def _avgpool2(x: np.ndarray) -> np.ndarray:
    return downsample_avg(x, 2)


def _avgpool2_vjp(g: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(g, 2, axis=-2), 2, axis=-1) / 4.0


class ToyModel:
    """Parameter container plus hand-written forward/backward passes."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator | None = None):
        self.config = config
        self.params: dict[str, np.ndarray] = {}
        rng = rng or np.random.default_rng(0)
        ch = config.channels
        g = config.guide_channels
        self._add_conv(rng, "enc1", 3, ch[0])
        self._add_conv(rng, "enc2", ch[0], ch[1])
        self._add_conv(rng, "enc3", ch[1], ch[2])
        self._add_conv(rng, "enc4", ch[2], ch[3])
        self._add_conv(rng, "coarse", ch[3], 1)
        self._add_conv(rng, "edgehead", ch[0], 1)
        for k in REFINE_LAYERS:
            c_in = ch[k - 1]
            self._add_conv(rng, f"tex{k}", c_in, g)
            self._add_conv(rng, f"edg{k}", c_in, g)
            self._add_conv(rng, f"fuse{k}", 2 * g, g)
            self._add_conv(rng, f"sur{k}", c_in, 1)
            self._add_conv(rng, f"obj{k}", c_in, g)

    def _add_conv(self, rng, name: str, c_in: int, c_out: int, k: int = 3):
        scale = np.sqrt(2.0 / (c_in * k * k))
        self.params[f"{name}_w"] = rng.standard_normal((c_out, c_in, k, k)) * scale
        self.params[f"{name}_b"] = np.zeros(c_out)

    @classmethod
    def zeros(cls, config: ModelConfig) -> "ToyModel":
        model = cls(config)
        for key in model.params:
            model.params[key] = np.zeros_like(model.params[key])
        return model

    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def _conv(self, name: str, x: np.ndarray) -> np.ndarray:
        return conv2d_mc(x, self.params[f"{name}_w"], self.params[f"{name}_b"])

    def forward(self, image: np.ndarray) -> ForwardResult:
        cfg = self.config
        img = np.asarray(image, dtype=np.float64)
        if img.shape != (3, cfg.side, cfg.side):
            raise ConfigError(f"expected image (3, {cfg.side}, {cfg.side}), got {img.shape}")
        st: dict = {"image": img}

        feat = img
        for k in (1, 2, 3, 4):
            z = self._conv(f"enc{k}", feat)
            a = np.maximum(z, 0.0)
            feat = _avgpool2(a)
            st[f"enc{k}_in"], st[f"enc{k}_z"], st[f"f{k}"] = (
                st["image"] if k == 1 else st[f"f{k-1}"],
                z,
                feat,
            )

        st["oc4"] = self._conv("coarse", st["f4"])[0]
        st["oedge"] = self._conv("edgehead", st["f1"])[0]

        for k in REFINE_LAYERS:
            fk = st[f"f{k}"]
            st[f"tex{k}_z"] = self._conv(f"tex{k}", fk)
            t = np.maximum(st[f"tex{k}_z"], 0.0)
            st[f"edg{k}_z"] = self._conv(f"edg{k}", fk)
            e = np.maximum(st[f"edg{k}_z"], 0.0)
            st[f"cat{k}"] = concat_channels(t, e)
            fus = self._conv(f"fuse{k}", st[f"cat{k}"])
            st[f"fus{k}"] = fus
            st[f"surlogit{k}"] = self._conv(f"sur{k}", fk)[0]
            st[f"csur{k}"] = sigmoid_map(st[f"surlogit{k}"])
            st[f"gsur{k}"] = st[f"csur{k}"][None] * fus
            st[f"obj{k}_z"] = self._conv(f"obj{k}", fk)
            st[f"gobj{k}"] = np.maximum(st[f"obj{k}_z"], 0.0)

        # refinement chain on logits, deepest layer first
        r = st["oc4"]
        post_steps = []
        for k in REFINE_LAYERS:
            updated = r + st[f"gobj{k}"].mean(axis=0) - st[f"gsur{k}"].mean(axis=0)
            r = upsample_bilinear(updated, 2)
            post_steps.append(r)
        st["post_steps"] = post_steps

        # full-resolution logits
        factors = [cfg.side // p.shape[0] for p in post_steps]
        st["pred_logits"] = [upsample_bilinear(p, f) for p, f in zip(post_steps, factors)]
        st["oc_logit"] = upsample_bilinear(st["oc4"], 16)
        st["oedge_logit"] = upsample_bilinear(st["oedge"], 2)
        st["osur_logit"] = upsample_bilinear(st["surlogit2"], 4)
        st["of_logit"] = st["pred_logits"][-1]

        features = [(st[f"fus{k}"], k) for k in (2, 3, 4)]
        return ForwardResult(
            o_c=sigmoid_map(st["oc_logit"]),
            o_edge=sigmoid_map(st["oedge_logit"]),
            o_sur=sigmoid_map(st["osur_logit"]),
            o_f=sigmoid_map(st["of_logit"]),
            layer_preds=[sigmoid_map(p) for p in st["pred_logits"]],
            features=features,
            state=st,
        )

    def backward(self, result: ForwardResult, head_grads: dict) -> dict[str, np.ndarray]:
        """Parameter gradients given loss gradients at the public outputs.

        `head_grads` carries, all optional (missing means zero):
          * "oc_logit", "oedge_logit", "osur_logit" -- (side, side) arrays
          * "pred_logits" -- list of three (side, side) arrays, deepest first
          * "features" -- {k: (C, hk, wk) array} gradients on fusion features
        """
        st = result.state
        cfg = self.config
        grads = {key: np.zeros_like(val) for key, val in self.params.items()}
        dfeat = {k: np.zeros_like(st[f"f{k}"]) for k in (1, 2, 3, 4)}

        def conv_back(name: str, gout: np.ndarray, x: np.ndarray) -> np.ndarray:
            gx, gw, gb = conv2d_mc_vjp(gout, x, self.params[f"{name}_w"])
            grads[f"{name}_w"] += gw
            grads[f"{name}_b"] += gb
            return gx

        # full-resolution logit grads back to their source maps
        d_post = [np.zeros_like(p) for p in st["post_steps"]]
        for i, g in enumerate(head_grads.get("pred_logits", [])):
            if g is None:
                continue
            p = st["post_steps"][i]
            factor = cfg.side // p.shape[0]
            d_post[i] += upsample_bilinear_vjp(g, p.shape, factor)

        doc4 = np.zeros_like(st["oc4"])
        if "oc_logit" in head_grads:
            doc4 += upsample_bilinear_vjp(head_grads["oc_logit"], st["oc4"].shape, 16)
        doedge = np.zeros_like(st["oedge"])
        if "oedge_logit" in head_grads:
            doedge += upsample_bilinear_vjp(head_grads["oedge_logit"], st["oedge"].shape, 2)
        dsur2_head = np.zeros_like(st["surlogit2"])
        if "osur_logit" in head_grads:
            dsur2_head += upsample_bilinear_vjp(head_grads["osur_logit"], st["surlogit2"].shape, 4)

        # refinement chain, reverse order: each step's pre-upsample update
        # receives the vjp of its own supervision plus everything downstream
        dguide = {}
        carry = np.zeros_like(st["post_steps"][-1])
        inputs = [st["oc4"]] + st["post_steps"][:-1]
        for i in reversed(range(len(REFINE_LAYERS))):
            k = REFINE_LAYERS[i]
            carry = upsample_bilinear_vjp(d_post[i] + carry, inputs[i].shape, 2)
            dguide[k] = carry
            if i == 0:
                doc4 += carry

        dfus_sac = head_grads.get("features", {})
        for k in REFINE_LAYERS:
            du = dguide[k]
            g = cfg.guide_channels
            dgobj = np.broadcast_to(du / g, st[f"gobj{k}"].shape).copy()
            dgsur = np.broadcast_to(-du / g, st[f"gsur{k}"].shape).copy()

            dfus = dgsur * st[f"csur{k}"][None]
            if k in dfus_sac and dfus_sac[k] is not None:
                dfus = dfus + dfus_sac[k]
            dcsur = (dgsur * st[f"fus{k}"]).sum(axis=0)
            dsurlogit = dcsur * st[f"csur{k}"] * (1.0 - st[f"csur{k}"])
            if k == 2:
                dsurlogit = dsurlogit + dsur2_head

            fk = st[f"f{k}"]
            dfeat[k] += conv_back(f"sur{k}", dsurlogit[None], fk)
            dobj_z = dgobj * (st[f"obj{k}_z"] > 0.0)
            dfeat[k] += conv_back(f"obj{k}", dobj_z, fk)

            dcat = conv_back(f"fuse{k}", dfus, st[f"cat{k}"])
            dt = dcat[:g] * (st[f"tex{k}_z"] > 0.0)
            de = dcat[g:] * (st[f"edg{k}_z"] > 0.0)
            dfeat[k] += conv_back(f"tex{k}", dt, fk)
            dfeat[k] += conv_back(f"edg{k}", de, fk)

        dfeat[4] += conv_back("coarse", doc4[None], st["f4"])
        dfeat[1] += conv_back("edgehead", doedge[None], st["f1"])

        carry_enc = None
        for k in (4, 3, 2, 1):
            g_total = dfeat[k] if carry_enc is None else dfeat[k] + carry_enc
            da = _avgpool2_vjp(g_total)
            dz = da * (st[f"enc{k}_z"] > 0.0)
            carry_enc = conv_back(f"enc{k}", dz, st[f"enc{k}_in"])
        return grads

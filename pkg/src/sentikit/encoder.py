"""Small trainable transformer encoder (post-layer-norm, GELU, learned positions).

Parameters live in a flat name -> Tensor dict so the optimizer, checkpoint
container, and finite-difference checks can treat them uniformly. Output
heads are zero-initialized: an untrained model predicts exactly uniform
distributions, which several bookkeeping tests rely on.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ContractError, NumericalError

LN_EPS = 1e-5
NEG_INF = -1e9


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    n_layers: int = 2
    hidden_dim: int = 64
    n_heads: int = 2
    ffn_dim: int = 256
    max_seq_len: int = 128
    dropout_rate: float = 0.1
    init_std: float = 0.02
    ap_mode: str = "sent_vector"  # sent_vector | pair_vector (sizes the AP head)

    def __post_init__(self):
        if self.hidden_dim % self.n_heads != 0:
            raise ContractError(
                f"hidden_dim {self.hidden_dim} not divisible by n_heads {self.n_heads}")
        if self.vocab_size < 5:
            raise ContractError("vocab_size must cover the specials")
        if self.ap_mode not in ("sent_vector", "pair_vector"):
            raise ContractError(f"unknown ap_mode {self.ap_mode!r}")

    @property
    def ap_input_dim(self) -> int:
        return self.hidden_dim * (2 if self.ap_mode == "pair_vector" else 1)

    def to_dict(self) -> dict:
        return asdict(self)


# named presets; the larger ones document shape only, not trainability here
PRESETS = {
    "toy": dict(n_layers=2, hidden_dim=64, n_heads=2, ffn_dim=256, max_seq_len=128),
    "base": dict(n_layers=12, hidden_dim=768, n_heads=12, ffn_dim=3072, max_seq_len=512),
    "large": dict(n_layers=24, hidden_dim=1024, n_heads=16, ffn_dim=4096, max_seq_len=512),
}


def init_params(config: EncoderConfig, rng: np.random.Generator,
                dtype=np.float64) -> dict:
    """Fresh parameter dict. Weights ~ N(0, init_std); heads start at zero."""
    std = config.init_std
    H, F, V = config.hidden_dim, config.ffn_dim, config.vocab_size

    def w(*shape):
        return ag.parameter(rng.normal(0.0, std, size=shape).astype(dtype))

    def zeros(*shape):
        return ag.parameter(np.zeros(shape, dtype=dtype))

    def ones(*shape):
        return ag.parameter(np.ones(shape, dtype=dtype))

    p = {
        "tok_emb": w(V, H),
        "pos_emb": w(config.max_seq_len, H),
        "emb_ln_g": ones(H),
        "emb_ln_b": zeros(H),
    }
    for i in range(config.n_layers):
        pre = f"layer{i}."
        p[pre + "attn_q_w"] = w(H, H)
        p[pre + "attn_q_b"] = zeros(H)
        p[pre + "attn_k_w"] = w(H, H)
        p[pre + "attn_k_b"] = zeros(H)
        p[pre + "attn_v_w"] = w(H, H)
        p[pre + "attn_v_b"] = zeros(H)
        p[pre + "attn_o_w"] = w(H, H)
        p[pre + "attn_o_b"] = zeros(H)
        p[pre + "ln1_g"] = ones(H)
        p[pre + "ln1_b"] = zeros(H)
        p[pre + "ffn_w1"] = w(H, F)
        p[pre + "ffn_b1"] = zeros(F)
        p[pre + "ffn_w2"] = w(F, H)
        p[pre + "ffn_b2"] = zeros(H)
        p[pre + "ln2_g"] = ones(H)
        p[pre + "ln2_b"] = zeros(H)
    # prediction heads: word (shared by AP-I), polarity, pair
    p["lm_w"] = zeros(H, V)
    p["lm_b"] = zeros(V)
    p["wp_w"] = zeros(H, 2)
    p["wp_b"] = zeros(2)
    p["ap_w"] = zeros(config.ap_input_dim, V)
    p["ap_b"] = zeros(V)
    return p


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LN_EPS) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered * ((var + eps) ** -0.5) * gain + bias


@dataclass
class EncoderOutput:
    states: Tensor               # (B, T, H) final states; position 0 = [CLS]
    attentions: list = field(default_factory=list)  # per layer (B, heads, T, T)


def forward(params: dict, config: EncoderConfig, token_ids, attn_mask=None,
            train: bool = False, rng: np.random.Generator | None = None,
            retain_attention: bool = False) -> EncoderOutput:
    """Run the encoder. Deterministic in eval mode; train mode needs an rng."""
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    B, T = ids.shape
    if T > config.max_seq_len:
        raise ContractError(f"sequence length {T} exceeds max_seq_len {config.max_seq_len}")
    if ids.min() < 0 or ids.max() >= config.vocab_size:
        raise ContractError("token id outside vocabulary")
    if train and config.dropout_rate > 0 and rng is None:
        raise ContractError("train-mode forward needs an rng for dropout")

    if attn_mask is None:
        mask = np.ones((B, T), dtype=np.float64)
    else:
        mask = np.asarray(attn_mask, dtype=np.float64)
        if mask.ndim == 1:
            mask = mask[None, :]
        if mask.shape != (B, T):
            raise ContractError("attn_mask shape mismatch")
    # additive key mask, broadcast over (batch, head, query)
    add_mask = ((1.0 - mask) * NEG_INF)[:, None, None, :]

    dh = config.hidden_dim // config.n_heads
    drop = config.dropout_rate

    x = ag.embedding(params["tok_emb"], ids) + ag.embedding(
        params["pos_emb"], np.broadcast_to(np.arange(T), (B, T)))
    x = layer_norm(x, params["emb_ln_g"], params["emb_ln_b"])
    x = ag.dropout(x, drop, rng, train)

    attentions = []
    for i in range(config.n_layers):
        pre = f"layer{i}."

        def split_heads(t):
            return ag.transpose(ag.reshape(t, (B, T, config.n_heads, dh)), (0, 2, 1, 3))

        q = split_heads(ag.matmul(x, params[pre + "attn_q_w"]) + params[pre + "attn_q_b"])
        k = split_heads(ag.matmul(x, params[pre + "attn_k_w"]) + params[pre + "attn_k_b"])
        v = split_heads(ag.matmul(x, params[pre + "attn_v_w"]) + params[pre + "attn_v_b"])
        scores = ag.matmul(q, ag.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dh))
        scores = scores + Tensor(add_mask)
        probs = ag.softmax(scores, axis=-1)
        if retain_attention:
            attentions.append(probs.data.copy())
        probs = ag.dropout(probs, drop, rng, train)
        ctx = ag.matmul(probs, v)  # (B, heads, T, dh)
        ctx = ag.reshape(ag.transpose(ctx, (0, 2, 1, 3)), (B, T, config.hidden_dim))
        attn_out = ag.matmul(ctx, params[pre + "attn_o_w"]) + params[pre + "attn_o_b"]
        attn_out = ag.dropout(attn_out, drop, rng, train)
        x = layer_norm(x + attn_out, params[pre + "ln1_g"], params[pre + "ln1_b"])

        h = ag.gelu(ag.matmul(x, params[pre + "ffn_w1"]) + params[pre + "ffn_b1"])
        h = ag.matmul(h, params[pre + "ffn_w2"]) + params[pre + "ffn_b2"]
        h = ag.dropout(h, drop, rng, train)
        x = layer_norm(x + h, params[pre + "ln2_g"], params[pre + "ln2_b"])

    if not np.all(np.isfinite(x.data)):
        raise NumericalError("non-finite activations in encoder forward")
    return EncoderOutput(x, attentions)


def check_params(params: dict, config: EncoderConfig):
    """Shape/finiteness audit; raises on drift between config and tensors."""
    expected = init_params(config, np.random.default_rng(0))
    missing = sorted(set(expected) - set(params))
    extra = sorted(set(params) - set(expected))
    if missing or extra:
        raise ContractError(f"parameter set mismatch: missing={missing} extra={extra}")
    for k, t in params.items():
        if t.data.shape != expected[k].data.shape:
            raise ContractError(
                f"{k}: shape {t.data.shape} != expected {expected[k].data.shape}")
        if not np.all(np.isfinite(t.data)):
            raise NumericalError(f"{k}: non-finite parameter values")

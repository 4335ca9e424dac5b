"""Deep field-aware factorization machine: forward pass, adaptive-rate
backward pass with ReLU-aware sparse update skipping, and the flat weight
store whose byte layout the transfer toolkit depends on.

Architecture, per example:

    lr_out   = bias + sum_j w_j x_j
    pairs[p] = <S(f1 -> f2), S(f2 -> f1)>                 for field pairs f1 < f2
               where S(f -> g) = sum_{j in f} w_{j,g} x_j  (k-dim latent sums)
    merged   = standardize([lr_out] ++ pairs)             (mean/std, eps 1e-6)
    logit    = mlp(merged) + lr_out + sum(pairs)

With no hidden layers the mlp block is absent and the logit degrades to the
plain residual sum, so a linear/FFM-only model is a configuration, not a
separate code path. All weights are float32 in one flat, deterministically
laid out array (block order lr -> ffm -> mlp layers -> optimizer
accumulators, row-major within blocks); updates do their arithmetic in
float64 and store back to float32.

The flat array lives in an anonymous shared mmap so that forked worker
processes update the same physical pages (see the training module's
lock-free parallel mode).
"""

from __future__ import annotations

import json
import math
import mmap
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ContractError, FormatError, NumericError, SizingError

MERGE_EPS = 1e-6
PROB_CLAMP = 1e-7
MODEL_MAGIC = b"FWM1"
MODEL_VERSION = 1
DEFAULT_MAX_SLOTS = 1 << 31  # float32 slots, weights + accumulators


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and optimizer hyperparameters.

    Per-block base learning rates follow the three block types; ``power_t``
    shapes the adaptive rate ``lr * acc**(-power_t)`` where ``acc`` is the
    accumulated squared gradient of the individual weight.
    """

    n_fields: int
    k: int = 4
    hidden_sizes: tuple[int, ...] = ()
    lr_ffm: float = 0.05
    lr_lr: float = 0.05
    lr_nn: float = 0.01
    power_t: float = 0.5
    hash_bits: int = 18
    init_seed: int = 0
    init_scale_ffm: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.n_fields < 1:
            raise ContractError("n_fields must be >= 1")
        if self.k < 1:
            raise ContractError("k must be >= 1")
        if len(self.hidden_sizes) > 4:
            raise ContractError("at most 4 hidden layers are supported")
        if any(h < 1 for h in self.hidden_sizes):
            raise ContractError("hidden layer sizes must be positive")
        if min(self.lr_ffm, self.lr_lr, self.lr_nn) <= 0:
            raise ContractError("learning rates must be positive")
        if not 0.0 <= self.power_t <= 1.0:
            raise ContractError("power_t must lie in [0, 1]")
        if not 1 <= self.hash_bits <= 29:
            raise ContractError("hash_bits must lie in [1, 29]")
        # 0 disables the interaction block entirely: latent vectors start at
        # zero and, having multiplicative-zero gradients, stay there. That is
        # how the linear-only baseline is expressed.
        if self.init_scale_ffm < 0:
            raise ContractError("init_scale_ffm must be >= 0")
        if not 0 <= self.init_seed < 1 << 64:
            raise ContractError("init_seed must fit in 64 bits")

    def to_json(self) -> str:
        d = {
            "n_fields": self.n_fields,
            "k": self.k,
            "hidden_sizes": list(self.hidden_sizes),
            "lr_ffm": self.lr_ffm,
            "lr_lr": self.lr_lr,
            "lr_nn": self.lr_nn,
            "power_t": self.power_t,
            "hash_bits": self.hash_bits,
            "init_seed": self.init_seed,
            "init_scale_ffm": self.init_scale_ffm,
        }
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        try:
            d = json.loads(text)
            d["hidden_sizes"] = tuple(d["hidden_sizes"])
            return cls(**d)
        except (ValueError, TypeError, KeyError) as exc:
            raise FormatError(f"bad model config payload: {exc}") from None


@lru_cache(maxsize=64)
def _pair_indices(n_fields: int) -> tuple[np.ndarray, np.ndarray]:
    """Strict upper-triangle field pairs, row-major: (0,1), (0,2), ..."""
    iu, ju = np.triu_indices(n_fields, k=1)
    return iu.astype(np.int64), ju.astype(np.int64)


@lru_cache(maxsize=64)
def pair_position(n_fields: int) -> np.ndarray:
    """(F, F) lookup from an unordered field pair to its output slot."""
    iu, ju = _pair_indices(n_fields)
    pos = np.full((n_fields, n_fields), -1, dtype=np.int64)
    pos[iu, ju] = np.arange(len(iu))
    pos[ju, iu] = pos[iu, ju]
    return pos


class OpCounter:
    """Counts multiply-add units in interaction-block inner loops."""

    __slots__ = ("madds",)

    def __init__(self):
        self.madds = 0

    def add(self, n: int):
        self.madds += int(n)


class WeightStore:
    """Flat float32 weight/accumulator array with named block views.

    Layout (element offsets within one contiguous little-endian float32
    array; this order is the serialization order and is frozen):

        [0, 2^bits)                  lr weights, indexed by feature hash
        [2^bits]                     lr bias
        [ffm_offset, +2^bits*F*k)    latent vectors, row (j*F + f)*k is
                                     feature j's k-vector toward field f
        per mlp layer:               in*out matrix row-major, then out biases
        [acc_offset, 2*weights)      accumulators, mirroring the above

    ``version`` counts mutations; context caches key on it to detect
    staleness. Forked worker processes share the backing pages but not this
    counter, so the parent bumps it once per parallel training round.
    """

    def __init__(self, config: ModelConfig):
        self.config = config
        f, k = config.n_fields, config.k
        self.n_features = 1 << config.hash_bits
        self.n_pairs = f * (f - 1) // 2
        self.merged_width = 1 + self.n_pairs

        self.lr_size = self.n_features + 1
        self.ffm_size = self.n_features * f * k
        if config.hidden_sizes:
            dims = [self.merged_width, *config.hidden_sizes, 1]
            self.nn_dims = list(zip(dims[:-1], dims[1:]))
        else:
            self.nn_dims = []
        self.nn_size = sum(i * o + o for i, o in self.nn_dims)
        self.weights_total = self.lr_size + self.ffm_size + self.nn_size
        self.total_slots = 2 * self.weights_total

        self._mmap = mmap.mmap(-1, self.total_slots * 4)
        self.flat = np.frombuffer(self._mmap, dtype=np.float32)
        self.version = 0

        self.ffm_offset = self.lr_size
        self.nn_offset = self.ffm_offset + self.ffm_size
        self.acc_offset = self.weights_total

        self.lr = self.flat[: self.lr_size]
        self.ffm = self.flat[self.ffm_offset : self.nn_offset].reshape(
            self.n_features, f, k
        )
        self.lr_acc = self.flat[self.acc_offset : self.acc_offset + self.lr_size]
        self.ffm_acc = self.flat[
            self.acc_offset + self.ffm_offset : self.acc_offset + self.nn_offset
        ].reshape(self.n_features, f, k)

        self.nn_layers: list[tuple[np.ndarray, np.ndarray]] = []
        self.nn_accs: list[tuple[np.ndarray, np.ndarray]] = []
        off = self.nn_offset
        for i_dim, o_dim in self.nn_dims:
            w = self.flat[off : off + i_dim * o_dim].reshape(i_dim, o_dim)
            b = self.flat[off + i_dim * o_dim : off + i_dim * o_dim + o_dim]
            wa = self.flat[
                self.acc_offset + off : self.acc_offset + off + i_dim * o_dim
            ].reshape(i_dim, o_dim)
            ba = self.flat[
                self.acc_offset + off + i_dim * o_dim :
                self.acc_offset + off + i_dim * o_dim + o_dim
            ]
            self.nn_layers.append((w, b))
            self.nn_accs.append((wa, ba))
            off += i_dim * o_dim + o_dim

        self.pair_iu, self.pair_ju = _pair_indices(f)

    @property
    def bias(self) -> float:
        return float(self.lr[self.n_features])

    def weight_values(self, include_optimizer: bool = True) -> np.ndarray:
        """View of the flat weights in layout order (no header)."""
        n = self.total_slots if include_optimizer else self.weights_total
        return self.flat[:n]

    def copy(self) -> "WeightStore":
        dup = WeightStore(self.config)
        dup.flat[:] = self.flat
        dup.version = self.version
        return dup

    def mark_mutated(self):
        self.version += 1


def init_model(config: ModelConfig, max_slots: int = DEFAULT_MAX_SLOTS) -> WeightStore:
    """Allocate and deterministically initialize a weight store.

    lr weights start at zero, latent entries i.i.d. uniform in
    (0, init_scale_ffm/sqrt(k)], mlp matrices uniform Xavier
    (+-sqrt(6/(in+out))) with zero biases, and every accumulator at 1.0 so
    ``acc**(-power_t)`` is defined from the first step.
    """
    f, k = config.n_fields, config.k
    n_features = 1 << config.hash_bits
    merged = 1 + f * (f - 1) // 2
    nn = 0
    if config.hidden_sizes:
        dims = [merged, *config.hidden_sizes, 1]
        nn = sum(i * o + o for i, o in zip(dims[:-1], dims[1:]))
    total = 2 * (n_features + 1 + n_features * f * k + nn)
    if total > max_slots:
        raise SizingError(
            f"model wants {total} float32 slots, cap is {max_slots};"
            " lower hash_bits, k, or the layer widths"
        )

    store = WeightStore(config)
    rng = np.random.default_rng(config.init_seed)
    if config.init_scale_ffm > 0:
        scale = config.init_scale_ffm / math.sqrt(k)
        # 1 - random() lands in (0, 1]: keeps latent entries off exact zero,
        # which is the multiplicative fixed point of the interaction block.
        store.flat[store.ffm_offset : store.nn_offset] = scale * (
            1.0 - rng.random(store.ffm_size)
        )
    off = store.nn_offset
    for i_dim, o_dim in store.nn_dims:
        limit = math.sqrt(6.0 / (i_dim + o_dim))
        store.flat[off : off + i_dim * o_dim] = rng.uniform(
            -limit, limit, i_dim * o_dim
        )
        off += i_dim * o_dim + o_dim  # biases stay zero
    store.flat[store.acc_offset :] = 1.0
    return store


@dataclass
class ForwardState:
    """Per-example intermediates kept for the backward pass."""

    lr_out: float
    ffm_pair_outputs: np.ndarray  # float64 (n_pairs,)
    merged_input: np.ndarray  # float64 (1 + n_pairs,)
    layer_pre_acts: list[np.ndarray]
    layer_acts: list[np.ndarray]
    logit: float
    latent_sums: np.ndarray = field(repr=False, default=None)  # (F, F, k)
    merge_vec: np.ndarray = field(repr=False, default=None)
    merge_mu: float = 0.0
    merge_sd: float = 0.0
    _store: WeightStore = field(repr=False, default=None)
    _store_version: int = 0


def _sigmoid(logit: float) -> float:
    if logit >= 0:
        return 1.0 / (1.0 + math.exp(-min(logit, 60.0)))
    e = math.exp(max(logit, -60.0))
    return e / (1.0 + e)


def predict_proba(logit: float) -> float:
    """Sigmoid clamped to [1e-7, 1 - 1e-7] so log-loss stays finite."""
    if not math.isfinite(logit):
        raise NumericError("non-finite logit", block="logit")
    p = _sigmoid(logit)
    return min(max(p, PROB_CLAMP), 1.0 - PROB_CLAMP)


def _diagnose_nonfinite(state: ForwardState) -> str:
    if not math.isfinite(state.lr_out):
        return "lr"
    if not np.isfinite(state.ffm_pair_outputs).all():
        return "ffm"
    if not np.isfinite(state.merged_input).all():
        return "merge"
    for z in state.layer_pre_acts:
        if not np.isfinite(z).all():
            return "nn"
    return "logit"


def forward(example, store: WeightStore, mac_counter: OpCounter | None = None) -> ForwardState:
    """Run one example through all blocks, retaining intermediates."""
    cfg = store.config
    f_count, k = cfg.n_fields, cfg.k
    lr_w = store.lr

    lr_out = float(lr_w[store.n_features])
    s = np.zeros((f_count, f_count, k))
    present = np.zeros(f_count, dtype=bool)
    for ff in example.fields:
        if ff.field_id >= f_count:
            raise ContractError(
                f"field id {ff.field_id} outside model's {f_count} fields"
            )
        m = len(ff)
        if m == 0:
            continue
        lr_out += float(np.dot(lr_w[ff.indices], ff.values))
        s[ff.field_id] += np.tensordot(ff.values, store.ffm[ff.indices], axes=(0, 0))
        present[ff.field_id] = True
        if mac_counter is not None:
            mac_counter.add(m + m * f_count * k)

    iu, ju = store.pair_iu, store.pair_ju
    pair_out = np.zeros(store.n_pairs)
    active = present[iu] & present[ju]
    n_active = int(active.sum())
    if n_active:
        a = s[iu[active], ju[active]]
        b = s[ju[active], iu[active]]
        pair_out[active] = np.einsum("ak,ak->a", a, b)
        if mac_counter is not None:
            mac_counter.add(n_active * k)

    v = np.empty(store.merged_width)
    v[0] = lr_out
    v[1:] = pair_out
    mu = float(v.mean())
    sd = float(v.std())
    merged = (v - mu) / (sd + MERGE_EPS)

    pre_acts: list[np.ndarray] = []
    acts: list[np.ndarray] = []
    nn_out = 0.0
    if store.nn_layers:
        a = merged
        for w, b in store.nn_layers[:-1]:
            z = a @ w + b
            pre_acts.append(z)
            a = np.maximum(z, 0.0)
            acts.append(a)
        w_out, b_out = store.nn_layers[-1]
        nn_out = float(a @ w_out[:, 0] + b_out[0])
        if mac_counter is not None:
            mac_counter.add(sum(i * o for i, o in store.nn_dims))

    logit = nn_out + lr_out + float(pair_out.sum())
    state = ForwardState(
        lr_out=lr_out,
        ffm_pair_outputs=pair_out,
        merged_input=merged,
        layer_pre_acts=pre_acts,
        layer_acts=acts,
        logit=logit,
        latent_sums=s,
        merge_vec=v,
        merge_mu=mu,
        merge_sd=sd,
        _store=store,
        _store_version=store.version,
    )
    if not math.isfinite(logit):
        raise NumericError(
            f"non-finite value in {_diagnose_nonfinite(state)} block",
            block=_diagnose_nonfinite(state),
        )
    return state


def _inv_pow(acc: np.ndarray, power_t: float) -> np.ndarray:
    """acc**(-power_t) for float64 accumulators; sqrt fast path for 0.5."""
    if power_t == 0.5:
        return 1.0 / np.sqrt(acc)
    return np.power(acc, -power_t)


def _inv_pow_scalar(acc: float, power_t: float) -> float:
    if power_t == 0.5:
        return 1.0 / math.sqrt(acc)
    return acc ** -power_t


def _merge_backward(state: ForwardState, d_merged: np.ndarray) -> np.ndarray:
    """Gradient of the standardization layer w.r.t. its raw input vector."""
    d = len(state.merge_vec)
    denom = state.merge_sd + MERGE_EPS
    dv = (d_merged - d_merged.mean()) / denom
    if state.merge_sd > 0.0:
        c = state.merge_vec - state.merge_mu
        dv = dv - c * (float(np.dot(d_merged, c)) / (d * state.merge_sd * denom * denom))
    return dv


def _merge_unique(indices: np.ndarray, grads: np.ndarray):
    """Sum gradient rows that hit the same weight index.

    Hash collisions make duplicates possible both within and across fields;
    the adaptive update is nonlinear in the per-weight gradient, so rows
    must be combined before the update, not scattered twice.
    """
    uidx, inverse = np.unique(indices, return_inverse=True)
    if len(uidx) == len(indices):
        order = np.argsort(indices)
        return uidx, grads[order]
    merged = np.zeros((len(uidx),) + grads.shape[1:])
    np.add.at(merged, inverse, grads)
    return uidx, merged


def backward_update(
    state: ForwardState, example, label: int, store: WeightStore, sparse: bool = True
) -> float:
    """Backpropagate one example and apply adaptive-rate updates in place.

    Every weight moves by ``-lr_block * g * acc**(-power_t)`` where ``acc``
    is its accumulated squared gradient after adding ``g**2``. With
    ``sparse=True``, matrix rows/columns whose gradient is provably zero
    (dead ReLU units on either side) are never touched; results are
    numerically identical to the dense path. Returns the example's log-loss.
    """
    if state._store is not store or state._store_version != store.version:
        raise ContractError("forward state was not produced against this store state")
    if label not in (0, 1):
        raise ContractError(f"label must be 0 or 1, got {label!r}")
    cfg = store.config
    p_raw = _sigmoid(state.logit)
    g = p_raw - label
    if not math.isfinite(g):
        raise NumericError("non-finite loss gradient", block="loss")
    p = min(max(p_raw, PROB_CLAMP), 1.0 - PROB_CLAMP)
    loss = -math.log(p) if label else -math.log1p(-p)
    pt = cfg.power_t

    # --- mlp block, output to input ------------------------------------
    if store.nn_layers:
        d = np.array([g])
        inputs = [state.merged_input] + state.layer_acts
        for i in range(len(store.nn_layers) - 1, -1, -1):
            a_in = inputs[i]
            w, b = store.nn_layers[i]
            w_acc, b_acc = store.nn_accs[i]
            # Upstream gradient first, from the pre-update weights. Computed
            # the same way in both modes: zero entries of d contribute
            # nothing, and a single code path keeps the modes bit-identical.
            da_in = w @ d
            _update_matrix(w, w_acc, a_in, d, cfg.lr_nn, pt, sparse)
            _update_bias(b, b_acc, d, cfg.lr_nn, pt, sparse)
            if i > 0:
                d = da_in * (state.layer_pre_acts[i - 1] > 0.0)
            else:
                d_merged = da_in
        dv = _merge_backward(state, d_merged)
        d_lr = g + float(dv[0])
        d_pairs = g + dv[1:]
    else:
        d_lr = g
        d_pairs = np.full(store.n_pairs, g)

    # --- interaction block ----------------------------------------------
    f_count, k = cfg.n_fields, cfg.k
    if store.n_pairs:
        dp = np.zeros((f_count, f_count))
        iu, ju = store.pair_iu, store.pair_ju
        dp[iu, ju] = d_pairs
        dp[ju, iu] = d_pairs
        idx_parts = []
        grad_parts = []
        for ff in example.fields:
            if len(ff) == 0:
                continue
            t = dp[ff.field_id][:, None] * state.latent_sums[:, ff.field_id, :]
            if not t.any():
                continue
            idx_parts.append(ff.indices)
            grad_parts.append(ff.values[:, None, None] * t[None, :, :])
        if idx_parts:
            idx = np.concatenate(idx_parts)
            grads = np.concatenate(grad_parts)
            uidx, ug = _merge_unique(idx, grads)
            acc = store.ffm_acc[uidx].astype(np.float64)
            acc += ug * ug
            store.ffm_acc[uidx] = acc
            store.ffm[uidx] = store.ffm[uidx] - cfg.lr_ffm * ug * _inv_pow(acc, pt)

    # --- linear block ----------------------------------------------------
    idx_parts = [ff.indices for ff in example.fields if len(ff)]
    if idx_parts:
        idx = np.concatenate(idx_parts)
        vals = np.concatenate([ff.values for ff in example.fields if len(ff)])
        uidx, ug = _merge_unique(idx, d_lr * vals)
        acc = store.lr_acc[uidx].astype(np.float64)
        acc += ug * ug
        store.lr_acc[uidx] = acc
        store.lr[uidx] = store.lr[uidx] - cfg.lr_lr * ug * _inv_pow(acc, pt)
    bias_pos = store.n_features
    acc_b = float(store.lr_acc[bias_pos]) + d_lr * d_lr
    store.lr_acc[bias_pos] = acc_b
    store.lr[bias_pos] = float(store.lr[bias_pos]) - cfg.lr_lr * d_lr * _inv_pow_scalar(
        acc_b, pt
    )

    store.version += 1
    return loss


def _update_matrix(w, w_acc, a_in, d, lr, power_t, sparse):
    if sparse:
        rows = np.flatnonzero(a_in)
        cols = np.flatnonzero(d)
        if len(rows) == 0 or len(cols) == 0:
            return
        if len(rows) < len(a_in) or len(cols) < len(d):
            ix = np.ix_(rows, cols)
            grad = np.outer(a_in[rows], d[cols])
            acc = w_acc[ix].astype(np.float64)
            acc += grad * grad
            w_acc[ix] = acc
            w[ix] = w[ix] - lr * grad * _inv_pow(acc, power_t)
            return
    grad = np.outer(a_in, d)
    acc = w_acc.astype(np.float64)
    acc += grad * grad
    w_acc[...] = acc
    w[...] = w - lr * grad * _inv_pow(acc, power_t)


def _update_bias(b, b_acc, d, lr, power_t, sparse):
    if sparse:
        cols = np.flatnonzero(d)
        if len(cols) == 0:
            return
        if len(cols) < len(d):
            grad = d[cols]
            acc = b_acc[cols].astype(np.float64)
            acc += grad * grad
            b_acc[cols] = acc
            b[cols] = b[cols] - lr * grad * _inv_pow(acc, power_t)
            return
    acc = b_acc.astype(np.float64)
    acc += d * d
    b_acc[...] = acc
    b[...] = b - lr * d * _inv_pow(acc, power_t)


def loss_gradients(state: ForwardState, example, label: int, store: WeightStore) -> np.ndarray:
    """Dense float64 gradient of the log-loss over the full weight layout.

    Independent of the fused update path; used by gradient checks and
    diagnostics. Entry order matches the flat store layout (weights only,
    no accumulator block).
    """
    if state._store is not store or state._store_version != store.version:
        raise ContractError("forward state was not produced against this store state")
    cfg = store.config
    g = _sigmoid(state.logit) - label
    out = np.zeros(store.weights_total)

    if store.nn_layers:
        d = np.array([g])
        inputs = [state.merged_input] + state.layer_acts
        off = store.nn_offset
        layer_offsets = []
        for i_dim, o_dim in store.nn_dims:
            layer_offsets.append(off)
            off += i_dim * o_dim + o_dim
        for i in range(len(store.nn_layers) - 1, -1, -1):
            a_in = inputs[i]
            w, _ = store.nn_layers[i]
            i_dim, o_dim = store.nn_dims[i]
            base = layer_offsets[i]
            out[base : base + i_dim * o_dim] = np.outer(a_in, d).ravel()
            out[base + i_dim * o_dim : base + i_dim * o_dim + o_dim] = d
            da_in = w @ d
            if i > 0:
                d = da_in * (state.layer_pre_acts[i - 1] > 0.0)
            else:
                dv = _merge_backward(state, da_in)
        d_lr = g + float(dv[0])
        d_pairs = g + dv[1:]
    else:
        d_lr = g
        d_pairs = np.full(store.n_pairs, g)

    f_count = cfg.n_fields
    if store.n_pairs:
        dp = np.zeros((f_count, f_count))
        iu, ju = store.pair_iu, store.pair_ju
        dp[iu, ju] = d_pairs
        dp[ju, iu] = d_pairs
        for ff in example.fields:
            if len(ff) == 0:
                continue
            t = dp[ff.field_id][:, None] * state.latent_sums[:, ff.field_id, :]
            rows = ff.values[:, None, None] * t[None, :, :]
            flat_base = store.ffm_offset + ff.indices * (f_count * cfg.k)
            for r, base in zip(rows, flat_base):
                out[base : base + f_count * cfg.k] += r.ravel()

    for ff in example.fields:
        if len(ff) == 0:
            continue
        np.add.at(out, ff.indices, d_lr * ff.values)
    out[store.n_features] += d_lr
    return out


# --- serialization ---------------------------------------------------------


def _header_bytes(config: ModelConfig, include_optimizer: bool) -> bytes:
    payload = config.to_json().encode("utf-8")
    return (
        MODEL_MAGIC
        + MODEL_VERSION.to_bytes(4, "little")
        + len(payload).to_bytes(4, "little")
        + payload
        + bytes([1 if include_optimizer else 0])
    )


def flat_weight_view(store: WeightStore, include_optimizer: bool = True) -> bytes:
    """Serialize the store: header plus flat little-endian float32 block.

    ``include_optimizer=False`` drops the accumulator block, halving the
    payload; that is the form shipped for inference.
    """
    values = store.weight_values(include_optimizer)
    return _header_bytes(store.config, include_optimizer) + values.astype(
        "<f4", copy=False
    ).tobytes()


def store_from_bytes(data: bytes) -> WeightStore:
    if data[:4] != MODEL_MAGIC:
        raise FormatError("not a model file (bad magic)")
    version = int.from_bytes(data[4:8], "little")
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model file version {version}")
    n = int.from_bytes(data[8:12], "little")
    if len(data) < 12 + n + 1:
        raise FormatError("truncated model header")
    config = ModelConfig.from_json(data[12 : 12 + n].decode("utf-8"))
    has_opt = data[12 + n] == 1
    body = np.frombuffer(data[13 + n :], dtype="<f4")
    store = WeightStore(config)
    expected = store.total_slots if has_opt else store.weights_total
    if len(body) != expected:
        raise FormatError(
            f"weight payload holds {len(body)} values, layout wants {expected}"
        )
    store.flat[: len(body)] = body
    if not has_opt:
        store.flat[store.acc_offset :] = 1.0
    return store


def save_model(store: WeightStore, path, include_optimizer: bool = True):
    with open(path, "wb") as fh:
        fh.write(flat_weight_view(store, include_optimizer))


def load_model(path) -> WeightStore:
    with open(path, "rb") as fh:
        return store_from_bytes(fh.read())

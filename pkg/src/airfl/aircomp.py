"""Analog over-the-air aggregation: encode, superimpose, forward, decode, MSE.

Model parameters are real vectors of even length M.  Each user packs
consecutive pairs into S = M/2 complex symbols, scales them by its transmit
coefficient over sqrt(2*eta) (eta is the average per-entry second moment
across users), and all users transmit simultaneously.  The relay applies a
square matrix F (unit-modulus entries when produced by the optimizer) and
rebroadcasts with amplitude sqrt(power_scaling); each user equalizes with a
scalar receive coefficient and unpacks.

``analytic_mse`` is the closed-form per-user MSE of that chain against the
weighted aggregate of the transmitted parameters; ``monte_carlo_mse`` is the
simulation twin used to validate it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import substream

__all__ = [
    "AggregationWeights",
    "EncodeState",
    "SystemDims",
    "analytic_mse",
    "compute_eta",
    "decode",
    "downlink_receive",
    "encode",
    "global_target",
    "monte_carlo_mse",
    "mse_bracket_terms",
    "pack_symbols",
    "server_forward",
    "unpack_symbols",
    "uplink_superimpose",
]


@dataclass
class SystemDims:
    """Problem sizes: model dimension M (even), antennas N, users K."""

    model_dim: int
    n_antennas: int
    n_users: int

    def __post_init__(self):
        self.model_dim = int(self.model_dim)
        self.n_antennas = int(self.n_antennas)
        self.n_users = int(self.n_users)
        if self.model_dim < 2 or self.model_dim % 2:
            raise ValueError(f"model_dim must be even and >= 2, got {self.model_dim}")
        if self.n_antennas < 1 or self.n_users < 1:
            raise ValueError("n_antennas and n_users must be at least 1")

    @property
    def n_symbols(self):
        return self.model_dim // 2


@dataclass
class AggregationWeights:
    """Dataset sizes and the induced normalized aggregation weights."""

    dataset_sizes: np.ndarray
    alpha: np.ndarray = None

    def __post_init__(self):
        sizes = np.asarray(self.dataset_sizes, dtype=float)
        if sizes.ndim != 1 or sizes.size == 0:
            raise ValueError("dataset_sizes must be a nonempty 1-D sequence")
        if np.any(sizes <= 0):
            raise ValueError("dataset_sizes must be strictly positive")
        self.dataset_sizes = sizes
        self.alpha = sizes / sizes.sum()

    @property
    def total(self):
        return float(self.dataset_sizes.sum())


@dataclass
class EncodeState:
    """Power-normalization state: per-user second moments and their mean."""

    eta: float
    eta_per_user: np.ndarray


def compute_eta(x_all):
    """Mean per-entry second moment across users: eta = mean_k ||x_k||^2 / M."""
    x = np.asarray(x_all, dtype=float)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("x_all must be a (n_users, model_dim) array")
    per_user = np.sum(x * x, axis=1) / x.shape[1]
    eta = float(per_user.mean())
    if eta == 0.0:
        raise ValueError("all-zero parameters: eta would be zero")
    return EncodeState(eta=eta, eta_per_user=per_user)


def pack_symbols(x):
    """Pack a real even-length vector into complex symbols (pairs -> re + j*im)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size % 2:
        raise ValueError(f"expected an even-length 1-D vector, got shape {x.shape}")
    return x[0::2] + 1j * x[1::2]


def unpack_symbols(s):
    """Inverse of :func:`pack_symbols`: interleave real and imaginary parts."""
    s = np.asarray(s, dtype=complex)
    out = np.empty(2 * s.size, dtype=float)
    out[0::2] = s.real
    out[1::2] = s.imag
    return out


def encode(x, t, eta):
    """Encode one user's parameters into transmit symbols: t/sqrt(2 eta) * pack(x)."""
    if not eta > 0:
        raise ValueError("eta must be strictly positive")
    return (t / np.sqrt(2.0 * eta)) * pack_symbols(x)


def decode(y, r, eta):
    """Equalize and unpack received symbols back to a real parameter vector."""
    if not eta > 0:
        raise ValueError("eta must be strictly positive")
    return np.sqrt(2.0 * eta) * unpack_symbols(r * np.asarray(y, dtype=complex))


def uplink_superimpose(s_all, chan, noise):
    """Superimposed uplink at the relay: sum_k h_k s_k^T + noise  (N x S)."""
    s_all = np.asarray(s_all, dtype=complex)
    noise = np.asarray(noise, dtype=complex)
    if s_all.ndim != 2 or s_all.shape[0] != chan.n_users:
        raise ValueError("s_all must be (n_users, n_symbols)")
    expected = (chan.n_antennas, s_all.shape[1])
    if noise.shape != expected:
        raise ValueError(f"noise must have shape {expected}, got {noise.shape}")
    return np.einsum("kn,ks->ns", chan.uplink, s_all) + noise


def server_forward(f_matrix, received, power_scaling):
    """Relay processing: sqrt(power_scaling) * F @ received."""
    f_matrix = np.asarray(f_matrix, dtype=complex)
    received = np.asarray(received, dtype=complex)
    if not power_scaling > 0:
        raise ValueError("power_scaling must be strictly positive")
    if f_matrix.ndim != 2 or f_matrix.shape[0] != f_matrix.shape[1]:
        raise ValueError("forwarding matrix must be square")
    if received.shape[0] != f_matrix.shape[1]:
        raise ValueError("received rows must match forwarding matrix size")
    return np.sqrt(power_scaling) * (f_matrix @ received)


def downlink_receive(forwarded, g, noise):
    """User-side observation: g^H @ forwarded + noise  (length S)."""
    forwarded = np.asarray(forwarded, dtype=complex)
    g = np.asarray(g, dtype=complex).reshape(-1)
    noise = np.asarray(noise, dtype=complex)
    if forwarded.shape[0] != g.size:
        raise ValueError("forwarded rows must match channel length")
    if noise.shape != (forwarded.shape[1],):
        raise ValueError("noise must have one entry per symbol")
    return g.conj() @ forwarded + noise


def global_target(x_all, weights):
    """Weighted aggregate the protocol is trying to deliver: sum_k alpha_k x_k."""
    x = np.asarray(x_all, dtype=float)
    if x.shape[0] != weights.alpha.size:
        raise ValueError("x_all rows must match number of weights")
    return weights.alpha @ x


def _effective_gains(f_matrix, chan):
    """(K, K) matrix of g_k^H F h_j and (K,) row norms ||g_k^H F||."""
    gf = chan.downlink.conj() @ np.asarray(f_matrix, dtype=complex)
    gains = gf @ chan.uplink.T
    row_norm_sq = np.sum(np.abs(gf) ** 2, axis=1)
    return gains, row_norm_sq


def mse_bracket_terms(f_matrix, r_all, t_all, chan, weights, cfg):
    """Per-user bracket of the closed-form MSE (everything except 2*eta*S).

    For user k:  gamma * sum_j |r_k g_k^H F h_j t_j - alpha_j|^2
               + gamma * noise_server * |r_k|^2 ||g_k^H F||^2
               + noise_user_k * |r_k|^2
    """
    r_all = np.asarray(r_all, dtype=complex).reshape(-1)
    t_all = np.asarray(t_all, dtype=complex).reshape(-1)
    alpha = weights.alpha
    if r_all.size != chan.n_users or t_all.size != chan.n_users or alpha.size != chan.n_users:
        raise ValueError("r_all, t_all and weights must all cover every user")
    gains, row_norm_sq = _effective_gains(f_matrix, chan)
    gamma = cfg.power_scaling
    misalign = r_all[:, None] * gains * t_all[None, :] - alpha[None, :]
    signal = gamma * np.sum(np.abs(misalign) ** 2, axis=1)
    relay_noise = gamma * cfg.noise_power_server * np.abs(r_all) ** 2 * row_norm_sq
    local_noise = cfg.noise_power_user * np.abs(r_all) ** 2
    return signal + relay_noise + local_noise


def analytic_mse(f_matrix, r_all, t_all, chan, weights, cfg, eta, n_symbols):
    """Closed-form per-user MSE: 2 * eta * S * bracket (see mse_bracket_terms)."""
    if not eta > 0:
        raise ValueError("eta must be strictly positive")
    if int(n_symbols) < 1:
        raise ValueError("n_symbols must be at least 1")
    return 2.0 * eta * int(n_symbols) * mse_bracket_terms(f_matrix, r_all, t_all, chan, weights, cfg)


def _ensemble_sq_errors(f_matrix, r_all, t_all, chan, weights, cfg, eta, x_draws, relay_noise, user_noise):
    """Squared aggregation error for a batch of parameter/noise draws.

    ``x_draws`` is (draws, K, M) real; ``relay_noise`` (draws, N, S);
    ``user_noise`` (draws, K, S).  Returns (draws, K) squared errors
    ||decoded_k - target||^2, exploiting that pairwise packing is an isometry.
    """
    f_matrix = np.asarray(f_matrix, dtype=complex)
    r_all = np.asarray(r_all, dtype=complex).reshape(-1)
    t_all = np.asarray(t_all, dtype=complex).reshape(-1)
    packed = x_draws[..., 0::2] + 1j * x_draws[..., 1::2]
    target = np.einsum("j,djs->ds", weights.alpha, packed)
    symbols = (t_all / np.sqrt(2.0 * eta))[None, :, None] * packed
    at_relay = np.einsum("dks,kn->dns", symbols, chan.uplink) + relay_noise
    forwarded = np.sqrt(cfg.power_scaling) * np.einsum("nm,dms->dns", f_matrix, at_relay)
    observed = np.einsum("kn,dns->dks", chan.downlink.conj(), forwarded) + user_noise
    err = np.sqrt(2.0 * eta) * r_all[None, :, None] * observed - target[:, None, :]
    return np.sum(np.abs(err) ** 2, axis=2)


def monte_carlo_mse(f_matrix, r_all, t_all, chan, weights, cfg, eta, n_symbols, draws, seed):
    """Simulation estimate of the per-user MSE and its standard error.

    Draws synthetic parameter vectors with i.i.d. zero-mean Gaussian entries
    of variance ``eta`` (matching the second-moment model the closed form
    assumes), runs the full encode/superimpose/forward/receive/decode chain,
    and averages ||decoded_k - target||^2.

    Returns
    -------
    (mean, stderr) : pair of (K,) arrays
    """
    if not eta > 0:
        raise ValueError("eta must be strictly positive")
    draws = int(draws)
    if draws < 2:
        raise ValueError("need at least 2 draws for a standard error")
    n_symbols = int(n_symbols)
    model_dim = 2 * n_symbols
    k_users = chan.n_users
    rng_x = substream(seed, "mc-parameters")
    x_draws = np.sqrt(eta) * rng_x.standard_normal((draws, k_users, model_dim))
    rng_relay = substream(seed, "mc-relay-noise")
    relay_noise = np.sqrt(cfg.noise_power_server / 2.0) * (
        rng_relay.standard_normal((draws, chan.n_antennas, n_symbols))
        + 1j * rng_relay.standard_normal((draws, chan.n_antennas, n_symbols))
    )
    rng_user = substream(seed, "mc-user-noise")
    user_scale = np.sqrt(np.asarray(cfg.noise_power_user, dtype=float) / 2.0)[None, :, None]
    user_noise = user_scale * (
        rng_user.standard_normal((draws, k_users, n_symbols))
        + 1j * rng_user.standard_normal((draws, k_users, n_symbols))
    )
    sq = _ensemble_sq_errors(
        f_matrix, r_all, t_all, chan, weights, cfg, eta, x_draws, relay_noise, user_noise
    )
    mean = sq.mean(axis=0)
    stderr = sq.std(axis=0, ddof=1) / np.sqrt(draws)
    return mean, stderr

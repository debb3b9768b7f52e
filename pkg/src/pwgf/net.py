"""Scalar tanh network ``g: R -> R`` with 1 -> H -> H -> 1 layout.

The forward pass propagates a second-order jet (value, d/dw, d2/dw2)
through both hidden layers so that the velocity field and its spatial
derivatives are exact.  The reverse pass back-propagates an arbitrary
linear combination of the three jet components to the parameters and to
the input ``w``; the input adjoint implicitly contains ``g'''`` which the
Euler recursion needs.

Everything is vectorised over a batch of inputs ``w`` of shape ``(P,)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def n_params(H: int) -> int:
    """Length of the flat parameter vector for hidden width ``H``."""
    return H * H + 4 * H + 1


@dataclass
class NetworkParams:
    W1: np.ndarray  # (H,)  input weights (H x 1 stored as a vector)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (H, H)
    b2: np.ndarray  # (H,)
    w3: np.ndarray  # (H,)  output weights
    b3: float

    @property
    def H(self) -> int:
        return self.W1.shape[0]

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.W1, self.b1, self.W2.ravel(), self.b2,
                               self.w3, [self.b3]])

    @classmethod
    def from_flat(cls, theta: np.ndarray, H: int) -> "NetworkParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (n_params(H),):
            raise ValueError(f"expected {n_params(H)} parameters for H={H}, "
                             f"got shape {theta.shape}")
        i = 0
        W1 = theta[i:i + H]; i += H
        b1 = theta[i:i + H]; i += H
        W2 = theta[i:i + H * H].reshape(H, H); i += H * H
        b2 = theta[i:i + H]; i += H
        w3 = theta[i:i + H]; i += H
        return cls(W1, b1, W2, b2, w3, float(theta[i]))

    @classmethod
    def zeros(cls, H: int) -> "NetworkParams":
        return cls.from_flat(np.zeros(n_params(H)), H)

    @classmethod
    def random(cls, H: int, rng: np.random.Generator, scale: float = 0.01,
               zero_bias: bool = True) -> "NetworkParams":
        """Normal(0, scale) weights; biases zero unless ``zero_bias=False``."""
        p = cls(W1=scale * rng.standard_normal(H),
                b1=np.zeros(H),
                W2=scale * rng.standard_normal((H, H)),
                b2=np.zeros(H),
                w3=scale * rng.standard_normal(H),
                b3=0.0)
        if not zero_bias:
            p.b1 = scale * rng.standard_normal(H)
            p.b2 = scale * rng.standard_normal(H)
            p.b3 = float(scale * rng.standard_normal())
        return p


def bias_mask(H: int) -> np.ndarray:
    """Boolean mask of the bias entries in the flat layout."""
    mask = np.zeros(n_params(H), dtype=bool)
    mask[H:2 * H] = True
    off = 2 * H + H * H
    mask[off:off + H] = True
    mask[-1] = True
    return mask


def _tanh_jet(t):
    # derivatives of tanh expressed through t = tanh(z)
    d1 = 1.0 - t * t
    d2 = -2.0 * t * d1
    d3 = d1 * (4.0 * t * t - 2.0 * d1)
    return d1, d2, d3


@dataclass
class NetEval:
    g: np.ndarray
    dg: np.ndarray
    d2g: np.ndarray
    tape: dict


def net_eval(params: NetworkParams, w) -> NetEval:
    """Evaluate ``g``, ``g'`` and ``g''`` at the points ``w``."""
    w = np.asarray(w, dtype=float)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    a = params.W1

    t1 = np.tanh(w[:, None] * a[None, :] + params.b1[None, :])
    p1, p2, p3 = _tanh_jet(t1)
    h1 = (t1, p1 * a, p2 * (a * a))

    W2T = params.W2.T
    z2 = (h1[0] @ W2T + params.b2, h1[1] @ W2T, h1[2] @ W2T)
    t2 = np.tanh(z2[0])
    q1, q2, q3 = _tanh_jet(t2)
    h2 = (t2, q1 * z2[1], q2 * z2[1] ** 2 + q1 * z2[2])

    w3 = params.w3
    g = h2[0] @ w3 + params.b3
    dg = h2[1] @ w3
    d2g = h2[2] @ w3
    tape = dict(w=w, H=params.H, h1=h1, p=(p1, p2, p3), z2=z2, h2=h2,
                q=(q1, q2, q3), params=params)
    if scalar:
        return NetEval(g[0], dg[0], d2g[0], tape)
    return NetEval(g, dg, d2g, tape)


def net_backprop(tape: dict, cotangents, params: NetworkParams | None = None,
                 return_input: bool = False, groups: int | None = None):
    """Pull back ``cg0*g + cg1*g' + cg2*g''`` to the parameters.

    Parameters
    ----------
    tape : dict
        ``NetEval.tape`` from :func:`net_eval`.
    cotangents : tuple of three arrays
        Per-sample weights ``(cg0, cg1, cg2)``, each broadcastable to ``(P,)``;
        ``None`` stands for an identically zero entry.
    params : NetworkParams, optional
        Must have the same width as the tape.  Defaults to the taped params.
    return_input : bool
        Also return the adjoint with respect to ``w``.
    groups : int, optional
        Sum the gradients over ``groups`` contiguous equal-size runs of
        samples instead of returning one row per sample.

    Returns
    -------
    grads : ndarray, shape (P, M1) or (groups, M1)
        Parameter gradients in the flat layout.
    w_bar : ndarray, shape (P,)
        Only when ``return_input`` is set.
    """
    if params is None:
        params = tape["params"]
    H = tape["H"]
    if params.H != H:
        raise ValueError(f"tape was recorded with H={H}, params have H={params.H}")
    w = tape["w"]
    P = w.shape[0]
    # ``None`` marks an identically zero cotangent
    first_order = cotangents[1] is None and cotangents[2] is None
    cg = [np.zeros(P) if c is None else np.broadcast_to(np.asarray(c, dtype=float), (P,))
          for c in cotangents]
    a, W2, w3 = params.W1, params.W2, params.w3
    h1, h2, z2 = tape["h1"], tape["h2"], tape["z2"]
    p1, p2, p3 = tape["p"]
    q1, q2, q3 = tape["q"]

    G = P if groups is None else int(groups)
    if P % G:
        raise ValueError(f"{P} samples cannot be split into {G} equal groups")
    nb = P // G

    def red(x):
        return x if groups is None else x.reshape(G, nb, *x.shape[1:]).sum(axis=1)

    out = np.empty((G, n_params(H)))
    out[:, -1] = red(cg[0])
    if first_order:
        # only g carries a cotangent: the derivative jets drop out
        out[:, -1 - H:-1] = red(cg[0][:, None] * h2[0])
        zb0 = (cg[0][:, None] * w3) * q1
        hs = h1[0]
        if groups is None:
            gW2 = zb0[:, :, None] * hs[:, None, :]
        else:
            gW2 = np.matmul(zb0.reshape(G, nb, H).transpose(0, 2, 1), hs.reshape(G, nb, H))
        off = 2 * H
        out[:, off:off + H * H] = gW2.reshape(G, H * H)
        out[:, off + H * H:off + H * H + H] = red(zb0)
        yb0 = (zb0 @ W2) * p1
        out[:, :H] = red(yb0 * w[:, None])
        out[:, H:2 * H] = red(yb0)
        if return_input:
            return out, yb0 @ a
        return out

    out[:, -1 - H:-1] = red(cg[0][:, None] * h2[0] + cg[1][:, None] * h2[1]
                            + cg[2][:, None] * h2[2])
    hb0 = cg[0][:, None] * w3
    hb1 = cg[1][:, None] * w3
    hb2 = cg[2][:, None] * w3

    # second tanh layer, jet reverse
    zb2 = hb2 * q1
    zb1 = hb1 * q1 + 2.0 * hb2 * q2 * z2[1]
    zb0 = hb0 * q1 + hb1 * q2 * z2[1] + hb2 * (q3 * z2[1] ** 2 + q2 * z2[2])

    # W2 gradient: sum over the three jet orders (and group members) as one matmul
    off = 2 * H
    zs = np.stack([zb0, zb1, zb2])          # (3, P, H)
    hs = np.stack(h1)
    if groups is None:
        gW2 = np.matmul(zs.transpose(1, 2, 0), hs.transpose(1, 0, 2))
    else:
        zs = zs.reshape(3, G, nb, H).transpose(1, 3, 0, 2).reshape(G, H, 3 * nb)
        hs = hs.reshape(3, G, nb, H).transpose(1, 0, 2, 3).reshape(G, 3 * nb, H)
        gW2 = np.matmul(zs, hs)
    out[:, off:off + H * H] = gW2.reshape(G, H * H)
    out[:, off + H * H:off + H * H + H] = red(zb0)
    gb0 = zb0 @ W2
    gb1 = zb1 @ W2
    gb2 = zb2 @ W2

    # first tanh layer; its input jet is (a*w + b1, a, 0)
    yb1 = gb1 * p1 + 2.0 * gb2 * p2 * a
    yb0 = gb0 * p1 + gb1 * p2 * a + gb2 * p3 * (a * a)
    out[:, :H] = red(yb0 * w[:, None] + yb1)
    out[:, H:2 * H] = red(yb0)
    if return_input:
        return out, yb0 @ a
    return out

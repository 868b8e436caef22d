"""
Specular intensity head: ASG responses, positional encoding of the rotated
view direction and n·d_rot feed a two-hidden-layer MLP with a
non-negative (ReLU) output. Monochrome.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from surfrig.appearance.asg import eval_asg_terms, sample_lobes
from surfrig.core.errors import DimensionMismatch
from surfrig.models.appearance import ASGLobe, SpecularHead

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")


def positional_encoding(d, pe_freqs: int) -> np.ndarray:
    """[sin(2^k π d), cos(2^k π d)] for k < pe_freqs, 6 values per octave."""
    d = np.asarray(d, dtype=np.float64)
    parts = []
    for k in range(pe_freqs):
        scaled = (2.0 ** k) * math.pi * d
        parts.append(np.sin(scaled))
        parts.append(np.cos(scaled))
    return np.concatenate(parts) if parts else np.zeros(0)


def init_specular_head(
    seed: int,
    grid=(4, 4),
    pe_freqs: int = 4,
    hidden: Tuple[int, int] = (32, 32),
    sharpness: float = 10.0,
    amplitude: float = 1.0,
) -> SpecularHead:
    """Lobes from :func:`sample_lobes`, dense layers with 1/sqrt(fan_in) normal init."""
    rng = np.random.default_rng(seed)
    lobes = sample_lobes(grid, sharpness=sharpness, amplitude=amplitude)
    n_in = len(lobes) + 6 * pe_freqs + 1
    h1, h2 = hidden
    return SpecularHead(
        lobes=lobes,
        pe_freqs=pe_freqs,
        W1=rng.normal(0.0, 1.0 / math.sqrt(n_in), (h1, n_in)),
        b1=np.zeros(h1),
        W2=rng.normal(0.0, 1.0 / math.sqrt(h1), (h2, h1)),
        b2=np.zeros(h2),
        W3=rng.normal(0.0, 1.0 / math.sqrt(h2), (1, h2)),
        b3=np.zeros(1),
        hidden=(h1, h2),
    )


def zero_specular_head(grid=(4, 4), pe_freqs: int = 4, hidden: Tuple[int, int] = (32, 32)) -> SpecularHead:
    lobes = sample_lobes(grid)
    n_in = len(lobes) + 6 * pe_freqs + 1
    h1, h2 = hidden
    return SpecularHead(
        lobes=lobes,
        pe_freqs=pe_freqs,
        W1=np.zeros((h1, n_in)),
        b1=np.zeros(h1),
        W2=np.zeros((h2, h1)),
        b2=np.zeros(h2),
        W3=np.zeros((1, h2)),
        b3=np.zeros(1),
        hidden=(h1, h2),
    )


def validate_head(head: SpecularHead) -> None:
    n_in = head.input_dim
    h1 = head.W1.shape[0]
    h2 = head.W2.shape[0]
    expected = {
        "W1": (h1, n_in),
        "b1": (h1,),
        "W2": (h2, h1),
        "b2": (h2,),
        "W3": (1, h2),
        "b3": (1,),
    }
    for name, shape in expected.items():
        actual = np.shape(getattr(head, name))
        if actual != shape:
            raise DimensionMismatch(
                f"specular head {name} has shape {actual}, expected {shape}",
                {"parameter": name},
            )


def head_input(head: SpecularHead, omega_o, d_rot, n) -> Tuple[np.ndarray, List[tuple]]:
    """Concatenated MLP input and the per-lobe ASG terms."""
    terms = [eval_asg_terms(lobe, omega_o) for lobe in head.lobes]
    asg = np.array([t[0] for t in terms])
    x = np.concatenate([
        asg,
        positional_encoding(d_rot, head.pe_freqs),
        [float(np.asarray(n, dtype=np.float64) @ np.asarray(d_rot, dtype=np.float64))],
    ])
    return x, terms


@dataclass
class _Forward:
    x: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    z3: float
    terms: List[tuple]


def _forward(head: SpecularHead, omega_o, d_rot, n) -> _Forward:
    validate_head(head)
    x, terms = head_input(head, omega_o, d_rot, n)
    h1 = np.tanh(head.W1 @ x + head.b1)
    h2 = np.tanh(head.W2 @ h1 + head.b2)
    z3 = float((head.W3 @ h2 + head.b3)[0])
    return _Forward(x=x, h1=h1, h2=h2, z3=z3, terms=terms)


def eval_specular(head: SpecularHead, omega_o, d_rot, n) -> float:
    """Monochrome specular intensity c_s >= 0."""
    return max(_forward(head, omega_o, d_rot, n).z3, 0.0)


def specular_backward(head: SpecularHead, omega_o, d_rot, n) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Intensity and its analytic gradient w.r.t. every head parameter.

    Lobe gradients are returned as arrays ``xi``, ``lam`` and ``mu`` of length N.
    """
    fw = _forward(head, omega_o, d_rot, n)
    g3 = 1.0 if fw.z3 > 0.0 else 0.0
    grads: Dict[str, np.ndarray] = {}
    grads["W3"] = g3 * fw.h2[None, :]
    grads["b3"] = np.array([g3])
    dz2 = (head.W3[0] * g3) * (1.0 - fw.h2 ** 2)
    grads["W2"] = np.outer(dz2, fw.h1)
    grads["b2"] = dz2
    dz1 = (head.W2.T @ dz2) * (1.0 - fw.h1 ** 2)
    grads["W1"] = np.outer(dz1, fw.x)
    grads["b1"] = dz1
    dx = head.W1.T @ dz1
    n_lobes = len(head.lobes)
    grads["xi"] = np.array([dx[i] * fw.terms[i][1] for i in range(n_lobes)])
    grads["lam"] = np.array([dx[i] * fw.terms[i][2] for i in range(n_lobes)])
    grads["mu"] = np.array([dx[i] * fw.terms[i][3] for i in range(n_lobes)])
    return max(fw.z3, 0.0), grads


def replace_lobe_params(head: SpecularHead, xi=None, lam=None, mu=None) -> SpecularHead:
    lobes = []
    for i, lobe in enumerate(head.lobes):
        lobes.append(ASGLobe(
            z=lobe.z,
            x=lobe.x,
            y=lobe.y,
            lam=float(lam[i]) if lam is not None else lobe.lam,
            mu=float(mu[i]) if mu is not None else lobe.mu,
            xi=float(xi[i]) if xi is not None else lobe.xi,
        ))
    return head.with_params(lobes=lobes)


def permute_lobes(head: SpecularHead, i: int, j: int, permute_weights: bool = True) -> SpecularHead:
    """Swap lobes i and j (and the matching W1 input columns)."""
    lobes = list(head.lobes)
    lobes[i], lobes[j] = lobes[j], lobes[i]
    W1 = head.W1.copy()
    if permute_weights:
        W1[:, [i, j]] = W1[:, [j, i]]
    return head.with_params(lobes=lobes, W1=W1)


def specular_or_zero(head: Optional[SpecularHead], omega_o, d_rot, n) -> float:
    return 0.0 if head is None else eval_specular(head, omega_o, d_rot, n)

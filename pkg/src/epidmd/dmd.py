"""Exact dynamic mode decomposition.

The best-fit linear operator ``A`` with ``X' ~= A X`` is never formed.  Its
projection onto the leading POD basis,

    A_tilde = U^T X' V Sigma^{-1},

is diagonalised (``A_tilde W = W Lambda``) and lifted back to full dimension
with the exact-mode formula ``Phi = X' V Sigma^{-1} W``.  Amplitudes fit the
first snapshot, and forecasts are ``Re(Phi Lambda^k b)``.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .errors import DegenerateEigenproblem, ZeroMatrix
from .snapshot import SnapshotPair, SnapshotSeries, build_snapshot_pair, format_float

__all__ = [
    "FixedRank",
    "EnergyThreshold",
    "RankPolicy",
    "TruncatedSvd",
    "DmdModel",
    "DmdSpectrum",
    "ImaginaryResidueWarning",
    "truncated_svd",
    "fit",
    "fit_series",
    "exact_modes",
    "amplitudes",
    "predict",
    "predict_series",
    "spectrum",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "write_spectrum_csv",
]

_EPS = np.finfo(float).eps


class ImaginaryResidueWarning(RuntimeWarning):
    """A forecast kept a non-negligible imaginary part before taking the real part."""


@dataclass(frozen=True)
class FixedRank:
    r: int

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ValueError(f"rank must be a positive integer, got {self.r!r}")


@dataclass(frozen=True)
class EnergyThreshold:
    fraction: float = 0.99

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError(f"energy fraction must lie in (0, 1], got {self.fraction!r}")


RankPolicy = Union[FixedRank, EnergyThreshold]


@dataclass(frozen=True, eq=False)
class TruncatedSvd:
    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    r: int


def truncated_svd(x, policy: RankPolicy | None = None) -> TruncatedSvd:
    """Rank-``r`` SVD of ``x`` under ``policy``.

    Singular values at or below ``max(D, M) * eps * s_1`` are never kept, even
    under :class:`FixedRank`, so ``Sigma`` is safe to invert.
    """
    policy = EnergyThreshold() if policy is None else policy
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.size == 0:
        raise ValueError(f"expected a non-empty matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("matrix entries must be finite")
    if not np.any(x):
        raise ZeroMatrix("cannot decompose an all-zero matrix")

    u, s, vh = np.linalg.svd(x, full_matrices=False)
    tol = max(x.shape) * _EPS * s[0]
    numerical = int(np.count_nonzero(s > tol))

    if isinstance(policy, FixedRank):
        r = int(policy.r)
    elif isinstance(policy, EnergyThreshold):
        energy = np.cumsum(s**2)
        energy /= energy[-1]
        energy[-1] = 1.0
        r = int(np.argmax(energy >= policy.fraction)) + 1
    else:
        raise TypeError(f"unsupported rank policy {policy!r}")
    r = max(1, min(r, numerical))
    return TruncatedSvd(u[:, :r].copy(), s[:r].copy(), vh[:r].T.copy(), r)


@dataclass(frozen=True, eq=False)
class DmdModel:
    """Fitted exact-DMD model.  Immutable; safe to share between threads."""

    modes: np.ndarray
    eigenvalues: np.ndarray
    amplitudes: np.ndarray
    a_tilde: np.ndarray
    dt: float = 1.0
    node_ids: tuple = ()
    singular_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    amplitude_residual: float = 0.0

    def __post_init__(self):
        for name in ("modes", "eigenvalues", "amplitudes", "a_tilde", "singular_values"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "node_ids", tuple(self.node_ids))

    @property
    def rank(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def n_nodes(self) -> int:
        return int(self.modes.shape[0])

    def with_amplitudes(self, x) -> DmdModel:
        """Copy of the model whose amplitudes are re-fit to snapshot ``x``."""
        b, res = amplitudes(self.modes, x, return_residual=True)
        return replace(self, amplitudes=b, amplitude_residual=res)


def exact_modes(svd: TruncatedSvd, x_prime, w) -> np.ndarray:
    """Unnormalised exact modes ``X' V Sigma^{-1} W``."""
    xv = np.asarray(x_prime, dtype=float) @ (svd.v / svd.s)
    return xv @ np.asarray(w)


def amplitudes(modes, x1, return_residual: bool = False):
    """Least-squares amplitudes ``b`` minimising ``||modes @ b - x1||``."""
    modes = np.asarray(modes)
    if modes.ndim != 2 or modes.shape[1] == 0:
        raise ValueError("modes must be a non-empty D x r matrix")
    x1 = np.asarray(x1, dtype=modes.dtype if np.iscomplexobj(modes) else float)
    b, *_ = np.linalg.lstsq(modes, x1, rcond=None)
    if return_residual:
        return b, float(np.linalg.norm(modes @ b - x1))
    return b


def _mode_order(eigenvalues: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Quantised keys so conjugate partners (equal up to rounding) tie.
    amp = np.abs(b)
    scale = amp.max() if amp.size and amp.max() > 0 else 1.0
    mag = np.abs(eigenvalues)
    mscale = mag.max() if mag.size and mag.max() > 0 else 1.0
    k_amp = np.round(amp / scale, 10)
    k_mag = np.round(mag / mscale, 10)
    k_neg = (eigenvalues.imag < 0).astype(int)
    return np.lexsort((k_neg, -k_mag, -k_amp))


def fit(pair: SnapshotPair, policy: RankPolicy | None = None, node_ids: Sequence[str] = ()) -> DmdModel:
    """Fit an exact DMD model to the snapshot pair ``(X, X')``."""
    svd = truncated_svd(pair.x, policy)
    xv = pair.x_prime @ (svd.v / svd.s)
    a_tilde = svd.u.T @ xv
    try:
        lam, w = np.linalg.eig(a_tilde)
    except np.linalg.LinAlgError as exc:
        raise DegenerateEigenproblem(str(exc)) from exc
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(w))):
        raise DegenerateEigenproblem("eigensolver returned non-finite values")
    lam = lam.astype(complex)
    w = w.astype(complex)

    phi = xv @ w
    # A zero eigenvalue sends its exact mode to zero; the projected mode U w
    # spans the same eigen-direction of A_tilde instead.
    zero = np.abs(lam) <= 1e3 * _EPS * max(1.0, float(np.abs(lam).max()))
    if np.any(zero):
        phi[:, zero] = svd.u @ w[:, zero]
    norms = np.linalg.norm(phi, axis=0)
    norms[norms == 0] = 1.0
    phi = phi / norms

    b, res = amplitudes(phi, pair.x[:, 0], return_residual=True)
    order = _mode_order(lam, b)
    if len(node_ids) == 0:
        node_ids = tuple(f"node_{j:03d}" for j in range(phi.shape[0]))
    return DmdModel(
        modes=phi[:, order],
        eigenvalues=lam[order],
        amplitudes=b[order],
        a_tilde=a_tilde,
        dt=pair.dt,
        node_ids=tuple(node_ids),
        singular_values=svd.s,
        amplitude_residual=res,
    )


def fit_series(series: SnapshotSeries, policy: RankPolicy | None = None) -> DmdModel:
    return fit(build_snapshot_pair(series), policy, node_ids=series.node_ids)


def _real_part(z: np.ndarray) -> np.ndarray:
    real = z.real
    resid = float(np.abs(z.imag).max()) if z.size else 0.0
    scale = float(np.linalg.norm(real))
    if resid > 1e-8 * max(scale, np.finfo(float).tiny):
        warnings.warn(
            f"forecast imaginary residue {resid:.3g} exceeds 1e-8 of its norm {scale:.3g}",
            ImaginaryResidueWarning,
            stacklevel=3,
        )
    return np.ascontiguousarray(real)


def predict(model: DmdModel, steps: int) -> np.ndarray:
    """State ``steps`` snapshots after the one the amplitudes were fit to."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    z = model.modes @ (model.eigenvalues ** int(steps) * model.amplitudes)
    return _real_part(z)


def predict_series(model: DmdModel, k_max: int, t0: int = 0) -> SnapshotSeries:
    """Forecasts for ``k = 0 .. k_max`` stacked time-major."""
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    k = np.arange(k_max + 1)
    dynamics = model.eigenvalues[None, :] ** k[:, None] * model.amplitudes[None, :]
    z = dynamics @ model.modes.T
    return SnapshotSeries(_real_part(z), dt=model.dt, node_ids=model.node_ids, t0=t0, nonnegative=False)


@dataclass(frozen=True, eq=False)
class DmdSpectrum:
    """Discrete eigenvalues with their continuous-time counterparts.

    Zero eigenvalues have no logarithm; their ``continuous`` entry is ``-inf``
    and ``valid`` is False for them.
    """

    discrete: np.ndarray
    continuous: np.ndarray
    frequency: np.ndarray
    growth_rate: np.ndarray
    valid: np.ndarray
    dt: float = 1.0

    @property
    def frequency_list(self) -> np.ndarray:
        return self.frequency[self.valid]


def spectrum(model: DmdModel) -> DmdSpectrum:
    lam = np.asarray(model.eigenvalues, dtype=complex)
    valid = lam != 0
    omega = np.full(lam.shape, complex(-math.inf, 0.0))
    omega[valid] = np.log(lam[valid]) / model.dt
    freq = np.where(valid, omega.imag / (2 * math.pi), np.nan)
    growth = np.where(valid, omega.real, -math.inf)
    return DmdSpectrum(lam, omega, freq, growth, valid, model.dt)


def _pairs(z) -> list:
    z = np.asarray(z, dtype=complex)
    if z.ndim == 1:
        return [[float(v.real), float(v.imag)] for v in z]
    return [_pairs(row) for row in z]


def _unpairs(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def model_to_dict(model: DmdModel) -> dict:
    return {
        "format": "epidmd-model",
        "version": 1,
        "rank": model.rank,
        "dt": model.dt,
        "node_ids": list(model.node_ids),
        "eigenvalues": _pairs(model.eigenvalues),
        "amplitudes": _pairs(model.amplitudes),
        "modes": _pairs(model.modes),
        "a_tilde": np.asarray(model.a_tilde, dtype=float).tolist(),
        "singular_values": np.asarray(model.singular_values, dtype=float).tolist(),
        "amplitude_residual": model.amplitude_residual,
    }


def model_from_dict(data: dict) -> DmdModel:
    if data.get("format") != "epidmd-model":
        raise ValueError("not an epidmd model document")
    rank = int(data["rank"])
    modes = _unpairs(data["modes"]).reshape(len(data["node_ids"]), rank)
    model = DmdModel(
        modes=modes,
        eigenvalues=_unpairs(data["eigenvalues"]).reshape(rank),
        amplitudes=_unpairs(data["amplitudes"]).reshape(rank),
        a_tilde=np.asarray(data["a_tilde"], dtype=float).reshape(rank, rank),
        dt=float(data["dt"]),
        node_ids=tuple(data["node_ids"]),
        singular_values=np.asarray(data.get("singular_values", []), dtype=float),
        amplitude_residual=float(data.get("amplitude_residual", 0.0)),
    )
    return model


def save_model(model: DmdModel, path) -> None:
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> DmdModel:
    with open(os.fspath(path), encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def write_spectrum_csv(model: DmdModel, path) -> None:
    spec = spectrum(model)
    with open(os.fspath(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["mode_index", "re_lambda", "im_lambda", "re_omega", "im_omega", "amplitude_abs"])
        for i, (lam, om, b) in enumerate(zip(spec.discrete, spec.continuous, model.amplitudes)):
            writer.writerow(
                [i, *(format_float(v) for v in (lam.real, lam.imag, om.real, om.imag, abs(b)))]
            )

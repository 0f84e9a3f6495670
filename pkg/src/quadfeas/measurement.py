"""Measurement ensembles, the quadratic forward map and their file formats.

An ensemble is a stack of ``m`` Hermitian ``n x n`` matrices ``A_i``; the
forward map sends ``x`` to the real vector ``(x^H A_i x)_i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._rng import check_seed, complex_normal, derive_rng
from .core import DimensionError, HermitianMatrix, as_vector

__all__ = [
    "FORMAT_VERSION",
    "KINDS",
    "FormatError",
    "MeasurementEnsemble",
    "MeasurementVector",
    "ensemble_from_matrices",
    "sample_hermitian_gaussian",
    "sample_rank_one",
    "sample_ensemble",
    "forward_map",
    "add_noise",
    "serialize_ensemble",
    "deserialize_ensemble",
    "serialize_observations",
    "deserialize_observations",
    "serialize_vector",
    "deserialize_vector",
]

FORMAT_VERSION = 1
KINDS = ("hermitian_gaussian", "rank_one", "user_supplied")

# matrices drawn from one RNG stream; streams are keyed by (seed, block index)
_BLOCK = 64


class FormatError(ValueError):
    """A serialized document is malformed or violates an invariant."""


def _mirror_upper(mats: np.ndarray) -> np.ndarray:
    """Rebuild a stack so the lower triangle is exactly conj(upper), diag real."""
    n = mats.shape[-1]
    out = np.triu(mats, 1)
    out = out + np.conj(np.swapaxes(out, -1, -2))
    d = np.arange(n)
    out[..., d, d] = mats[..., d, d].real
    return out


@dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    """The set ``{A_i}`` with its sampling metadata.

    ``matrices`` is a read-only ``(m, n, n)`` complex array. Construction
    checks that every matrix is exactly Hermitian.
    """

    matrices: np.ndarray
    kind: str = "user_supplied"
    variance: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        mats = np.array(self.matrices, dtype=np.complex128, copy=True)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DimensionError(f"expected an (m, n, n) stack, got shape {mats.shape}")
        if mats.shape[0] < 1 or mats.shape[1] < 1:
            raise ValueError("ensemble needs m >= 1 and n >= 1")
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if not np.all(np.isfinite(mats)):
            raise ValueError("ensemble has non-finite entries")
        if not np.array_equal(mats, np.conj(np.swapaxes(mats, 1, 2))):
            raise ValueError("ensemble matrices are not exactly Hermitian")
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        mats.flags.writeable = False
        object.__setattr__(self, "matrices", mats)

    @property
    def m(self) -> int:
        return self.matrices.shape[0]

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    def __len__(self):
        return self.m

    def __getitem__(self, i) -> HermitianMatrix:
        return HermitianMatrix.from_full(self.matrices[i], atol=0.0)

    def __eq__(self, other):
        if not isinstance(other, MeasurementEnsemble):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.variance == other.variance
            and self.seed == other.seed
            and np.array_equal(self.matrices, other.matrices)
        )

    def is_rank_one(self, rtol: float = 1e-10) -> bool:
        """Check ``A_i^2 = trace(A_i) A_i`` and ``trace(A_i) >= 0`` for all i."""
        tr = np.trace(self.matrices, axis1=1, axis2=2).real
        sq = self.matrices @ self.matrices
        err = np.abs(sq - tr[:, None, None] * self.matrices).max(axis=(1, 2))
        return bool(np.all(tr >= 0) and np.all(err <= rtol * np.maximum(tr**2, 1e-300)))


def ensemble_from_matrices(mats, kind: str = "user_supplied") -> MeasurementEnsemble:
    """Wrap a list of Hermitian matrices (arrays or :class:`HermitianMatrix`)."""
    stack = [m.full() if isinstance(m, HermitianMatrix) else np.asarray(m) for m in mats]
    arr = np.asarray(stack, dtype=np.complex128)
    if arr.ndim != 3:
        raise DimensionError("matrices must all be square and of one size")
    herm_err = np.abs(arr - np.conj(np.swapaxes(arr, 1, 2))).max()
    if herm_err > 1e-12 * max(1.0, np.abs(arr).max()):
        raise ValueError("matrices are not Hermitian")
    return MeasurementEnsemble(_mirror_upper(arr), kind=kind)


def sample_hermitian_gaussian(n: int, m: int, variance: float = 1.0, seed: int = 0) -> MeasurementEnsemble:
    """Draw ``m`` independent complex Hermitian Gaussian matrices.

    Diagonal entries are real ``N(0, variance)``; each strict upper entry has
    independent real and imaginary parts ``N(0, variance / 2)``.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if not variance > 0:
        raise ValueError("variance must be positive")
    seed = check_seed(seed)
    iu = np.triu_indices(n, 1)
    d = np.arange(n)
    mats = np.zeros((m, n, n), dtype=np.complex128)
    for b, start in enumerate(range(0, m, _BLOCK)):
        stop = min(start + _BLOCK, m)
        rng = derive_rng(seed, 0, b)
        k = stop - start
        mats[start:stop, d, d] = np.sqrt(variance) * rng.standard_normal((k, n))
        mats[start:stop, iu[0], iu[1]] = complex_normal(rng, (k, iu[0].size), variance)
    return MeasurementEnsemble(_mirror_upper(mats), "hermitian_gaussian", float(variance), seed)


def sample_rank_one(n: int, m: int, seed: int = 0) -> MeasurementEnsemble:
    """Phase-retrieval ensemble ``A_i = a_i a_i^H``.

    The ``a_i`` have i.i.d. entries whose real and imaginary parts are each
    ``N(0, 1/2)``. That scaling is a convention; nothing upstream fixes it.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    seed = check_seed(seed)
    vecs = np.empty((m, n), dtype=np.complex128)
    for b, start in enumerate(range(0, m, _BLOCK)):
        stop = min(start + _BLOCK, m)
        vecs[start:stop] = complex_normal(derive_rng(seed, 1, b), (stop - start, n))
    mats = vecs[:, :, None] * vecs.conj()[:, None, :]
    return MeasurementEnsemble(_mirror_upper(mats), "rank_one", 1.0, seed)


def sample_ensemble(kind: str, n: int, m: int, variance: float = 1.0, seed: int = 0) -> MeasurementEnsemble:
    if kind == "hermitian_gaussian":
        return sample_hermitian_gaussian(n, m, variance, seed)
    if kind == "rank_one":
        return sample_rank_one(n, m, seed)
    raise ValueError(f"cannot sample ensemble kind {kind!r}")


@dataclass(frozen=True, eq=False)
class MeasurementVector:
    """Real observations ``c_i`` and the noise level each one carries."""

    values: np.ndarray
    noise_sigma: np.ndarray = field(default=None)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if not np.all(np.isfinite(vals)):
            raise ValueError("observations have non-finite values")
        if self.noise_sigma is None:
            sig = np.zeros_like(vals)
        else:
            sig = np.array(self.noise_sigma, dtype=np.float64, copy=True).ravel()
        if sig.shape != vals.shape:
            raise DimensionError("noise_sigma length does not match values")
        vals.flags.writeable = False
        sig.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "noise_sigma", sig)

    @property
    def m(self) -> int:
        return self.values.size

    def __len__(self):
        return self.m

    def __eq__(self, other):
        if not isinstance(other, MeasurementVector):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(
            self.noise_sigma, other.noise_sigma
        )


def quadratic_forms(mats: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``x^H A_i x`` for every matrix of the stack, imaginary roundoff dropped."""
    ax = mats @ x
    return (ax @ x.conj()).real


def forward_map(ens: MeasurementEnsemble, x) -> MeasurementVector:
    """Noiseless observations ``c_i = x^H A_i x``."""
    x = as_vector(x)
    if x.size != ens.n:
        raise DimensionError(f"vector has length {x.size}, ensemble has n={ens.n}")
    return MeasurementVector(quadratic_forms(ens.matrices, x))


def add_noise(c: MeasurementVector, sigmas, seed: int = 0) -> MeasurementVector:
    """Add independent ``N(0, sigma_i^2)`` noise to each observation.

    `sigmas` is a scalar or one value per observation.
    """
    sig = np.broadcast_to(np.asarray(sigmas, dtype=np.float64), c.values.shape).copy()
    if np.any(sig < 0) or not np.all(np.isfinite(sig)):
        raise ValueError("noise standard deviations must be finite and >= 0")
    rng = derive_rng(seed, 2)
    noise = sig * rng.standard_normal(c.m)
    return MeasurementVector(c.values + noise, np.sqrt(c.noise_sigma**2 + sig**2))


# -- file formats -------------------------------------------------------------


def _dumps(doc) -> str:
    # repr-based float output round-trips doubles exactly
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def _loads(data) -> dict:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed document: {exc}") from None
    if not isinstance(doc, dict):
        raise FormatError("document must be a JSON object")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported or missing version: {doc.get('version')!r}")
    return doc


def _require(doc, key):
    if key not in doc:
        raise FormatError(f"missing field {key!r}")
    return doc[key]


def _pairs_to_complex(pairs, what) -> np.ndarray:
    try:
        arr = np.asarray(pairs, dtype=np.float64)
    except (TypeError, ValueError):
        raise FormatError(f"{what}: entries must be [re, im] number pairs") from None
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FormatError(f"{what}: entries must be [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def serialize_ensemble(ens: MeasurementEnsemble, extra: dict | None = None) -> bytes:
    """Encode an ensemble as a JSON document (UTF-8 bytes).

    Layout: ``{version, n, m, kind, variance, seed, matrices}`` where each
    matrix is its row-major upper triangle as ``[re, im]`` pairs.
    """
    iu = np.triu_indices(ens.n)
    doc = {"version": FORMAT_VERSION}
    if extra:
        doc.update(extra)
    doc.update(
        {
            "n": ens.n,
            "m": ens.m,
            "kind": ens.kind,
            "variance": ens.variance,
            "seed": ens.seed,
            "matrices": [
                [[float(v.real), float(v.imag)] for v in a[iu]] for a in ens.matrices
            ],
        }
    )
    return _dumps(doc).encode("utf-8")


def deserialize_ensemble(data) -> MeasurementEnsemble:
    doc = _loads(data)
    n, m = _require(doc, "n"), _require(doc, "m")
    if not (isinstance(n, int) and isinstance(m, int)) or n < 1 or m < 1:
        raise FormatError("n and m must be positive integers")
    kind = doc.get("kind", "user_supplied")
    if kind not in KINDS:
        raise FormatError(f"unknown ensemble kind {kind!r}")
    mats_doc = _require(doc, "matrices")
    if not isinstance(mats_doc, list) or len(mats_doc) != m:
        raise FormatError(f"expected {m} matrices, got {len(mats_doc) if isinstance(mats_doc, list) else 'none'}")
    n_upper = n * (n + 1) // 2
    full = np.zeros((m, n, n), dtype=np.complex128)
    for i, entries in enumerate(mats_doc):
        upper = _pairs_to_complex(entries, f"matrix {i}")
        if upper.size != n_upper:
            raise FormatError(f"matrix {i}: expected {n_upper} entries for n={n}, got {upper.size}")
        try:
            full[i] = HermitianMatrix(n, upper).full()
        except ValueError as exc:
            raise FormatError(f"matrix {i}: {exc}") from None
    seed = doc.get("seed")
    variance = doc.get("variance", 1.0)
    try:
        return MeasurementEnsemble(full, kind, float(variance), None if seed is None else int(seed))
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def serialize_observations(c: MeasurementVector, extra: dict | None = None) -> bytes:
    doc = {"version": FORMAT_VERSION}
    if extra:
        doc.update(extra)
    doc.update(
        {
            "m": c.m,
            "values": [float(v) for v in c.values],
            "noise_sigma": [float(v) for v in c.noise_sigma],
        }
    )
    return _dumps(doc).encode("utf-8")


def deserialize_observations(data) -> MeasurementVector:
    doc = _loads(data)
    m = _require(doc, "m")
    values = _require(doc, "values")
    sigma = doc.get("noise_sigma")
    if not isinstance(values, list) or len(values) != m:
        raise FormatError("values length does not match m")
    if sigma is not None and (not isinstance(sigma, list) or len(sigma) != m):
        raise FormatError("noise_sigma length does not match m")
    try:
        return MeasurementVector(values, sigma)
    except (TypeError, ValueError) as exc:
        raise FormatError(str(exc)) from None


def serialize_vector(z, extra: dict | None = None) -> bytes:
    """Ground-truth / initial-point file: ``{version, n, entries}``."""
    z = as_vector(z)
    doc = {"version": FORMAT_VERSION}
    if extra:
        doc.update(extra)
    doc.update({"n": int(z.size), "entries": [[float(v.real), float(v.imag)] for v in z]})
    return _dumps(doc).encode("utf-8")


def deserialize_vector(data) -> np.ndarray:
    doc = _loads(data)
    n = _require(doc, "n")
    z = _pairs_to_complex(_require(doc, "entries"), "entries")
    if z.size != n:
        raise FormatError(f"expected {n} entries, got {z.size}")
    try:
        return as_vector(z)
    except ValueError as exc:
        raise FormatError(str(exc)) from None

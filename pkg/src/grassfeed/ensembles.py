"""Random matrix ensembles with splittable, counter-based seeding.

All randomness in the package flows through :class:`RngStream`: a frozen
(seed, stream) pair mapped onto numpy's Philox generator through
SeedSequence spawn keys. Identical pairs always reproduce identical draws,
children derived with :meth:`RngStream.child` are statistically independent,
and none of it depends on call order or thread schedule.

Samplers accept either an RngStream or an already-derived
numpy.random.Generator; batch code derives one generator per chunk and draws
sequentially from it.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionError, ParameterError
from .linalg import left_nullspace_basis

__all__ = [
    "RngStream",
    "gaussian_matrix",
    "isotropic_frame",
    "isotropic_frame_in_nullspace",
    "matrix_beta",
]


@dataclass(frozen=True)
class RngStream:
    """Deterministic handle on one random stream.

    Attributes
    ----------
    seed : int
        Root seed, any nonnegative integer.
    stream : tuple of int
        Spawn path distinguishing this stream from siblings. The empty
        tuple is the root stream.
    """

    seed: int
    stream: tuple = ()

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ParameterError(f"seed must be a nonnegative integer, got {self.seed!r}")
        object.__setattr__(self, "stream", tuple(int(s) for s in self.stream))

    def generator(self):
        """Fresh Generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *ids):
        """Substream addressed by appending ids to the spawn path."""
        return RngStream(self.seed, self.stream + ids)


def as_generator(rng):
    """Accept an RngStream or a Generator, return a Generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise ParameterError(f"rng must be an RngStream or numpy Generator, got {type(rng)!r}")


def gaussian_matrix(rng, m, n, batch=()):
    """Complex Gaussian matrix with unit-variance entries.

    Real and imaginary parts are independent N(0, 1/2), so E|h_ij|^2 = 1.
    With batch=(..) a stacked (..., m, n) array is drawn in one shot.
    """
    if m < 1 or n < 1:
        raise DimensionError(f"matrix dimensions must be positive, got ({m}, {n})")
    gen = as_generator(rng)
    shape = tuple(batch) + (m, n)
    z = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    return z * np.sqrt(0.5)


def isotropic_frame(rng, m, n, batch=()):
    """Uniformly distributed orthonormal frame(s) on the Grassmannian.

    Thin QR of a complex Gaussian matrix under the positive-diagonal-R
    convention; for m = n this is a Haar unitary.
    """
    if m < n:
        raise DimensionError(f"frame needs m >= n, got ({m}, {n})")
    g = gaussian_matrix(rng, m, n, batch=batch)
    if g.ndim == 2:
        return _backend.orthonormalize(g[np.newaxis])[0]
    return _backend.orthonormalize(g)


def isotropic_frame_in_nullspace(rng, a, n):
    """Isotropic n-frame inside the left nullspace of a.

    Parameters
    ----------
    a : (m, k) ndarray with m > k; the frame lives in the (m - k)-dim
        orthogonal complement of its columns.
    n : number of frame columns, n <= m - k.

    Notes
    -----
    Unitary invariance makes the result isotropic within the complement no
    matter which complement basis is used.
    """
    a = np.asarray(a)
    basis = left_nullspace_basis(a)
    if n > basis.shape[1]:
        raise DimensionError(f"nullspace dimension {basis.shape[1]} cannot hold an n={n} frame")
    return basis @ isotropic_frame(rng, basis.shape[1], n)


def matrix_beta(rng, n, a, b):
    """Draw from the matrix-variate Beta(a, b) ensemble, n x n.

    Construction: W an isotropic a-frame and H an independent isotropic
    n-frame, both in dimension a + b; return H^H (I - W W^H) H. The trace
    has mean n * b / (a + b); for n = a = N, b = M - N this is the law of
    the squared chordal distance Gram between a random channel direction
    and one random codebook frame.
    """
    if n < 1 or a < n or b < n:
        raise ParameterError(f"matrix_beta needs a >= n and b >= n, got n={n}, a={a}, b={b}")
    gen = as_generator(rng)
    amb = a + b
    w = isotropic_frame(gen, amb, a)
    h = isotropic_frame(gen, amb, n)
    proj = h - w @ (w.conj().T @ h)
    return h.conj().T @ proj

"""Dense linear algebra backend contract.

Every spectral or solve step in the package goes through the active backend,
so a caller can swap in a different provider (for instance a GPU array
library with a numpy-compatible surface) without touching the algorithms.
"""

from __future__ import annotations

import os
from typing import Protocol

import numpy as np
import scipy.linalg


class DenseBackend(Protocol):
    """Operations the package needs from a dense linear algebra provider."""

    def svd(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Thin SVD ``a = U @ diag(s) @ Vt`` with ``s`` descending."""
        ...

    def singular_values(self, a: np.ndarray) -> np.ndarray:
        ...

    def eigh(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Symmetric eigendecomposition, eigenvalues ascending."""
        ...

    def eigvalsh(self, a: np.ndarray) -> np.ndarray:
        ...

    def lu_solve(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Solve ``a x = b`` by LU with partial pivoting."""
        ...

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        ...


class NumpyBackend:
    """Default provider backed by LAPACK through numpy and scipy."""

    def svd(self, a):
        return scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesdd")

    def singular_values(self, a):
        return scipy.linalg.svd(a, compute_uv=False, lapack_driver="gesdd")

    def eigh(self, a):
        return scipy.linalg.eigh(a)

    def eigvalsh(self, a):
        return scipy.linalg.eigvalsh(a)

    def lu_solve(self, a, b):
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
        return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)

    def matmul(self, a, b):
        return a @ b


_backend: DenseBackend = NumpyBackend()


def get_backend() -> DenseBackend:
    return _backend


def set_backend(backend: DenseBackend) -> DenseBackend:
    """Install ``backend`` and return the previously active one."""
    global _backend
    previous = _backend
    _backend = backend
    return previous


def max_workers() -> int:
    """Parallelism cap from ``BANDPINV_THREADS`` (defaults to the core count)."""
    raw = os.environ.get("BANDPINV_THREADS")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"BANDPINV_THREADS must be an integer, got {raw!r}") from None
        if value < 1:
            raise ValueError(f"BANDPINV_THREADS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1

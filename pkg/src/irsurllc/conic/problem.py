"""Standard-form cone program container and complex-to-real embedding.

Problems are stated as  min c'x  s.t.  A x = b,  x in K,  where K is an
ordered product of free, nonnegative-orthant, second-order, and PSD blocks.
PSD blocks live in scaled vectorized coordinates (svec: upper triangle,
off-diagonals times sqrt(2)) so that the Euclidean inner product of two svec
vectors equals the trace inner product of the matrices.

Hermitian matrices enter through the real symmetric embedding
[[Re H, -Im H], [Im H, Re H]]; note Tr(embed(H) embed(V)) = 2 Re Tr(H V), so
constraint coefficients built from embeddings must carry a factor 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "ConeBlock",
    "ConicProblem",
    "ConicProblemBuilder",
    "ConicSolution",
    "hermitian_embed",
    "complex_from_embedded",
    "svec",
    "smat",
    "svec_dim",
]


# ---------------------------------------------------------------------------
# svec / smat
# ---------------------------------------------------------------------------

_SQRT2 = np.sqrt(2.0)


def svec_dim(side: int) -> int:
    return side * (side + 1) // 2


@lru_cache(maxsize=None)
def _triu(side: int):
    rows, cols = np.triu_indices(side)
    scale = np.where(rows == cols, 1.0, _SQRT2)
    return rows, cols, scale, 1.0 / scale


def svec(M: np.ndarray) -> np.ndarray:
    """Scaled upper-triangle vectorization of a symmetric matrix."""
    side = M.shape[0]
    rows, cols, scale, _ = _triu(side)
    return np.asarray(M)[rows, cols] * scale


def smat(v: np.ndarray, side: int) -> np.ndarray:
    """Inverse of :func:`svec`."""
    rows, cols, _, inv_scale = _triu(side)
    M = np.zeros((side, side))
    M[rows, cols] = np.asarray(v) * inv_scale
    M = M + M.T
    M[np.diag_indices(side)] *= 0.5
    return M


@lru_cache(maxsize=None)
def svec_diag_positions(side: int) -> np.ndarray:
    """svec coordinates of the matrix diagonal entries."""
    rows, cols, _, _ = _triu(side)
    return np.nonzero(rows == cols)[0]


# ---------------------------------------------------------------------------
# Cones and problems
# ---------------------------------------------------------------------------

_KINDS = ("free", "nonneg", "soc", "psd")


@dataclass(frozen=True)
class ConeBlock:
    """One block of x-coordinates: free | nonneg | soc(dim) | psd(side)."""

    kind: str
    dim: int
    side: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.kind == "psd":
            if self.side < 1 or self.dim != svec_dim(self.side):
                raise ValueError("psd block dim must equal side*(side+1)//2")
        elif self.dim < 1:
            raise ValueError("cone block dim must be >= 1")
        if self.kind == "soc" and self.dim < 2:
            raise ValueError("soc block needs dim >= 2")


def free(dim: int) -> ConeBlock:
    return ConeBlock("free", dim)


def nonneg(dim: int) -> ConeBlock:
    return ConeBlock("nonneg", dim)


def soc(dim: int) -> ConeBlock:
    return ConeBlock("soc", dim)


def psd(side: int) -> ConeBlock:
    return ConeBlock("psd", svec_dim(side), side)


@dataclass
class ConicProblem:
    """min  objective . x   s.t.  eq_matrix @ x = eq_rhs,  x in cones.

    ``var_slices`` maps model-variable names to their coordinate ranges so
    callers can read solutions back without index bookkeeping.
    """

    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    cones: tuple[ConeBlock, ...]
    var_slices: dict[str, slice] = field(default_factory=dict)

    def __post_init__(self):
        self.objective = np.ascontiguousarray(self.objective, dtype=float)
        self.eq_matrix = np.ascontiguousarray(self.eq_matrix, dtype=float)
        self.eq_rhs = np.ascontiguousarray(self.eq_rhs, dtype=float)
        n = self.objective.size
        if self.eq_matrix.ndim != 2 or self.eq_matrix.shape[1] != n:
            raise ValueError("eq_matrix shape inconsistent with objective")
        if self.eq_rhs.shape != (self.eq_matrix.shape[0],):
            raise ValueError("eq_rhs length inconsistent with eq_matrix")
        if sum(blk.dim for blk in self.cones) != n:
            raise ValueError("cone blocks must cover every coordinate exactly once")
        for name, sl in self.var_slices.items():
            if sl.stop > n or sl.start < 0:
                raise ValueError(f"variable {name!r} slice out of range")

    @property
    def num_vars(self) -> int:
        return self.objective.size

    @property
    def num_eqs(self) -> int:
        return self.eq_rhs.size

    def extract(self, x: np.ndarray, name: str) -> np.ndarray:
        return x[self.var_slices[name]]

    # -- plain-text debug dump -------------------------------------------
    #
    # Format (one item per line unless noted):
    #   conicproblem v1
    #   dims <n> <p>
    #   cone <kind> <dim> [<side>]       (one per block, in order)
    #   var <name> <start> <stop>        (one per named variable)
    #   c   <n hex floats, space separated>
    #   b   <p hex floats>
    #   A <row-index> <n hex floats>     (one per equality row)
    # Hex float encoding (float.hex) is lossless.

    def dump(self, path_or_file) -> None:
        """Write the problem in a lossless plain-text standard form."""
        close = False
        if isinstance(path_or_file, (str, bytes)):
            fh = open(path_or_file, "w")
            close = True
        else:
            fh = path_or_file
        try:
            fh.write("conicproblem v1\n")
            fh.write(f"dims {self.num_vars} {self.num_eqs}\n")
            for blk in self.cones:
                if blk.kind == "psd":
                    fh.write(f"cone psd {blk.dim} {blk.side}\n")
                else:
                    fh.write(f"cone {blk.kind} {blk.dim}\n")
            for name, sl in self.var_slices.items():
                fh.write(f"var {name} {sl.start} {sl.stop}\n")
            fh.write("c " + " ".join(float(v).hex() for v in self.objective) + "\n")
            fh.write("b " + " ".join(float(v).hex() for v in self.eq_rhs) + "\n")
            for i in range(self.num_eqs):
                fh.write(
                    f"A {i} " + " ".join(float(v).hex() for v in self.eq_matrix[i]) + "\n"
                )
        finally:
            if close:
                fh.close()

    @staticmethod
    def load(path_or_file) -> "ConicProblem":
        close = False
        if isinstance(path_or_file, (str, bytes)):
            fh = open(path_or_file)
            close = True
        else:
            fh = path_or_file
        try:
            header = fh.readline().strip()
            if header != "conicproblem v1":
                raise ValueError(f"bad dump header: {header!r}")
            _, n_s, p_s = fh.readline().split()
            n, p = int(n_s), int(p_s)
            cones: list[ConeBlock] = []
            var_slices: dict[str, slice] = {}
            c = b = None
            A = np.zeros((p, n))
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                if parts[0] == "cone":
                    side = int(parts[3]) if parts[1] == "psd" else 0
                    cones.append(ConeBlock(parts[1], int(parts[2]), side))
                elif parts[0] == "var":
                    var_slices[parts[1]] = slice(int(parts[2]), int(parts[3]))
                elif parts[0] == "c":
                    c = np.array([float.fromhex(v) for v in parts[1:]])
                elif parts[0] == "b":
                    b = np.array([float.fromhex(v) for v in parts[1:]])
                elif parts[0] == "A":
                    A[int(parts[1])] = [float.fromhex(v) for v in parts[2:]]
                else:
                    raise ValueError(f"bad dump line: {line!r}")
            if c is None or b is None:
                raise ValueError("dump missing c or b")
            return ConicProblem(c, A, b, tuple(cones), var_slices)
        finally:
            if close:
                fh.close()


class ConicProblemBuilder:
    """Incremental assembly of a :class:`ConicProblem`.

    Blocks are laid out in declaration order; equality rows reference named
    variables with dense coefficient arrays.
    """

    def __init__(self):
        self._blocks: list[ConeBlock] = []
        self._slices: dict[str, slice] = {}
        self._n = 0
        self._rows: list[dict[str, np.ndarray]] = []
        self._rhs: list[float] = []
        self._obj: dict[str, np.ndarray] = {}

    def add_var(self, name: str, block: ConeBlock) -> slice:
        if name in self._slices:
            raise ValueError(f"duplicate variable {name!r}")
        sl = slice(self._n, self._n + block.dim)
        self._blocks.append(block)
        self._slices[name] = sl
        self._n += block.dim
        return sl

    def add_equality(self, coeffs: dict[str, np.ndarray], rhs: float) -> None:
        for name in coeffs:
            if name not in self._slices:
                raise ValueError(f"unknown variable {name!r}")
        self._rows.append({k: np.atleast_1d(np.asarray(v, float)) for k, v in coeffs.items()})
        self._rhs.append(float(rhs))

    def set_objective(self, coeffs: dict[str, np.ndarray]) -> None:
        self._obj = {k: np.atleast_1d(np.asarray(v, float)) for k, v in coeffs.items()}

    def build(self) -> ConicProblem:
        c = np.zeros(self._n)
        for name, coef in self._obj.items():
            c[self._slices[name]] = coef
        A = np.zeros((len(self._rows), self._n))
        for i, row in enumerate(self._rows):
            for name, coef in row.items():
                A[i, self._slices[name]] = coef
        return ConicProblem(c, A, np.array(self._rhs), tuple(self._blocks), dict(self._slices))


@dataclass
class ConicSolution:
    """Outcome of a solve: status is 'optimal' | 'infeasible' | 'max_iters'.

    For optimal solutions all three residuals are at most the solve
    tolerance.  For infeasible problems ``certificate`` holds the Farkas
    vector (y for primal infeasibility, x for dual) and ``detail`` says
    which side failed.
    """

    status: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    duality_gap: float
    iterations: int
    certificate: np.ndarray | None = None
    detail: str = ""


# ---------------------------------------------------------------------------
# Hermitian embedding
# ---------------------------------------------------------------------------

def hermitian_embed(H: np.ndarray) -> np.ndarray:
    """Real symmetric 2n x 2n embedding [[Re H, -Im H], [Im H, Re H]].

    PSD iff H is PSD; every eigenvalue of H appears twice; traces double.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.abs(H).max()) if H.size else 1.0)
    if H.size and np.abs(H - H.conj().T).max() > 1e-12 * scale:
        raise ValueError("matrix is not Hermitian within 1e-12")
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def complex_from_embedded(M: np.ndarray) -> np.ndarray:
    """Recover the Hermitian matrix represented by a real 2n x 2n embedding.

    Averages over the embedding's structural symmetry first, so it also
    accepts matrices that are only approximately of embedded form (e.g. an
    SDP solution over unstructured symmetric matrices).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise ValueError("expected a square matrix of even side")
    n = M.shape[0] // 2
    re = 0.5 * (M[:n, :n] + M[n:, n:])
    im = 0.5 * (M[n:, :n] - M[:n, n:])
    H = re + 1j * im
    return 0.5 * (H + H.conj().T)

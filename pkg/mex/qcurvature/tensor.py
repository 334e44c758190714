import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mex.qcurvature.constants import (
    DEFAULT_NONSYMMETRY_TOLERANCE,
    DEFAULT_SYMMETRY_TOLERANCE,
    JACOBI_MAX_SWEEPS,
    JACOBI_THRESHOLD,
)
from mex.qcurvature.exceptions import TensorError
from mex.qcurvature.types import FloatArray, SymmetryKind, Variance

_LETTERS = "abcdefghijklmnopqrstuvw"


class SlotSymmetry(BaseModel):
    """Declared symmetry between tensor slots."""

    model_config = ConfigDict(frozen=True)

    kind: SymmetryKind
    slots: tuple[int, ...]


RIEMANN_SYMMETRIES = (
    SlotSymmetry(kind="antisymmetric", slots=(0, 1)),
    SlotSymmetry(kind="antisymmetric", slots=(2, 3)),
    SlotSymmetry(kind="pair_interchange", slots=(0, 1, 2, 3)),
)
SYMMETRIC_PAIR = (SlotSymmetry(kind="symmetric", slots=(0, 1)),)


class TensorValue(BaseModel):
    """Dense tensor at a point with one variance tag per slot."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1)
    components: FloatArray
    variance: list[Variance]
    symmetries: list[SlotSymmetry] = []

    @property
    def rank(self) -> int:
        """Return the number of slots."""
        return len(self.variance)

    @model_validator(mode="after")
    def check_shape(self) -> "TensorValue":
        """Require dim**rank components laid out as a rank-dimensional array."""
        expected = (self.dim,) * self.rank
        if self.components.shape != expected:
            msg = f"components of shape {self.components.shape}, expected {expected}"
            raise ValueError(msg)
        return self


class EigenData(BaseModel):
    """Ascending eigenvalues with eigenvectors as matrix columns."""

    eigenvalues: FloatArray
    eigenvectors: FloatArray


def covariant(components: NDArray[np.float64]) -> TensorValue:
    """Wrap an all-covariant component array."""
    rank = components.ndim
    dim = components.shape[0] if rank else 1
    return TensorValue(dim=dim, components=components, variance=["covariant"] * rank)


def _check_slot(t: TensorValue, slot: int) -> None:
    if not 0 <= slot < t.rank:
        msg = f"slot {slot} out of range for rank {t.rank}"
        raise TensorError(msg)


def _check_dim(t: TensorValue, other: TensorValue) -> None:
    if t.dim != other.dim:
        msg = f"dimension mismatch: {t.dim} and {other.dim}"
        raise TensorError(msg)


def raise_index(t: TensorValue, slot: int, inverse_metric: TensorValue) -> TensorValue:
    """Turn a covariant slot into a contravariant one."""
    _check_slot(t, slot)
    _check_dim(t, inverse_metric)
    if t.variance[slot] != "covariant":
        msg = f"slot {slot} is already contravariant"
        raise TensorError(msg)
    letters = _LETTERS[: t.rank]
    source = letters[:slot] + "x" + letters[slot + 1 :]
    target = letters[:slot] + "y" + letters[slot + 1 :]
    components = np.einsum(
        f"{source},yx->{target}", t.components, inverse_metric.components
    )
    variance = list(t.variance)
    variance[slot] = "contravariant"
    return TensorValue(dim=t.dim, components=components, variance=variance)


def lower_index(t: TensorValue, slot: int, metric: TensorValue) -> TensorValue:
    """Turn a contravariant slot into a covariant one."""
    _check_slot(t, slot)
    _check_dim(t, metric)
    if t.variance[slot] != "contravariant":
        msg = f"slot {slot} is already covariant"
        raise TensorError(msg)
    letters = _LETTERS[: t.rank]
    source = letters[:slot] + "x" + letters[slot + 1 :]
    target = letters[:slot] + "y" + letters[slot + 1 :]
    components = np.einsum(f"{source},yx->{target}", t.components, metric.components)
    variance = list(t.variance)
    variance[slot] = "covariant"
    return TensorValue(dim=t.dim, components=components, variance=variance)


def contract(
    t: TensorValue,
    slot_a: int,
    slot_b: int,
    metric: TensorValue | None = None,
    inverse_metric: TensorValue | None = None,
) -> TensorValue:
    """Trace over two slots, using the metric when both share a variance."""
    _check_slot(t, slot_a)
    _check_slot(t, slot_b)
    if slot_a == slot_b:
        msg = "contraction needs two distinct slots"
        raise TensorError(msg)
    letters = list(_LETTERS[: t.rank])
    free = "".join(
        letter for index, letter in enumerate(letters) if index not in (slot_a, slot_b)
    )
    variance = [
        v for index, v in enumerate(t.variance) if index not in (slot_a, slot_b)
    ]
    kind_a, kind_b = t.variance[slot_a], t.variance[slot_b]
    if kind_a != kind_b:
        letters[slot_a] = letters[slot_b] = "x"
        components = np.einsum(f"{''.join(letters)}->{free}", t.components)
    else:
        link = inverse_metric if kind_a == "covariant" else metric
        if link is None:
            msg = f"contracting two {kind_a} slots needs a metric"
            raise TensorError(msg)
        _check_dim(t, link)
        letters[slot_a], letters[slot_b] = "x", "y"
        components = np.einsum(
            f"{''.join(letters)},xy->{free}", t.components, link.components
        )
    return TensorValue(dim=t.dim, components=np.asarray(components), variance=variance)


def kulkarni_nomizu(a: TensorValue, b: TensorValue) -> TensorValue:
    """Return the Kulkarni-Nomizu product of two symmetric 2-tensors."""
    _check_dim(a, b)
    if a.rank != 2 or b.rank != 2:  # noqa: PLR2004
        msg = "the Kulkarni-Nomizu product takes two 2-tensors"
        raise TensorError(msg)
    p, q = a.components, b.components
    components = (
        np.einsum("ik,jl->ijkl", p, q)
        + np.einsum("jl,ik->ijkl", p, q)
        - np.einsum("il,jk->ijkl", p, q)
        - np.einsum("jk,il->ijkl", p, q)
    )
    return TensorValue(
        dim=a.dim,
        components=components,
        variance=["covariant"] * 4,
        symmetries=list(RIEMANN_SYMMETRIES),
    )


def tensor_norm(
    t: TensorValue, metric: TensorValue, inverse_metric: TensorValue
) -> float:
    """Return the squared norm of an all-covariant tensor."""
    _check_dim(t, metric)
    _check_dim(t, inverse_metric)
    if any(v != "covariant" for v in t.variance):
        msg = "tensor_norm expects an all-covariant tensor"
        raise TensorError(msg)
    raised = t
    for slot in range(t.rank):
        raised = raise_index(raised, slot, inverse_metric)
    return float(np.sum(t.components * raised.components))


def _permuted(
    components: NDArray[np.float64], symmetry: SlotSymmetry
) -> NDArray[np.float64]:
    axes = list(range(components.ndim))
    if symmetry.kind == "pair_interchange":
        a, b, c, d = symmetry.slots
        axes[a], axes[b], axes[c], axes[d] = c, d, a, b
    else:
        a, b = symmetry.slots
        axes[a], axes[b] = b, a
    image = np.transpose(components, axes)
    return -image if symmetry.kind == "antisymmetric" else image


def symmetry_residual(t: TensorValue, symmetry: SlotSymmetry) -> float:
    """Return the largest deviation from a symmetry relative to the tensor size."""
    for slot in symmetry.slots:
        _check_slot(t, slot)
    scale = float(np.max(np.abs(t.components), initial=0.0))
    if scale == 0:
        return 0.0
    difference = t.components - _permuted(t.components, symmetry)
    return float(np.max(np.abs(difference))) / scale


def stamp_symmetries(
    t: TensorValue,
    symmetries: tuple[SlotSymmetry, ...] | list[SlotSymmetry],
    tolerance: float = DEFAULT_SYMMETRY_TOLERANCE,
) -> TensorValue:
    """Attach symmetry metadata after checking that every symmetry holds."""
    for symmetry in symmetries:
        residual = symmetry_residual(t, symmetry)
        if residual > tolerance:
            msg = (
                f"{symmetry.kind} symmetry on slots {symmetry.slots} "
                f"fails by {residual:.3e}"
            )
            raise TensorError(msg)
    return t.model_copy(update={"symmetries": list(symmetries)})


def first_bianchi_residual(riemann: TensorValue) -> float:
    """Return max |R_ijkl + R_jkil + R_kijl| relative to max |R|."""
    r = riemann.components
    cyclic = r + np.einsum("jkil->ijkl", r) + np.einsum("kijl->ijkl", r)
    scale = float(np.max(np.abs(r), initial=0.0))
    return float(np.max(np.abs(cyclic))) / scale if scale else 0.0


def jacobi_eigh(
    matrices: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Diagonalize a batch of symmetric matrices by cyclic Jacobi rotations.

    Returns ascending eigenvalues and the matching eigenvectors as columns.
    """
    a = np.array(matrices, dtype=np.float64, copy=True)
    n = a.shape[-1]
    v = np.broadcast_to(np.eye(n), a.shape).copy()
    scale = np.sqrt(np.sum(a * a, axis=(-2, -1)))
    off_diagonal = ~np.eye(n, dtype=bool)
    for _ in range(JACOBI_MAX_SWEEPS):
        residual = np.sqrt(np.sum(np.where(off_diagonal, a * a, 0.0), axis=(-2, -1)))
        if np.all(residual <= JACOBI_THRESHOLD * scale):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[..., p, q]
                active = np.abs(apq) > 0
                safe = np.where(active, apq, 1.0)
                theta = (a[..., q, q] - a[..., p, p]) / (2.0 * safe)
                sign = np.where(theta >= 0, 1.0, -1.0)
                root = np.sqrt(theta * theta + 1.0)
                t = np.where(active, sign / (np.abs(theta) + root), 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                c, s = c[..., None], s[..., None]
                col_p, col_q = a[..., :, p].copy(), a[..., :, q].copy()
                a[..., :, p] = c * col_p - s * col_q
                a[..., :, q] = s * col_p + c * col_q
                row_p, row_q = a[..., p, :].copy(), a[..., q, :].copy()
                a[..., p, :] = c * row_p - s * row_q
                a[..., q, :] = s * row_p + c * row_q
                vec_p, vec_q = v[..., :, p].copy(), v[..., :, q].copy()
                v[..., :, p] = c * vec_p - s * vec_q
                v[..., :, q] = s * vec_p + c * vec_q
    values = np.diagonal(a, axis1=-2, axis2=-1)
    order = np.argsort(values, axis=-1)
    values = np.take_along_axis(values, order, axis=-1)
    vectors = np.take_along_axis(v, order[..., None, :], axis=-1)
    return values, vectors


def sym_eigen(s: TensorValue) -> EigenData:
    """Return the ascending spectrum and an orthonormal eigenbasis."""
    if s.rank != 2:  # noqa: PLR2004
        msg = f"sym_eigen expects a 2-tensor, got rank {s.rank}"
        raise TensorError(msg)
    matrix = s.components
    scale = max(float(np.max(np.abs(matrix), initial=0.0)), 1.0)
    asymmetry = float(np.max(np.abs(matrix - matrix.T), initial=0.0))
    if asymmetry > DEFAULT_NONSYMMETRY_TOLERANCE * scale:
        msg = f"matrix is not symmetric (deviation {asymmetry:.3e})"
        raise TensorError(msg)
    values, vectors = jacobi_eigh(0.5 * (matrix + matrix.T))
    return EigenData(eigenvalues=values, eigenvectors=vectors)


def generalized_eigen(
    h: NDArray[np.float64], g: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Solve h v = k g v for a batch of symmetric h and positive definite g.

    The eigenvectors are returned as g-orthonormal columns.
    """
    try:
        lower = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as error:
        msg = "metric is not positive definite"
        raise TensorError(msg) from error
    inverse = np.linalg.inv(lower)
    congruent = inverse @ h @ np.swapaxes(inverse, -1, -2)
    congruent = 0.5 * (congruent + np.swapaxes(congruent, -1, -2))
    values, vectors = jacobi_eigh(congruent)
    return values, np.swapaxes(inverse, -1, -2) @ vectors

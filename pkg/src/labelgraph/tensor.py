"""Dense float64 tensors with reverse-mode automatic differentiation.

Values are numpy arrays of rank 1 or 2. Every operation appends a node to a
Tape during the forward pass; ``backward`` sweeps the tape in reverse
creation order and accumulates vector-Jacobian products into each node's
gradient slot. A tape is single-use and single-threaded; independent tapes
may run concurrently and their gradient maps are merged by summation.

There is no implicit broadcasting: binary elementwise ops require equal
shapes, and the one sanctioned broadcast (adding a row vector of biases to
every row of a matrix) has its own op, ``add_bias``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ContractError, DomainError, ShapeError

# Sigmoid outputs are clamped into [SIGMOID_EPS, 1 - SIGMOID_EPS] so that a
# following log (e.g. in a cross-entropy loss) can never see 0 or 1.
SIGMOID_EPS = 1e-12


class Tensor:
    """One node on the tape: a float64 array plus its backprop wiring."""

    __slots__ = ("value", "tape", "requires_grad", "grad", "parents", "vjps")

    def __init__(self, value, tape, parents=(), vjps=(), requires_grad=False):
        self.value = value
        self.tape = tape
        self.parents = parents
        self.vjps = vjps
        self.requires_grad = requires_grad
        self.grad = None  # allocated lazily; None means "no path to the loss yet"

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.value.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={tuple(self.shape)}, requires_grad={self.requires_grad})"


class Tape:
    """Append-only record of one forward pass.

    Named leaves registered through ``param`` are the differentiation
    targets; ``grads`` returns their gradient map after ``backward``.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.params: dict[str, Tensor] = {}

    def _record(self, t: Tensor) -> Tensor:
        self.nodes.append(t)
        return t

    def leaf(self, value, requires_grad=False) -> Tensor:
        value = _as_value(value)
        return self._record(Tensor(value, self, requires_grad=requires_grad))

    def const(self, value) -> Tensor:
        """A leaf that never receives a gradient (fixed data, masks, ...)."""
        return self.leaf(value, requires_grad=False)

    def param(self, name: str, value) -> Tensor:
        """Named differentiable leaf; repeated calls return the same node.

        Sharing one node per name is what makes parameters shared across
        layers accumulate their gradient contributions in one place.
        """
        node = self.params.get(name)
        if node is None:
            node = self.leaf(value, requires_grad=True)
            self.params[name] = node
        return node

    def grads(self) -> dict[str, np.ndarray]:
        """Gradient map for all named leaves; untouched leaves get exact zeros."""
        out = {}
        for name, node in self.params.items():
            if node.grad is None:
                out[name] = np.zeros_like(node.value)
            else:
                out[name] = node.grad
        return out


def _as_value(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise ShapeError(f"tensors are rank 1 or 2, got rank {arr.ndim}")
    return arr


def _node(tape: Tape, value: np.ndarray, parents, vjps) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    return tape._record(Tensor(value, tape, tuple(parents), tuple(vjps), requires))


def _same_tape(*tensors: Tensor) -> Tape:
    tape = tensors[0].tape
    for t in tensors[1:]:
        if t.tape is not tape:
            raise ContractError("operands live on different tapes")
    return tape


def _check_equal_shapes(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {tuple(a.shape)} and {tuple(b.shape)} differ")


# ---------------------------------------------------------------------------
# elementwise and shape ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_equal_shapes("add", a, b)
    tape = _same_tape(a, b)
    return _node(tape, a.value + b.value, (a, b),
                 (lambda g: g.copy(), lambda g: g.copy()))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_equal_shapes("sub", a, b)
    tape = _same_tape(a, b)
    return _node(tape, a.value - b.value, (a, b),
                 (lambda g: g.copy(), lambda g: -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_equal_shapes("mul", a, b)
    tape = _same_tape(a, b)
    av, bv = a.value, b.value
    return _node(tape, av * bv, (a, b),
                 (lambda g: g * bv, lambda g: g * av))


def scale(a: Tensor, k: float) -> Tensor:
    k = float(k)
    return _node(a.tape, a.value * k, (a,), (lambda g: g * k,))


def add_bias(a: Tensor, bias: Tensor) -> Tensor:
    """Add a length-n bias row to every row of an m-by-n matrix."""
    if a.ndim != 2 or bias.ndim != 1 or a.shape[1] != bias.shape[0]:
        raise ShapeError(f"add_bias: shapes {tuple(a.shape)} and {tuple(bias.shape)} differ")
    tape = _same_tape(a, bias)
    return _node(tape, a.value + bias.value, (a, bias),
                 (lambda g: g.copy(), lambda g: g.sum(axis=0)))


def sigmoid(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        y = 1.0 / (1.0 + np.exp(-a.value))
    y = np.clip(y, SIGMOID_EPS, 1.0 - SIGMOID_EPS)
    return _node(a.tape, y, (a,), (lambda g: g * (y * (1.0 - y)),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.value)
    return _node(a.tape, y, (a,), (lambda g: g * (1.0 - y * y),))


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.value, 0.0)
    # derivative at exactly 0 is defined to be 0, which y > 0 encodes
    return _node(a.tape, y, (a,), (lambda g: g * (y > 0.0),))


def log(a: Tensor) -> Tensor:
    if np.any(a.value <= 0.0):
        raise DomainError("log: all entries must be strictly positive")
    av = a.value
    return _node(a.tape, np.log(av), (a,), (lambda g: g / av,))


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: needs rank-2 operands, got {tuple(a.shape)} and {tuple(b.shape)}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ for shapes {tuple(a.shape)} and {tuple(b.shape)}")
    tape = _same_tape(a, b)
    av, bv = a.value, b.value
    return _node(tape, av @ bv, (a, b),
                 (lambda g: g @ bv.T, lambda g: av.T @ g))


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose: needs a rank-2 operand, got {tuple(a.shape)}")
    return _node(a.tape, a.value.T.copy(), (a,), (lambda g: g.T.copy(),))


def gather_rows(a: Tensor, indices) -> Tensor:
    """Select rows of a matrix by index (embedding lookup)."""
    if a.ndim != 2:
        raise ShapeError(f"gather_rows: needs a rank-2 operand, got {tuple(a.shape)}")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("gather_rows: indices must be one-dimensional")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise DomainError(f"gather_rows: index out of range for {a.shape[0]} rows")
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return out

    return _node(a.tape, a.value[idx].copy(), (a,), (vjp,))


# ---------------------------------------------------------------------------
# softmax / reductions / concatenation
# ---------------------------------------------------------------------------

def softmax(a: Tensor, axis: str) -> Tensor:
    """Softmax where each slice along `axis` ("rows" or "cols") sums to 1.

    A rank-1 input is treated as a single row. Computed with per-slice max
    subtraction so large scores never overflow.
    """
    if axis not in ("rows", "cols"):
        raise DomainError(f"softmax: axis must be 'rows' or 'cols', got {axis!r}")
    av = a.value
    if av.ndim == 1:
        if axis != "rows":
            raise ShapeError("softmax: a rank-1 tensor only has rows")
        shifted = av - av.max()
        e = np.exp(shifted)
        y = e / e.sum()

        def vjp1(g):
            return y * (g - float(np.dot(g, y)))

        return _node(a.tape, y, (a,), (vjp1,))

    ax = 1 if axis == "rows" else 0
    shifted = av - av.max(axis=ax, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=ax, keepdims=True)

    def vjp(g):
        return y * (g - (g * y).sum(axis=ax, keepdims=True))

    return _node(a.tape, y, (a,), (vjp,))


def reduce(a: Tensor, kind: str, axis: str = "all") -> Tensor:
    """Sum or mean over rows, cols, or the whole tensor.

    Reducing over "rows" collapses the row index (giving one value per
    column) and vice versa. Scalars come back as shape (1,).
    """
    if kind not in ("sum", "mean"):
        raise DomainError(f"reduce: kind must be 'sum' or 'mean', got {kind!r}")
    if axis not in ("rows", "cols", "all"):
        raise DomainError(f"reduce: axis must be 'rows', 'cols' or 'all', got {axis!r}")
    av = a.value
    if av.size == 0:
        raise DomainError("reduce: empty reduction axis")
    shape = av.shape

    if av.ndim == 1 or axis == "all":
        n = av.size
        total = av.sum()
        if kind == "mean":
            total = total / n
        k = 1.0 / n if kind == "mean" else 1.0

        def vjp_all(g):
            return np.full(shape, g.reshape(-1)[0] * k)

        return _node(a.tape, np.array([total]), (a,), (vjp_all,))

    ax = 0 if axis == "rows" else 1
    n = shape[ax]
    out = av.sum(axis=ax)
    if kind == "mean":
        out = out / n
    k = 1.0 / n if kind == "mean" else 1.0

    def vjp(g):
        if ax == 0:
            return np.broadcast_to(g * k, shape).copy()
        return np.broadcast_to((g * k)[:, None], shape).copy()

    return _node(a.tape, out, (a,), (vjp,))


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the last axis: columns for matrices, entries for vectors."""
    if a.ndim != b.ndim:
        raise ShapeError(f"concat: ranks differ for shapes {tuple(a.shape)} and {tuple(b.shape)}")
    tape = _same_tape(a, b)
    if a.ndim == 1:
        wa = a.shape[0]
        value = np.concatenate([a.value, b.value])
        return _node(tape, value, (a, b),
                     (lambda g: g[:wa].copy(), lambda g: g[wa:].copy()))
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat: leading dimensions differ for shapes {tuple(a.shape)} and {tuple(b.shape)}")
    wa = a.shape[1]
    value = np.concatenate([a.value, b.value], axis=1)
    return _node(tape, value, (a, b),
                 (lambda g: g[:, :wa].copy(), lambda g: g[:, wa:].copy()))


def split(a: Tensor, width: int) -> tuple[Tensor, Tensor]:
    """Inverse of concat: cut off the first `width` columns (or entries)."""
    last = a.shape[-1]
    if not 0 <= width <= last:
        raise ShapeError(f"split: width {width} out of range for shape {tuple(a.shape)}")
    if a.ndim == 1:
        left = _node(a.tape, a.value[:width].copy(), (a,),
                     (lambda g: np.concatenate([g, np.zeros(last - width)]),))
        right = _node(a.tape, a.value[width:].copy(), (a,),
                      (lambda g: np.concatenate([np.zeros(width), g]),))
        return left, right
    rows = a.shape[0]
    left = _node(a.tape, a.value[:, :width].copy(), (a,),
                 (lambda g: np.concatenate([g, np.zeros((rows, last - width))], axis=1),))
    right = _node(a.tape, a.value[:, width:].copy(), (a,),
                  (lambda g: np.concatenate([np.zeros((rows, width)), g], axis=1),))
    return left, right


# ---------------------------------------------------------------------------
# fused attention score kernel
# ---------------------------------------------------------------------------

def pair_scores(a: Tensor, b: Tensor, wa: Tensor, wb: Tensor | None,
                bias: Tensor | None, u: Tensor) -> Tensor:
    """S[i, j] = u . tanh(a_i Wa + b_j Wb + bias) for all row pairs.

    `wb` may be None, in which case rows of `b` enter the tanh directly
    (used when b already lives in the hidden width, e.g. factor vectors).
    One fused node keeps the rank-3 tanh intermediate internal so the
    public tensor contract stays rank 2.
    """
    pre_a = a.value @ wa.value
    pre_b = b.value @ wb.value if wb is not None else b.value
    if pre_a.shape[1] != pre_b.shape[1] or u.shape[0] != pre_a.shape[1]:
        raise ShapeError("pair_scores: hidden widths do not agree")
    arg = pre_a[:, None, :] + pre_b[None, :, :]
    if bias is not None:
        arg = arg + bias.value
    t = np.tanh(arg)  # (m, n, hidden)
    s = t @ u.value   # (m, n)

    av, bv = a.value, b.value
    wav = wa.value
    wbv = wb.value if wb is not None else None
    uv = u.value

    state = {}

    def _d(g):
        # shared piece of every vjp: dL/d(pre_a[i] + pre_b[j] + bias)
        key = id(g)
        if state.get("key") != key:
            state["key"] = key
            state["d"] = g[:, :, None] * ((1.0 - t * t) * uv)
        return state["d"]

    parents = [a, b, wa]
    vjps = [
        lambda g: _d(g).sum(axis=1) @ wav.T,
        (lambda g: _d(g).sum(axis=0) @ wbv.T) if wb is not None else (lambda g: _d(g).sum(axis=0)),
        lambda g: av.T @ _d(g).sum(axis=1),
    ]
    if wb is not None:
        parents.append(wb)
        vjps.append(lambda g: bv.T @ _d(g).sum(axis=0))
    if bias is not None:
        parents.append(bias)
        vjps.append(lambda g: _d(g).sum(axis=(0, 1)))
    parents.append(u)
    vjps.append(lambda g: np.einsum("ij,ijh->h", g, t))

    tape = _same_tape(*parents)
    return _node(tape, s, parents, vjps)


def gated_update(prev: Tensor, msg: Tensor, wg: Tensor, ug: Tensor, bg: Tensor,
                 wc: Tensor, uc: Tensor, bc: Tensor) -> Tensor:
    """Fused highway step: (1 - gate) * prev + gate * relu candidate, with
    gate = sigmoid(prev @ wg + msg @ ug + bg) and candidate pre-activation
    prev @ wc + msg @ uc + bc.

    Semantically identical to composing the primitive ops (including the
    sigmoid clamp); fused into one node because it dominates the per-step
    node count.
    """
    pv, mv = prev.value, msg.value
    with np.errstate(over="ignore"):
        gate = 1.0 / (1.0 + np.exp(-(pv @ wg.value + mv @ ug.value + bg.value)))
    gate = np.clip(gate, SIGMOID_EPS, 1.0 - SIGMOID_EPS)
    cand = np.maximum(pv @ wc.value + mv @ uc.value + bc.value, 0.0)
    out = pv + gate * (cand - pv)

    wgv, ugv, wcv, ucv = wg.value, ug.value, wc.value, uc.value
    state = {}

    def _parts(g):
        if state.get("key") != id(g):
            state["key"] = id(g)
            state["dgate_pre"] = g * (cand - pv) * gate * (1.0 - gate)
            state["dcand_pre"] = g * gate * (cand > 0.0)
        return state["dgate_pre"], state["dcand_pre"]

    def vjp_prev(g):
        da, db = _parts(g)
        return g * (1.0 - gate) + da @ wgv.T + db @ wcv.T

    def vjp_msg(g):
        da, db = _parts(g)
        return da @ ugv.T + db @ ucv.T

    parents = (prev, msg, wg, ug, bg, wc, uc, bc)
    vjps = (
        vjp_prev,
        vjp_msg,
        lambda g: pv.T @ _parts(g)[0],
        lambda g: mv.T @ _parts(g)[0],
        lambda g: _parts(g)[0].sum(axis=0),
        lambda g: pv.T @ _parts(g)[1],
        lambda g: mv.T @ _parts(g)[1],
        lambda g: _parts(g)[1].sum(axis=0),
    )
    tape = _same_tape(*parents)
    return _node(tape, out, parents, vjps)


# ---------------------------------------------------------------------------
# reverse sweep and gradient verification
# ---------------------------------------------------------------------------

def backward(loss: Tensor) -> dict[str, np.ndarray]:
    """Populate gradients for everything reachable from `loss`; return the
    gradient map over the tape's named leaves."""
    if loss.value.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {tuple(loss.shape)}")
    tape = loss.tape
    loss.grad = np.ones_like(loss.value)
    for node in reversed(tape.nodes):
        g = node.grad
        if g is None or not node.parents:
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            if not parent.requires_grad:
                continue
            pg = vjp(g)
            if parent.grad is None:
                parent.grad = pg
            else:
                parent.grad += pg
    return tape.grads()


def finite_difference_check(f: Callable[[dict], tuple[float, dict]],
                            params: dict[str, np.ndarray],
                            eps: float = 1e-5) -> float:
    """Max relative error between f's reported gradients and central differences.

    `f(params)` must deterministically return ``(value, gradient_map)``; the
    finite-difference side only uses the value. The relative error for each
    coordinate is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
    """
    v1, grads = f(params)
    v2, _ = f(params)
    if v1 != v2:
        raise ContractError("finite_difference_check: f is not deterministic "
                            f"({v1!r} != {v2!r})")
    worst = 0.0
    for name in params:
        arr = params[name]
        g = grads[name]
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + eps
            up, _ = f(params)
            arr[idx] = orig - eps
            down, _ = f(params)
            arr[idx] = orig
            fd = (up - down) / (2.0 * eps)
            ad = float(g[idx])
            err = abs(ad - fd) / max(1.0, abs(ad), abs(fd))
            if err > worst:
                worst = err
    return worst

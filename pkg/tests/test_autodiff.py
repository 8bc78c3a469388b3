import numpy as np
import pytest

from semcom.autodiff import (
    CheckpointError, NonFiniteError, ParamGroup, Tape, Tensor, backward, clip_grad_norm,
    gradcheck, ops, read_tensors, sgd_step, write_tensors,
)
from semcom.autodiff.optim import SGD, Adam, make_optimizer


def param(data, name="p"):
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True, name=name)


def run_backward(build):
    tape = Tape()
    with tape:
        loss = build()
    backward(loss, tape)
    return loss


# ------------------------------------------------------------------ forward values

def test_matmul_identity_zero_and_oracle():
    b = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(ops.matmul(np.eye(2), b).data, b)
    assert np.array_equal(ops.matmul(np.zeros((2, 2)), b).data, np.zeros((2, 2)))

    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    c = np.array([[5.0], [6.0]])
    naive = np.zeros((2, 1))
    for i in range(2):
        for j in range(1):
            for k in range(2):
                naive[i, j] += a[i, k] * c[k, j]
    assert np.array_equal(ops.matmul(a, c).data, naive)
    assert np.array_equal(naive, [[17.0], [39.0]])


def test_matmul_shape_mismatch_reports_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
        ops.matmul(np.ones((2, 3)), np.ones((2, 2)))


def test_softmax_rows_examples():
    out = ops.softmax_rows(np.array([[0.0, 0.0, 0.0], [5.0, 1005.0, 5.0], [1.0, 2.0, 3.0]])).data
    assert np.allclose(out[0], 1.0 / 3.0)
    assert np.all(np.isfinite(out[1]))
    assert out[1, 1] == pytest.approx(1.0) and out[1, 0] == pytest.approx(0.0, abs=1e-12)
    e = np.exp([1.0, 2.0, 3.0])
    assert np.allclose(out[2], e / e.sum(), atol=1e-12)
    assert np.allclose(out[2], [0.09003, 0.24473, 0.66524], atol=1e-4)
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-6)


def test_layer_norm_examples():
    g, b = np.ones(2), np.zeros(2)
    assert np.allclose(ops.layer_norm(np.array([[4.0, 4.0]]), g, b).data, 0.0)
    assert np.allclose(ops.layer_norm(np.array([[1.0, 3.0]]), g, b).data, [[-1.0, 1.0]], atol=1e-3)
    x = np.random.default_rng(0).normal(size=(3, 16))
    x = (x - x.mean(-1, keepdims=True)) / x.std(-1, keepdims=True)
    assert np.allclose(ops.layer_norm(x, np.ones(16), np.zeros(16)).data, x, atol=1e-5)


def test_float32_default_and_finite_check():
    t = ops.add(np.ones(3, dtype=np.float32), 1.0)
    assert t.data.dtype == np.float32
    with pytest.raises(NonFiniteError), np.errstate(invalid="ignore"):
        ops.log(np.array([-1.0]))


# ------------------------------------------------------------------ backward

def test_backward_linear_and_square():
    w = param(np.random.default_rng(1).normal(size=(3, 4)))
    run_backward(lambda: ops.sum(w))
    assert np.array_equal(w.grad, np.ones((3, 4)))

    v = param([2.0, -3.0])
    run_backward(lambda: ops.sum(v * v))
    assert np.allclose(v.grad, [4.0, -6.0])


def test_fan_out_accumulates():
    x = param([1.0, 2.0])
    run_backward(lambda: ops.sum(x + x))
    assert np.allclose(x.grad, [2.0, 2.0])


def test_backward_rejects_non_scalar_and_empty_tape():
    x = param([1.0, 2.0])
    tape = Tape()
    with tape:
        y = x * 2.0
    with pytest.raises(ValueError, match="scalar"):
        backward(y, tape)
    with pytest.raises(ValueError):
        backward(ops.sum(param([1.0])), Tape())


def test_determinism_bit_identical():
    def once():
        rng = np.random.default_rng(5)
        w = Tensor(rng.normal(size=(4, 3)).astype(np.float32), requires_grad=True)
        x = rng.normal(size=(2, 4)).astype(np.float32)
        loss = run_backward(lambda: ops.sum(ops.tanh(ops.matmul(x, w))))
        return loss.data.copy(), w.grad.copy()

    (l1, g1), (l2, g2) = once(), once()
    assert l1.tobytes() == l2.tobytes() and g1.tobytes() == g2.tobytes()


# every primitive against central differences in float64
RNG = np.random.default_rng(42)
PRIMITIVES = {
    "add": lambda a, b: ops.add(a, b),
    "sub": lambda a, b: ops.sub(a, b),
    "mul": lambda a, b: ops.mul(a, b),
    "div": lambda a, b: ops.div(a, ops.add(ops.square(b), 1.0)),
    "neg": lambda a, b: ops.neg(a),
    "exp": lambda a, b: ops.exp(a),
    "log": lambda a, b: ops.log(ops.add(ops.square(a), 0.5)),
    "sqrt": lambda a, b: ops.sqrt(ops.add(ops.square(a), 0.5)),
    "square": lambda a, b: ops.square(a),
    "relu": lambda a, b: ops.relu(a),
    "sigmoid": lambda a, b: ops.sigmoid(a),
    "tanh": lambda a, b: ops.tanh(a),
    "sum_axis": lambda a, b: ops.sum(a, axis=1, keepdims=True),
    "mean_axis": lambda a, b: ops.mean(a, axis=0),
    "reshape": lambda a, b: ops.reshape(a, (6, 2)),
    "transpose": lambda a, b: ops.transpose(a, (1, 0)),
    "getitem": lambda a, b: ops.getitem(a, (np.array([0, 2, 0]), slice(1, 3))),
    "concat": lambda a, b: ops.concat([a, b], axis=0),
    "stack": lambda a, b: ops.stack([a, b], axis=1),
    "matmul": lambda a, b: ops.matmul(a, ops.transpose(b, (1, 0))),
    "linear": lambda a, b: ops.linear(a, ops.transpose(b, (1, 0)), ops.getitem(b, 0)[:3]),
    "softmax": lambda a, b: ops.softmax(a, axis=-1) * b,
    "log_softmax": lambda a, b: ops.log_softmax(a) * b,
    "layer_norm": lambda a, b: ops.layer_norm(a, ops.getitem(b, 0), ops.getitem(b, 1)),
    "broadcast_mul": lambda a, b: a * ops.getitem(b, slice(0, 1)),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradcheck(name):
    a = param(RNG.normal(size=(3, 4)), "a")
    b = param(RNG.normal(size=(3, 4)), "b")
    weights = RNG.normal(size=(64,))
    op = PRIMITIVES[name]

    def loss():
        out = op(a, b)
        flat = ops.reshape(out, (-1,))
        return ops.sum(flat * weights[: flat.shape[0]])

    errs = gradcheck(loss, {"a": a, "b": b}, h=1e-5)
    assert max(errs.values()) < 1e-3, errs


def test_fused_losses_gradcheck():
    logits = param(RNG.normal(size=(2, 3, 5)), "logits")
    targets = np.array([[1, 4, 0], [2, 2, 3]])
    mask = np.array([[1, 1, 0], [1, 1, 1]], dtype=float)
    errs = gradcheck(lambda: ops.cross_entropy(logits, targets, mask), {"logits": logits}, h=1e-5)
    assert errs["logits"] < 1e-3
    errs = gradcheck(lambda: ops.binary_cross_entropy_words(logits, targets, mask), {"logits": logits}, h=1e-5)
    assert errs["logits"] < 1e-3


def test_embedding_and_dropout_gradcheck():
    table = param(RNG.normal(size=(6, 3)), "table")
    ids = np.array([[1, 2, 1], [5, 0, 1]])
    w = RNG.normal(size=(2, 3, 3))
    errs = gradcheck(lambda: ops.sum(ops.embedding(table, ids) * w), {"table": table}, h=1e-5)
    assert errs["table"] < 1e-3

    x = param(RNG.normal(size=(4, 5)), "x")
    w2 = RNG.normal(size=(4, 5))
    errs = gradcheck(lambda: ops.sum(ops.dropout(x, 0.5, np.random.default_rng(3), True) * w2), {"x": x}, h=1e-5)
    assert errs["x"] < 1e-3


def test_cross_entropy_uniform_and_perfect():
    v = 7
    ce = ops.cross_entropy(np.zeros((1, 3, v)), np.array([[1, 2, 3]]))
    assert float(ce.data) == pytest.approx(np.log(v), rel=1e-6)
    logits = np.full((1, 2, v), -1e4)
    logits[0, 0, 4] = logits[0, 1, 5] = 0.0
    assert float(ops.cross_entropy(logits, np.array([[4, 5]])).data) == pytest.approx(0.0, abs=1e-6)


# ------------------------------------------------------------------ optimisers

def test_sgd_step_formula_and_fixed_point():
    p = param([1.0])
    p.grad = np.array([2.0])
    sgd_step([ParamGroup("g", {"p": p}, 0.1)])
    assert p.data[0] == pytest.approx(0.8)
    assert p.grad is None or not np.any(p.grad)

    q = param([3.0, -1.0])
    q.grad = np.zeros(2)
    sgd_step([ParamGroup("g", {"q": q}, 0.5)])
    assert np.array_equal(q.data, [3.0, -1.0])


def test_sgd_two_groups_ratio():
    a, b = param([0.0]), param([0.0])
    a.grad, b.grad = np.array([1.0]), np.array([1.0])
    sgd_step([ParamGroup("act", {"a": a}, 1e-4), ParamGroup("main", {"b": b}, 1e-6)])
    assert a.data[0] / b.data[0] == pytest.approx(100.0)


def test_sgd_missing_gradient_names_tensor():
    p = param([1.0], "enc.w")
    with pytest.raises(ValueError, match="enc.w"):
        sgd_step([ParamGroup("main", {"enc.w": p}, 0.1)])


def test_param_groups_reject_shared_tensor_and_bad_lr():
    p = param([1.0])
    p.grad = np.ones(1)
    with pytest.raises(ValueError):
        sgd_step([ParamGroup("a", {"p": p}, 0.1), ParamGroup("b", {"q": p}, 0.1)])
    with pytest.raises(ValueError):
        ParamGroup("a", {"p": p}, -1.0)


def test_momentum_and_adam_reduce_quadratic():
    for kind in ("momentum", "adam"):
        p = param([3.0, -2.0])
        opt = make_optimizer(kind, [ParamGroup("g", {"p": p}, 0.05)])
        for _ in range(300):
            run_backward(lambda: ops.sum(p * p))
            opt.step()
        assert np.abs(p.data).max() < 0.1, kind
    assert isinstance(make_optimizer("sgd", [ParamGroup("g", {"p": param([1.0])}, 0.1)]), SGD)
    assert isinstance(make_optimizer("adam", [ParamGroup("g", {"p": param([1.0])}, 0.1)]), Adam)
    with pytest.raises(ValueError):
        make_optimizer("rmsprop", [])


def test_clip_grad_norm():
    p = param([0.0, 0.0])
    p.grad = np.array([3.0, 4.0])
    norm = clip_grad_norm([ParamGroup("g", {"p": p}, 0.1)], 1.0)
    assert norm == pytest.approx(5.0)
    assert np.linalg.norm(p.grad) == pytest.approx(1.0)


# ------------------------------------------------------------------ checkpoint container

def test_checkpoint_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {"a.w": rng.normal(size=(3, 4)).astype(np.float32), "b": np.float32(rng.normal(size=(5,))),
               "scalar": np.array(1.5, dtype=np.float32)}
    write_tensors(tmp_path / "c.scut", tensors)
    back = read_tensors(tmp_path / "c.scut")
    assert list(back) == list(tensors)
    for k in tensors:
        assert back[k].tobytes() == np.asarray(tensors[k], dtype=np.float32).tobytes()
        assert back[k].shape == np.asarray(tensors[k]).shape


def test_checkpoint_layout_matches_format(tmp_path):
    write_tensors(tmp_path / "c", {"w": np.array([[1.0, 2.0]], dtype=np.float32)})
    raw = (tmp_path / "c").read_bytes()
    expect = (b"SCUT" + (1).to_bytes(4, "little") + (1).to_bytes(4, "little") + (1).to_bytes(2, "little") + b"w"
              + bytes([2]) + (1).to_bytes(4, "little") + (2).to_bytes(4, "little")
              + np.array([1.0, 2.0], dtype="<f4").tobytes())
    assert raw == expect


@pytest.mark.parametrize("corrupt", ["magic", "version", "truncate", "trailing"])
def test_checkpoint_rejects_corruption(tmp_path, corrupt):
    path = tmp_path / "c"
    write_tensors(path, {"w": np.ones((2, 2), dtype=np.float32)})
    raw = bytearray(path.read_bytes())
    if corrupt == "magic":
        raw[0:4] = b"XXXX"
    elif corrupt == "version":
        raw[4:8] = (9).to_bytes(4, "little")
    elif corrupt == "truncate":
        raw = raw[:-3]
    else:
        raw += b"\0"
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError):
        read_tensors(path)

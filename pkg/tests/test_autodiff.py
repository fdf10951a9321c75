"""
Autodiff Tests
Tests voor backward(), de gradient rules en de finite-difference check
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from app.autodiff import backward, finite_diff, gradcheck, relative_error, sample_coords
from app.core import ops
from app.core.tape import Tape
from app.core.tensor import Tensor
from app.errors import ContractError, UnsupportedError
from app.registry import GradRuleRegistry

TOLERANCE = 1e-6


def projected(out: Tensor, seed: int = 99) -> Tensor:
    """<out, r> for a fixed random r"""
    probe = Tensor.random_normal(out.shape, np.random.default_rng(seed))
    return ops.sum_all(ops.mul(out, probe))


def random_input(shape, seed: int = 0) -> Tensor:
    return Tensor.random_normal(shape, np.random.default_rng(seed))


class TestGradientRules:
    """Test elke gradient rule tegen central differences"""

    @pytest.mark.parametrize(
        "name,build,shape",
        [
            ("reshape", lambda x: ops.reshape(x, (6, 2)), (3, 4)),
            ("permute", lambda x: ops.permute(x, (2, 0, 1)), (2, 3, 4)),
            ("concat", lambda x: ops.concat([x, ops.scale(x, 2.0), x], axis=1), (2, 3, 2)),
            ("slice", lambda x: ops.slice_axis(x, 2, 1, 3), (1, 3, 4)),
            ("add", lambda x: ops.add(x, ops.scale(x, -3.0)), (4,)),
            ("mul", lambda x: ops.mul(x, ops.permute(x, (1, 0))), (3, 3)),
            ("softmax", lambda x: ops.softmax(x, axis=-1), (3, 5)),
            ("softmax_axis0", lambda x: ops.softmax(x, axis=0), (3, 5)),
            ("avg_pool2d", lambda x: ops.avg_pool2d(x, 2), (2, 4, 6)),
            ("bilinear_upsample", lambda x: ops.bilinear_upsample(x, 7, 8), (2, 3, 4)),
            ("unfold", lambda x: ops.unfold(x, 3, 1, padding=1).windows, (2, 4, 4)),
            ("unfold_strided", lambda x: ops.unfold(x, (2, 4), 2).windows, (1, 4, 4)),
            ("mosaic", lambda x: ops.mosaic(ops.unfold(x, 2, 2)), (3, 4, 4)),
        ],
    )
    def test_rule(self, name, build, shape):
        """Test dat backward de numerieke gradient volgt"""
        error = gradcheck(lambda x: projected(build(x)), random_input(shape))
        assert error < TOLERANCE, name

    def test_matmul(self):
        other = random_input((2, 4, 3), seed=5)
        error = gradcheck(lambda x: projected(ops.matmul(x, other)), random_input((2, 5, 4)))
        assert error < TOLERANCE

    def test_matmul_right_operand(self):
        left = random_input((2, 5, 4), seed=5)
        error = gradcheck(lambda x: projected(ops.matmul(left, x)), random_input((2, 4, 3)))
        assert error < TOLERANCE

    @pytest.mark.parametrize("stride,kernel", [(1, 1), (1, 3), (2, 2)])
    def test_conv2d_input(self, stride, kernel):
        weight = random_input((3, 2, kernel, kernel), seed=7)
        bias = random_input((3,), seed=8)
        error = gradcheck(
            lambda x: projected(ops.conv2d(x, weight, bias, stride=stride)),
            random_input((2, 6, 6)),
        )
        assert error < TOLERANCE

    def test_conv2d_weight_and_bias(self):
        """Test gradients naar weight en bias in één backward"""
        x = random_input((2, 5, 5))
        with Tape() as tape:
            weight = tape.watch(random_input((3, 2, 2, 2), seed=1))
            bias = tape.watch(random_input((3,), seed=2))
            grads = backward(projected(ops.conv2d(x, weight, bias)))

        numeric_w = finite_diff(lambda w: projected(ops.conv2d(x, w, bias.detach())), weight.detach())
        numeric_b = finite_diff(lambda b: projected(ops.conv2d(x, weight.detach(), b)), bias.detach())
        assert relative_error(grads[weight].data, numeric_w.data) < TOLERANCE
        assert relative_error(grads[bias].data, numeric_b.data) < TOLERANCE


class TestBackward:
    """Test backward() contract"""

    def test_fan_out_accumulates(self):
        """Test dat x·x gradient 2x geeft"""
        x = random_input((5,))
        with Tape() as tape:
            watched = tape.watch(x)
            grads = backward(ops.sum_all(ops.mul(watched, watched)))

        assert_allclose(grads[watched].data, 2.0 * x.data)

    def test_unreached_leaf_gets_zeros(self):
        with Tape() as tape:
            used = tape.watch(random_input((3,)))
            unused = tape.watch(random_input((2,)))
            grads = backward(ops.sum_all(used))

        assert_array_equal(grads[used].data, np.ones(3))
        assert_array_equal(grads[unused].data, np.zeros(2))

    def test_node_grads_are_set(self):
        with Tape() as tape:
            x = tape.watch(random_input((2,)))
            root = ops.sum_all(ops.scale(x, 3.0))
            backward(root)

        assert_array_equal(x.node.grad.data, [3.0, 3.0])
        assert_array_equal(root.node.grad.data, [1.0])

    def test_untracked_root(self):
        with pytest.raises(ContractError):
            backward(ops.sum_all(random_input((2,))))

    def test_non_scalar_root(self):
        with Tape() as tape:
            x = tape.watch(random_input((2,)))
            with pytest.raises(ContractError):
                backward(ops.scale(x, 2.0))

    def test_missing_rule(self):
        """Test dat een op zonder rule UnsupportedError geeft"""
        with Tape() as tape:
            x = tape.watch(random_input((2,)))
            root = ops.sum_all(x)
            with pytest.raises(UnsupportedError):
                backward(root, registry=GradRuleRegistry(populate=False))


class TestFiniteDiff:
    """Test finite_diff, gradcheck en helpers"""

    def test_quadratic(self):
        x = Tensor([1.0, -2.0, 0.5])
        grad = finite_diff(lambda t: ops.sum_all(ops.mul(t, t)), x)
        assert_allclose(grad.data, 2.0 * x.data, atol=1e-8)

    def test_coords_subset(self):
        """Test dat niet-geprobede coördinaten 0 blijven"""
        x = Tensor([1.0, 2.0, 3.0])
        grad = finite_diff(lambda t: ops.sum_all(t), x, coords=[1])
        assert_allclose(grad.data, [0.0, 1.0, 0.0])

    def test_eps_must_be_positive(self):
        with pytest.raises(ContractError):
            finite_diff(lambda t: ops.sum_all(t), Tensor([1.0]), eps=0.0)

    def test_gradcheck_on_sampled_coords(self):
        x = random_input((4, 6, 6))
        coords = sample_coords(x.size, 10, seed=3)
        error = gradcheck(lambda t: projected(ops.avg_pool2d(t, 3)), x, coords=coords)
        assert error < TOLERANCE

    def test_gradcheck_rejects_non_tensor(self):
        with pytest.raises(ContractError):
            gradcheck(lambda t: 1.0, Tensor([1.0]))

    def test_sample_coords(self):
        assert_array_equal(sample_coords(4, 10), np.arange(4))
        picked = sample_coords(100, 7, seed=1)
        assert len(set(picked.tolist())) == 7
        assert list(picked) == sorted(picked)

    def test_relative_error(self):
        assert relative_error(np.array([2.0]), np.array([2.0])) == 0.0
        assert relative_error(np.array([10.0]), np.array([11.0])) == pytest.approx(1 / 11)

import numpy as np
import pytest

from bstl import _pykernels, kernels


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_block_energies_definition(rng):
    z = rng.standard_normal((4, 6, 2))
    got = _pykernels.block_energies(z, (2, 3, 1))
    assert got.shape == (2, 2, 2)
    assert got[1, 0, 1] == pytest.approx(np.sum(z[2:4, 0:3, 1] ** 2))


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
@pytest.mark.parametrize("shape,dims", [((4, 6, 8), (2, 3, 4)), ((5,), (5,)), ((6, 4), (1, 2)), ((2, 2, 2, 2), (1, 2, 1, 2))])
def test_backends_agree_on_block_energies(rng, shape, dims):
    from bstl import _ckernels
    z = rng.standard_normal(shape)
    assert np.allclose(_ckernels.block_energies(z, dims), _pykernels.block_energies(z, dims), atol=1e-12)


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
@pytest.mark.parametrize("within", [False, True])
def test_backends_agree_on_inner_products(rng, within):
    from bstl import _ckernels
    d = rng.standard_normal((7, 12))
    for block_len in (1, 3, 4):
        assert _ckernels.max_abs_inner(d, block_len, within) == pytest.approx(
            _pykernels.max_abs_inner(d, block_len, within), abs=1e-12)


def test_set_backend_switches(rng):
    original = kernels.backend()
    try:
        for name in kernels.available_backends():
            kernels.set_backend(name)
            assert kernels.backend() == name
            assert kernels.max_abs_inner(np.eye(3)) == 0.0
    finally:
        kernels.set_backend(original)


def test_pure_python_env_var(tmp_path):
    import subprocess
    import sys
    code = "from bstl import kernels; print(kernels.backend())"
    out = subprocess.run([sys.executable, "-c", code], env={"BSTL_PURE_PYTHON": "1", "PATH": ""},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"

import pytest

from levqe import _dp

try:
    from levqe import _dp_cy

    _KERNELS = [("python", _dp), ("cython", _dp_cy)]
except ImportError:
    _KERNELS = [("python", _dp)]


@pytest.fixture(params=_KERNELS, ids=[name for name, _ in _KERNELS])
def kernel(request):
    """Both DP kernels when the compiled one is available."""
    return request.param[1]

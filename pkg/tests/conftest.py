import math
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.fundamental import integrate_fundamental
from app.systems import get_builtin

BUILTIN_CASES = [
    ("zero", {}),
    ("rotation", {"omega": 2 * math.pi * 0.3}),
    ("hyperbolic", {"lambda": 1.0}),
    ("mathieu", {"a": 1.0, "q": 0.2}),
]


@pytest.fixture(scope="session")
def zero_fs():
    return integrate_fundamental(get_builtin("zero"), 1024)


@pytest.fixture(scope="session")
def hyperbolic_fs():
    return integrate_fundamental(get_builtin("hyperbolic", {"lambda": 1.0}), 1024)


@pytest.fixture(scope="session")
def full_rotation_fs():
    return integrate_fundamental(get_builtin("rotation"), 1024)


@pytest.fixture(scope="session")
def rotation_fs():
    return integrate_fundamental(get_builtin("rotation", {"omega": 2 * math.pi * 0.3}), 1024)


@pytest.fixture(scope="session")
def mathieu_fs():
    return integrate_fundamental(get_builtin("mathieu", {"a": 1.0, "q": 0.2}), 1024)


@pytest.fixture(scope="session")
def builtin_solutions():
    return {name: integrate_fundamental(get_builtin(name, params), 1024) for name, params in BUILTIN_CASES}

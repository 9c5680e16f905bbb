import numpy as np
import pytest

import designvar as dv

# Reference matrices for the four-unit, two-arm worked examples
# (pairs {0,1} and {2,3}; arm 0 stacked before arm 1).

D_PAIRED = np.array(
    [
        [1, -1, 0, 0, -1, 1, 0, 0],
        [-1, 1, 0, 0, 1, -1, 0, 0],
        [0, 0, 1, -1, 0, 0, -1, 1],
        [0, 0, -1, 1, 0, 0, 1, -1],
        [-1, 1, 0, 0, 1, -1, 0, 0],
        [1, -1, 0, 0, -1, 1, 0, 0],
        [0, 0, -1, 1, 0, 0, 1, -1],
        [0, 0, 1, -1, 0, 0, -1, 1],
    ],
    dtype=float,
)

_t = 1.0 / 3.0
D_COMPLETE = np.array(
    [
        [1, -_t, -_t, -_t, -1, _t, _t, _t],
        [-_t, 1, -_t, -_t, _t, -1, _t, _t],
        [-_t, -_t, 1, -_t, _t, _t, -1, _t],
        [-_t, -_t, -_t, 1, _t, _t, _t, -1],
        [-1, _t, _t, _t, 1, -_t, -_t, -_t],
        [_t, -1, _t, _t, -_t, 1, -_t, -_t],
        [_t, _t, -1, _t, -_t, -_t, 1, -_t],
        [_t, _t, _t, -1, -_t, -_t, -_t, 1],
    ]
)

DT_AS_PAIRED = np.array(
    [
        [3, 0, 0, 0, 0, 1, 0, 0],
        [0, 3, 0, 0, 1, 0, 0, 0],
        [0, 0, 3, 0, 0, 0, 0, 1],
        [0, 0, 0, 3, 0, 0, 1, 0],
        [0, 1, 0, 0, 3, 0, 0, 0],
        [1, 0, 0, 0, 0, 3, 0, 0],
        [0, 0, 0, 1, 0, 0, 3, 0],
        [0, 0, 1, 0, 0, 0, 0, 3],
    ],
    dtype=float,
)

DT_M_PAIRED = np.array(
    [
        [2, 0, 0, 0, 0, 2, 0, 0],
        [0, 2, 0, 0, 2, 0, 0, 0],
        [0, 0, 2, 0, 0, 0, 0, 2],
        [0, 0, 0, 2, 0, 0, 2, 0],
        [0, 2, 0, 0, 2, 0, 0, 0],
        [2, 0, 0, 0, 0, 2, 0, 0],
        [0, 0, 0, 2, 0, 0, 2, 0],
        [0, 0, 2, 0, 0, 0, 0, 2],
    ],
    dtype=float,
)

DT_INVAR_PAIRED = np.array(
    [
        [2, 0, -1, -1, 0, 2, -1, -1],
        [0, 2, -1, -1, 2, 0, -1, -1],
        [-1, -1, 2, 0, -1, -1, 0, 2],
        [-1, -1, 0, 2, -1, -1, 2, 0],
        [0, 2, -1, -1, 2, 0, -1, -1],
        [2, 0, -1, -1, 0, 2, -1, -1],
        [-1, -1, 0, 2, -1, -1, 2, 0],
        [-1, -1, 2, 0, -1, -1, 0, 2],
    ],
    dtype=float,
)

# Within-pair-constant, arm-antisymmetric direction attached to the
# leading eigenvalue of D_COMPLETE - D_PAIRED.
PAIR_HOMOGENEOUS_PATTERN = np.array([-1, -1, 1, 1, 1, 1, -1, -1]) / np.sqrt(8.0)


@pytest.fixture(scope="session")
def paired4():
    return dv.paired_design([(0, 1), (2, 3)])


@pytest.fixture(scope="session")
def complete42():
    return dv.complete_design([2, 2])


@pytest.fixture(scope="session")
def paired4_matrices(paired4):
    return dv.first_order_design_matrix(paired4)


@pytest.fixture(scope="session")
def complete42_matrices(complete42):
    return dv.first_order_design_matrix(complete42)

"""Dense LU solve with partial pivoting and an explicit pivot floor."""
import warnings

import numpy as np
import scipy.linalg

PIVOT_FLOOR = 1e-12


class SingularMatrix(ArithmeticError):
    pass


def lu_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if a.size == 0:
        return np.zeros_like(rhs, dtype=float)
    with warnings.catch_warnings():
        # exact zero pivots are reported through SingularMatrix below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < PIVOT_FLOOR:
        raise SingularMatrix(f"pivot magnitude {pivots.min():.3e} below {PIVOT_FLOOR:g}")
    return scipy.linalg.lu_solve((lu, piv), rhs)

"""Kernel dispatch: compiled extension when available, NumPy fallback otherwise.

`exact_rank_pmf(p0, p1, n0, n1, m)` and `normal_rank_pmf(...)` accumulate
the rank pmf over Monte-Carlo draws; both return (mean, stderr) arrays of
length m.  `USING_COMPILED` records which implementation was selected.
"""

from __future__ import annotations

from . import _kernels_py

try:
    from . import _kernels as _impl

    USING_COMPILED = True
except ImportError:  # extension not built; pure-Python twin
    _impl = _kernels_py
    USING_COMPILED = False

exact_rank_pmf = _impl.exact_rank_pmf
normal_rank_pmf = _impl.normal_rank_pmf

exact_rank_pmf_py = _kernels_py.exact_rank_pmf
normal_rank_pmf_py = _kernels_py.normal_rank_pmf

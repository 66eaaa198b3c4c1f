"""Backend selection for the rigid body hot loops.

The compiled ``_kernels`` extension is used when it was built; otherwise
the pure-Python ``_kernels_py`` module is loaded. Setting
``METRIPLECTIC_PURE_PYTHON=1`` forces the fallback.
"""
import os

if os.environ.get("METRIPLECTIC_PURE_PYTHON", "") not in ("", "0"):
    from ._kernels_py import rigid_body_rhs, rigid_body_run, rigid_body_step, rk4_rigid_body_run

    BACKEND = "python"
else:
    try:
        from ._kernels import rigid_body_rhs, rigid_body_run, rigid_body_step, rk4_rigid_body_run

        BACKEND = "cython"
    except ImportError:
        from ._kernels_py import rigid_body_rhs, rigid_body_run, rigid_body_step, rk4_rigid_body_run

        BACKEND = "python"

__all__ = ["BACKEND", "rigid_body_rhs", "rigid_body_run", "rigid_body_step", "rk4_rigid_body_run"]

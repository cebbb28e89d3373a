"""Cross-checks between the compiled and pure-Python sampling cores."""

import os
import subprocess
import sys

import numpy as np
import pytest

from fkgreen import core
from fkgreen.bridge import RngStreamSpec, sample_normals


def _backends():
    return core.get_backends()


requires_both = pytest.mark.skipif(
    "compiled" not in _backends(),
    reason="compiled extension not built in this environment",
)


def _normals(n_paths=64, n_steps=128):
    gen = RngStreamSpec(2024, 0).generator()
    return np.ascontiguousarray(sample_normals(gen, n_paths, n_steps))


class TestBackendAgreement:
    @requires_both
    def test_build_bridges_identical(self):
        normals = _normals()
        impls = _backends()
        a = impls["python"].build_bridges(normals)
        b = impls["compiled"].build_bridges(normals)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)

    @requires_both
    def test_bridge_accumulate_identical(self):
        normals = _normals()
        amps = np.array([1.0, 0.4])
        exps = np.array([-0.5, 1.0])
        cents = np.array([0.0, 0.7])
        impls = _backends()
        outs = {}
        for name, impl in impls.items():
            avg, qmin = impl.bridge_accumulate(
                normals, 0.2, -0.4, 1.3, amps, exps, cents, compute_min=True
            )
            outs[name] = (avg, qmin)
        np.testing.assert_allclose(
            outs["python"][0], outs["compiled"][0], rtol=1e-13
        )
        np.testing.assert_allclose(
            outs["python"][1], outs["compiled"][1], rtol=0, atol=1e-14
        )

    def test_active_backend_exports(self):
        assert core.BACKEND in ("python", "compiled")
        assert callable(core.build_bridges)
        assert callable(core.bridge_accumulate)


class TestBackendSelection:
    def _backend_of(self, env_value):
        env = dict(os.environ)
        if env_value is None:
            env.pop("FKG_CORE", None)
        else:
            env["FKG_CORE"] = env_value
        out = subprocess.run(
            [sys.executable, "-c", "from fkgreen import core; print(core.BACKEND)"],
            capture_output=True, text=True, env=env,
        )
        return out.returncode, out.stdout.strip(), out.stderr

    def test_force_python(self):
        rc, backend, _ = self._backend_of("python")
        assert rc == 0 and backend == "python"

    @requires_both
    def test_force_compiled(self):
        rc, backend, _ = self._backend_of("c")
        assert rc == 0 and backend == "compiled"

    def test_unknown_value_rejected(self):
        rc, _, err = self._backend_of("fortran")
        assert rc != 0
        assert "FKG_CORE" in err

    def test_python_backend_end_to_end(self):
        # The whole momentum kernel reproduces the same numbers under the
        # forced pure-Python core (same RNG stream, same arithmetic).
        code = (
            "import numpy as np\n"
            "from fkgreen.kernel import fk_kernel_momentum\n"
            "from fkgreen.potentials import IsotropicForm, PowerLawTerm\n"
            "form = IsotropicForm(3, (PowerLawTerm(1.0, -0.5),))\n"
            "est = fk_kernel_momentum(0.0, 0.0, 1.0, np.array([1.0, 0, 0]),"
            " form, n_paths=500, n_steps=64, seed=99)\n"
            "print(repr(est.mean))\n"
        )
        results = {}
        for backend in ("python", None):
            env = dict(os.environ)
            if backend:
                env["FKG_CORE"] = backend
            else:
                env.pop("FKG_CORE", None)
            out = subprocess.run(
                [sys.executable, "-c", code], capture_output=True, text=True,
                env=env,
            )
            assert out.returncode == 0, out.stderr
            results[backend] = float(out.stdout)
        assert results["python"] == pytest.approx(results[None], rel=1e-12)

"""Make `import superloc` work without installing the wheel.

If the module is not importable, build the cdylib with cargo and load it from a
temporary directory under the name the module declares.
"""
import importlib
import pathlib
import shutil
import subprocess
import sys
import sysconfig

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


def _build(tmp: pathlib.Path) -> None:
    subprocess.run(["cargo", "build", "-p", "superloc-py"], cwd=ROOT, check=True)
    target = ROOT / "target" / "debug"
    lib = next(p for p in (target / "libsuperloc_py.so", target / "libsuperloc_py.dylib") if p.exists())
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy(lib, tmp / f"superloc{suffix}")
    sys.path.insert(0, str(tmp))


@pytest.fixture(scope="session")
def superloc(tmp_path_factory):
    try:
        return importlib.import_module("superloc")
    except ImportError:
        _build(tmp_path_factory.mktemp("superloc"))
        return importlib.import_module("superloc")


@pytest.fixture(scope="session")
def scenarios():
    return ROOT / "scenarios"

import os
import subprocess
import sys
from pathlib import Path


def _run(code):
    project_root = Path(__file__).resolve().parents[2]
    env = os.environ.copy()
    env["PYTHONPATH"] = str(project_root / "src")
    return subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env=env,
        cwd=project_root,
    )


def test_cli_package_import_does_not_load_launcher():
    result = _run(
        "import sys, svs_refine.cli; print('svs_refine.cli.launcher' in sys.modules)"
    )

    assert result.returncode == 0, result.stderr
    assert result.stdout.strip() == "False"


def test_cli_package_main_is_importable_lazily():
    result = _run("from svs_refine.cli import main; print(callable(main))")

    assert result.returncode == 0, result.stderr
    assert result.stdout.strip() == "True"


def test_package_version_is_exposed():
    result = _run("import svs_refine; print(svs_refine.__version__)")

    assert result.returncode == 0, result.stderr
    assert result.stdout.strip() == "1.0.0"

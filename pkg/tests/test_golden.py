"""Frozen outputs of the single-board fan pipeline.

Regenerates every artifact from models/mono_fan.* and compares byte for
byte against tests/golden/.  Any intentional output change must update
the frozen files in the same commit.
"""

from pathlib import Path

import pytest

from adequa.cli import main

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def regenerated(tmp_path_factory):
    out = tmp_path_factory.mktemp("regen")
    table = out / "mono_table.json"
    assert main(["adequate", "--algo", "models/mono_fan.adm",
                 "--arch", "models/mono_fan.arm", "--out", str(table)]) == 0
    assert main(["render", str(table), "--out", str(out / "mono_gantt.txt")]) == 0
    assert main(["render", str(table), "--svg", "--synchros",
                 "--out", str(out / "mono_gantt.svg")]) == 0
    assert main(["codegen", str(table), "--algo", "models/mono_fan.adm",
                 "--arch", "models/mono_fan.arm", "--sequentialize",
                 "--out-dir", str(out)]) == 0
    assert main(["expand", str(out / "node3.m4k"), "--target", "models/avr.tdef",
                 "--out", str(out / "node3.c")]) == 0
    return out


@pytest.mark.parametrize("name", [
    "mono_table.json",
    "mono_gantt.txt",
    "mono_gantt.svg",
    "node3.m4k",
    "node3.c",
])
def test_output_is_frozen(regenerated, name):
    assert (regenerated / name).read_bytes() == (GOLDEN / name).read_bytes()

import json
import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fedcc.eventlog import parse_log  # noqa: E402
from fedcc.netio import load_net, net_from_dict  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
RUNNING = FIXTURES / "running_example"


def read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def order_net():
    return net_from_dict(json.loads(read(RUNNING / "order_net.json")))


@pytest.fixture(scope="session")
def m1_net():
    return load_net(RUNNING / "m1" / "net.json")


@pytest.fixture(scope="session")
def s1_net():
    return load_net(RUNNING / "s1" / "net.json")


@pytest.fixture(scope="session")
def m1_log():
    return parse_log(read(RUNNING / "m1" / "log.csv"), "private")


@pytest.fixture(scope="session")
def s1_log():
    return parse_log(read(RUNNING / "s1" / "log.csv"), "private")


@pytest.fixture
def running_dirs(tmp_path):
    """Writable copies of the two organization directories."""
    out = []
    for org in ("m1", "s1"):
        shutil.copytree(RUNNING / org, tmp_path / org)
        out.append(tmp_path / org)
    return out

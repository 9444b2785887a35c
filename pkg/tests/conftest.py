import socket
import threading
import time

import pytest
import uvicorn

from selzip.codec import DeflateCodec
from selzip.corpus import preset
from selzip.harness import cmd_gen, cmd_train
from selzip.server import create_app
from selzip.training import ModelSet


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class LiveServer:
    def __init__(self, app):
        self.app = app
        self.port = _free_port()
        self.url = f"http://127.0.0.1:{self.port}"
        cfg = uvicorn.Config(app, host="127.0.0.1", port=self.port, log_level="error", lifespan="off")
        self.server = uvicorn.Server(cfg)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self):
        self.thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)


@pytest.fixture(scope="session")
def received():
    return {}


@pytest.fixture(scope="session")
def live_server(received):
    app = create_app(sink=lambda item_id, payload: received.__setitem__(item_id, payload))
    with LiveServer(app) as srv:
        yield srv


@pytest.fixture(scope="session")
def codec():
    return DeflateCodec()


@pytest.fixture(scope="session")
def trained_models(tmp_path_factory) -> ModelSet:
    """Models trained on a mixed corpus disjoint (by seed) from every test corpus."""
    root = tmp_path_factory.mktemp("train")
    manifest = cmd_gen(root / "corpus", spec=preset("mixed", 90, seed=101))
    path = cmd_train(manifest, root / "models.json")
    return ModelSet.load(path)


@pytest.fixture(scope="session")
def models_path(trained_models, tmp_path_factory):
    path = tmp_path_factory.mktemp("models") / "models.json"
    trained_models.save(path)
    return path


# -- acceptance summary: one pass/fail line per criterion ---------------------

_acceptance = {}


def pytest_runtest_logreport(report):
    if "acceptance" not in report.keywords:
        return
    name = report.nodeid.split("::")[-1]
    if report.failed:
        _acceptance[name] = "FAIL"
    elif report.when == "call" and name not in _acceptance:
        _acceptance[name] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(_acceptance):
        terminalreporter.write_line(f"{_acceptance[name]}  {name}")

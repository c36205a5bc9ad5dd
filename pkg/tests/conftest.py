import pytest

from leanserve.pool import PoolConfig, WorkerPool
from leanserve.settings import Settings, mock_checker_command

from util import LiveServer


def mock_env(tmp_path, header_cost=0.05, body_cost=0.01, jitter=0.0, log_name="calls.ndjson"):
    return {
        "MOCK_HEADER_COST": str(header_cost),
        "MOCK_BODY_COST": str(body_cost),
        "MOCK_JITTER": str(jitter),
        "MOCK_CALL_LOG": str(tmp_path / log_name),
    }


@pytest.fixture
def make_pool():
    pools = []

    def _make(
        max_repls=2,
        max_wait=5.0,
        max_repl_mem=4 * 2**30,
        checker_env=None,
        respawn=True,
        supervisor_interval=1.0,
        startup_deadline=30.0,
        command=None,
        start=True,
        wait_ready=True,
        ready_timeout=None,
    ):
        config = PoolConfig(
            max_repls=max_repls,
            max_wait=max_wait,
            max_repl_mem=max_repl_mem,
            checker_command=command or mock_checker_command(),
            checker_env=checker_env,
            respawn=respawn,
            supervisor_interval=supervisor_interval,
            startup_deadline=startup_deadline,
        )
        pool = WorkerPool(config)
        pools.append(pool)
        if start:
            pool.start(wait_ready=wait_ready, ready_timeout=ready_timeout)
        return pool

    yield _make
    for pool in pools:
        pool.shutdown()


@pytest.fixture
def make_server(make_pool):
    servers = []

    def _make(
        max_repls=2,
        max_wait=10.0,
        checker_env=None,
        max_batch=10_000,
        respawn=True,
        max_repl_mem=4 * 2**30,
    ):
        pool = make_pool(
            max_repls=max_repls,
            max_wait=max_wait,
            max_repl_mem=max_repl_mem,
            checker_env=checker_env,
            respawn=respawn,
        )
        settings = Settings(
            max_repls=max_repls,
            max_wait=max_wait,
            checker_env=checker_env,
            max_batch=max_batch,
        )
        server = LiveServer(settings, pool=pool).start()
        servers.append(server)
        return server

    yield _make
    for server in servers:
        server.stop()

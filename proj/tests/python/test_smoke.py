"""Smoke tests for the python bindings."""

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

import pytest

import backtrack as bt


def test_version_and_constants():
    assert bt.__version__
    assert bt.ACTION_COUNT == 4


def test_maze_determinism_and_dynamics():
    a = bt.Maze.generate(11, 11, seed=7)
    b = bt.Maze.generate(11, 11, seed=7)
    assert a.free_cells() == b.free_cells()
    assert a.width == 11 and a.height == 11

    free = a.free_cells()
    assert all(a.is_free(c) for c in free)
    for cell in free[:10]:
        for action in range(bt.ACTION_COUNT):
            nxt = a.step(cell, action)
            assert a.is_free(nxt)
            dx = abs(a.cell_x(nxt) - a.cell_x(cell))
            dy = abs(a.cell_y(nxt) - a.cell_y(cell))
            assert dx + dy <= 1


def test_render_roundtrip():
    maze = bt.Maze.generate(11, 11, seed=3)
    cell = maze.free_cells()[5]
    obs = maze.render(cell)
    assert obs.shape == (64, 64, 3)
    assert obs.min() >= 0.0 and obs.max() <= 1.0
    assert maze.locate_agent(obs) == cell


def test_collect_random_data_replays():
    maze = bt.Maze.generate(11, 11, seed=3)
    episodes = bt.collect_random_data(maze, episodes=5, seed=1)
    assert len(episodes) == 5
    for ep in episodes:
        assert len(ep) == 20
        for frm, action, to in ep:
            assert maze.step(frm, action) == to


def test_spe_matches_hand_bfs():
    # 0 -> 1 -> 2(goal), 3 -> 2, 4 isolated.
    edges = [(0, 1), (1, 2), (3, 2)]
    spe = bt.spe_on_edges(5, edges, goals=[2])
    assert spe == [2, 1, 0, 1, -1]


def test_shortest_distance_agrees_with_python_bfs():
    maze = bt.Maze.generate(11, 11, seed=9)
    free = maze.free_cells()
    goal = free[0]

    dist = {goal: 0}
    frontier = [goal]
    while frontier:
        nxt = []
        for cell in frontier:
            for action in range(4):
                n = maze.step(cell, action)
                if n not in dist:
                    dist[n] = dist[cell] + 1
                    nxt.append(n)
        frontier = nxt
    for cell in free[::5]:
        assert maze.shortest_distance(cell, [goal]) == dist[cell]


def test_oracle_pipeline_end_to_end(tmp_path):
    cfg = bt.PipelineConfig()
    cfg.mode = bt.PipelineMode.ORACLE
    cfg.out_dir = str(tmp_path / "run")
    cfg.maze_size = 11
    cfg.maze_seed = 5
    cfg.seed = 4
    cfg.data_episodes = 400
    cfg.wm_rollouts = 1200
    cfg.goals = [(1, 1)]
    report = bt.run_pipeline(cfg)
    assert report.free_cell_count == 49
    assert report.return_fraction >= 0.9
    assert (tmp_path / "run").exists()


def test_config_error_surfaces():
    cfg = bt.PipelineConfig()
    cfg.out_dir = tempfile.mkdtemp()
    cfg.goals = [(0, 0)]  # wall
    cfg.mode = bt.PipelineMode.ORACLE
    try:
        with pytest.raises(bt.ConfigError):
            bt.run_pipeline(cfg)
    finally:
        shutil.rmtree(cfg.out_dir, ignore_errors=True)


CLI = Path(__file__).resolve().parents[2] / "build" / "tools" / "backtrack"


@pytest.mark.skipif(not CLI.exists(), reason="CLI binary not built")
def test_cli_exit_codes(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("maze.size = 10\n")
    out = subprocess.run(
        [str(CLI), "run", "--config", str(config), "--out", str(tmp_path / "o")],
        capture_output=True,
    )
    assert out.returncode == 2  # config error

    ok_cfg = tmp_path / "ok.cfg"
    ok_cfg.write_text(
        "mode = oracle\nmaze.size = 11\nmaze.seed = 5\ndata.episodes = 300\n"
        "wm.rollouts = 800\ngoals = 1,1\npolicy.hidden = 64\npolicy.epochs = 150\n"
    )
    out = subprocess.run(
        [str(CLI), "collect", "--config", str(ok_cfg), "--out", str(tmp_path / "o2"), "--seed", "3"],
        capture_output=True,
    )
    assert out.returncode == 0, out.stderr.decode()
    assert b"episodes:" in out.stdout

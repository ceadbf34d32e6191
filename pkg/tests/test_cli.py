"""End-to-end CLI smoke tests via subprocesses against a live broker."""

import json
import os
import signal
import subprocess
import sys
import time

import pytest

BIOHUB = [sys.executable, "-m", "biohub.cli"]


def run_cli(addr, *argv, timeout=30, env_extra=None):
    env = dict(os.environ)
    env["BIOHUB_ADDR"] = addr
    if env_extra:
        env.update(env_extra)
    return subprocess.run(BIOHUB + list(argv), capture_output=True, text=True,
                          timeout=timeout, env=env)


def spawn_cli(addr, *argv):
    env = dict(os.environ, BIOHUB_ADDR=addr)
    return subprocess.Popen(BIOHUB + list(argv), stdout=subprocess.PIPE,
                            stderr=subprocess.PIPE, text=True, env=env)


@pytest.fixture
def sim_node(addr):
    proc = spawn_cli(addr, "run", "polar_h10", "--backend", "sim",
                     "--rate-override", "hr=20", "--duration", "60")
    time.sleep(0.6)
    yield proc
    proc.terminate()
    proc.wait(timeout=5)


def test_usage_error_exit_code(addr):
    r = run_cli(addr, "definitely-not-a-command")
    assert r.returncode == 64
    r = run_cli(addr)
    assert r.returncode == 64


def test_unreachable_broker_exit_code():
    r = run_cli("127.0.0.1:1", "topics")
    assert r.returncode == 2
    assert "error" in r.stderr


def test_run_unknown_sensor(addr):
    r = run_cli(addr, "run", "toaster")
    assert r.returncode == 64
    assert "unknown sensor" in r.stderr


def test_topics_json(addr, sim_node):
    r = run_cli(addr, "topics", "--json", "--wait", "0.5")
    assert r.returncode == 0
    listing = json.loads(r.stdout)
    names = {t["topic"] for t in listing}
    assert "/biosensors/polar_h10/hr" in names
    assert all(t["publishers"] >= 1 for t in listing)


def test_echo_n_frames(addr, sim_node):
    r = run_cli(addr, "echo", "/biosensors/polar_h10/hr", "-n", "3",
                "--timeout", "10")
    assert r.returncode == 0
    lines = r.stdout.strip().splitlines()
    assert len(lines) == 3
    for line in lines:
        t_wall, seq, value = line.split()
        assert int(t_wall) > 0
        assert 40.0 < float(value) < 200.0
    assert [int(l.split()[1]) for l in lines] == sorted(
        int(l.split()[1]) for l in lines)


def test_echo_json(addr, sim_node):
    r = run_cli(addr, "echo", "/biosensors/polar_h10/hr", "-n", "2",
                "--timeout", "10", "--json")
    assert r.returncode == 0
    for line in r.stdout.strip().splitlines():
        obj = json.loads(line)
        assert obj["topic"] == "/biosensors/polar_h10/hr"
        assert isinstance(obj["values"], list)


def test_echo_timeout_exit_code(addr):
    r = run_cli(addr, "echo", "/biosensors/nobody/home", "-n", "1",
                "--timeout", "0.5")
    assert r.returncode == 2


def test_param_set_roundtrip(addr, sim_node):
    r = run_cli(addr, "param", "set", "polar_h10", "Sensor_Enable", "false",
                "--json")
    assert r.returncode == 0, r.stderr
    obj = json.loads(r.stdout)
    assert obj == {"node": "polar_h10", "key": "Sensor_Enable", "applied": 0}
    r = run_cli(addr, "param", "set", "polar_h10", "Sensor_Enable", "true")
    assert r.returncode == 0
    assert "ack: polar_h10 Sensor_Enable = 1" in r.stdout


def test_param_unknown_key(addr):
    r = run_cli(addr, "param", "set", "polar_h10", "Bogus_Key", "1")
    assert r.returncode == 64


def test_param_node_not_found(addr):
    r = run_cli(addr, "param", "set", "ghost_sensor", "Sensor_Enable", "true")
    assert r.returncode == 65


def test_record_info_export_play_pipeline(addr, sim_node, tmp_path):
    bag = tmp_path / "session.bag"
    r = run_cli(addr, "record", "-o", str(bag), "/biosensors/polar_h10/*",
                "--limit", "10")
    assert r.returncode == 0
    assert "recorded 10 frames" in r.stdout

    r = run_cli(addr, "info", str(bag), "--json")
    assert r.returncode == 0
    info = json.loads(r.stdout)
    assert info["complete"] and info["record_count"] == 10
    assert info["topics"][0]["name"] == "/biosensors/polar_h10/hr"

    csv_dir = tmp_path / "csv"
    r = run_cli(addr, "export", str(bag), "--csv", str(csv_dir))
    assert r.returncode == 0
    files = list(csv_dir.glob("*.csv"))
    assert len(files) == 1
    lines = files[0].read_text().splitlines()
    assert lines[0] == "t_wall_ns,seq,values"
    assert len(lines) == 11

    r = run_cli(addr, "play", str(bag), "--rate", "50")
    assert r.returncode == 0
    assert "replayed 10 frames" in r.stdout


def test_info_bad_file_exit_code(addr, tmp_path):
    junk = tmp_path / "junk.bag"
    junk.write_bytes(b"this is not a bag file at all....")
    r = run_cli(addr, "info", str(junk))
    assert r.returncode == 65
    r = run_cli(addr, "play", str(junk))
    assert r.returncode == 65


def test_features_command_streams(addr, tmp_path):
    cfg = tmp_path / "features.ini"
    cfg.write_text(
        "[hrv_sdnn]\n"
        "input = /biosensors/empatica_e4/ibi\n"
        "feature = sdnn\n"
        "window_s = 10\n"
        "overlap = 0\n")
    feat = spawn_cli(addr, "features", "--config", str(cfg))
    driver = spawn_cli(addr, "run", "empatica_e4", "--duration", "60")
    try:
        r = run_cli(addr, "echo", "/biosensors/empatica_e4/features/hrv_sdnn",
                    "-n", "1", "--timeout", "30", timeout=45)
        assert r.returncode == 0, r.stderr
        value = float(r.stdout.split()[2])
        assert 0.0 < value < 500.0   # plausible sdnn in ms
    finally:
        for p in (driver, feat):
            p.send_signal(signal.SIGINT)
        for p in (driver, feat):
            try:
                p.wait(timeout=5)
            except subprocess.TimeoutExpired:
                p.kill()


def test_features_bad_config_exit_code(addr, tmp_path):
    r = run_cli(addr, "features", "--config", str(tmp_path / "nope.ini"))
    assert r.returncode == 65

from __future__ import annotations

import json

import pytest

from egg.plugins import PluginError, load_plugin, read_manifest
from egg.shell import ShellEnv

from helpers import FIXTURES

PLUGIN = FIXTURES / "linux_plugin"
NODES = FIXTURES / "net2" / "NET2" / "Boston" / "nodes"


def test_manifest():
    directory, meta = read_manifest(PLUGIN)
    assert directory == PLUGIN and meta["plugin"] == "linux"
    assert read_manifest(PLUGIN / "plugin.json")[1] == meta


def test_linux_plugin_types_and_command():
    env = ShellEnv.create(plugins=[PLUGIN], out=lambda s: None)
    assert {"linux.host", "linux.load", "linux.uptime"} <= set(env.universe.types)
    assert "linux.hosts" in env.commands
    out = env.execute_line(f'linux.hosts test {{path:"{NODES / "atlas-b02"}"}}')
    (p,) = out.elements
    assert dict(p.datum) == {"linux.host": "atlas-b02.bu.edu", "linux.load": "3.10", "linux.uptime": "3 days"}


def test_plugin_does_not_leak_between_environments():
    ShellEnv.create(plugins=[PLUGIN], out=lambda s: None)
    plain = ShellEnv.create(out=lambda s: None)
    assert "linux.hosts" not in plain.commands
    assert "linux.host" not in plain.universe.types


def write_plugin(tmp_path, manifest: dict, module: str = "") -> None:
    (tmp_path / "plugin.json").write_text(json.dumps(manifest))
    if module:
        (tmp_path / "mod.py").write_text(module)


def test_plugin_extension_and_count_type(tmp_path):
    write_plugin(tmp_path, {
        "format": "egg-plugin", "version": 1, "plugin": "demo", "module": "mod.py",
        "types": {"demo.hits": "count", "demo.tag": "trivial"},
        "extensions": ["tag"],
        "commands": {},
    }, "def tag(d):\n    return d.with_entries(**{'demo.tag': 'seen'}) if 'demo.hits' in d else d\n")
    env = ShellEnv.create(plugins=[tmp_path], out=lambda s: None)
    (p,) = env.execute_line("demo.hits:2").elements
    assert p.datum["demo.tag"] == "seen"


@pytest.mark.parametrize("manifest, message", [
    ({"format": "other", "version": 1}, "manifest"),
    ({"format": "egg-plugin", "version": 1, "plugin": "p", "types": {"p.x": "bogus"}}, "type kind"),
    ({"format": "egg-plugin", "version": 1, "plugin": "p", "module": "mod.py",
      "commands": {"p.c": {"put": "missing"}}}, "no function"),
])
def test_bad_plugins(tmp_path, manifest, message):
    write_plugin(tmp_path, manifest, "x = 1\n")
    with pytest.raises(PluginError, match=message):
        ShellEnv.create(plugins=[tmp_path], out=lambda s: None)


def test_missing_manifest(tmp_path):
    with pytest.raises(PluginError):
        load_plugin(tmp_path, ShellEnv.create(out=lambda s: None))

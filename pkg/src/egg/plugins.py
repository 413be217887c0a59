"""Plugins contribute data types, extensions and shell commands.

A plugin is a directory holding ``plugin.json``::

    {
      "format": "egg-plugin", "version": 1,
      "plugin": "linux",
      "module": "linux_plugin.py",
      "types": {"linux.host": "trivial", "linux.load": "trivial"},
      "extensions": ["host_to_os"],
      "commands": {"linux.hosts": {"put": "hosts_put", "pipe": true, "flag": false}}
    }

``module`` is a Python file next to the manifest.  Extension entries name
functions ``Datum -> Datum``; command entries name put functions with the
usual ``(d, X, Y, algebra)`` signature.
"""
from __future__ import annotations

import importlib.util
import json
import os
from pathlib import Path
from types import ModuleType

from .data import Extension, integer_type, name_type, prefix_type, trivial_type

__all__ = ["PluginError", "load_plugin", "TYPE_KINDS", "read_manifest"]


class PluginError(Exception):
    pass


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise ValueError(f"negative value {v}")
    return v


TYPE_KINDS = {
    "trivial": lambda n: trivial_type(n),
    "count": lambda n: trivial_type(n, _nonneg, str, lambda a, b: a + b, 0),
    "integer": integer_type,
    "prefix": prefix_type,
    "name": name_type,
}


def read_manifest(path: str | os.PathLike) -> tuple[Path, dict]:
    path = Path(path)
    manifest = path / "plugin.json" if path.is_dir() else path
    try:
        meta = json.loads(manifest.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise PluginError(f"{manifest}: {exc}") from exc
    if meta.get("format") != "egg-plugin" or meta.get("version") != 1:
        raise PluginError(f"{manifest}: not a version 1 egg plugin manifest")
    return manifest.parent, meta


def _import(directory: Path, meta: dict) -> ModuleType:
    file = directory / meta["module"]
    modspec = importlib.util.spec_from_file_location(f"egg_plugin_{meta['plugin']}", file)
    if modspec is None or modspec.loader is None:
        raise PluginError(f"cannot import {file}")
    module = importlib.util.module_from_spec(modspec)
    modspec.loader.exec_module(module)
    return module


def load_plugin(path: str | os.PathLike, env) -> dict:
    """Install the plugin at ``path`` into a shell environment."""
    directory, meta = read_manifest(path)
    module = _import(directory, meta) if meta.get("module") else None

    def lookup(name: str):
        if module is None or not hasattr(module, name):
            raise PluginError(f"plugin {meta['plugin']!r} has no function {name!r}")
        return getattr(module, name)

    u = env.universe
    for type_name, kind in meta.get("types", {}).items():
        if kind not in TYPE_KINDS:
            raise PluginError(f"unknown type kind {kind!r} for {type_name!r}")
        if type_name not in u.types:
            u.add_type(TYPE_KINDS[kind](type_name))
    for fn_name in meta.get("extensions", []):
        ext_name = f"{meta['plugin']}.{fn_name}"
        if ext_name not in u.extensions:
            u.add_extension(Extension(ext_name, lookup(fn_name)))
    for cmd, info in meta.get("commands", {}).items():
        env.registry.add(cmd, lookup(info["put"]), is_pipe=bool(info.get("pipe", True)),
                         takes_flag=bool(info.get("flag", False)), replace=True,
                         doc=info.get("doc", ""))
        env.add_command(cmd, cmd)
    return meta

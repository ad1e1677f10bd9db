"""Import restrictions for hosted optimizer source.

The standard library is always available.  Third-party packages must appear
in a whitelist: one top-level package name per line, ``#`` starts a comment.
The packaged default covers the numerical stack the code template is written
against (array math, modeling, statistics, quasi-random sampling).

Enforcement is two-layered: a static scan of ``import`` statements before the
source runs, and a guarded ``__import__`` in the hosted namespace that also
catches imports performed dynamically at run time.  This is scope control for
generated code, not a security sandbox.
"""

from __future__ import annotations

import ast
import builtins
import sys
from importlib import resources
from pathlib import Path
from typing import Callable

STDLIB_MODULES = frozenset(sys.stdlib_module_names)


def load_whitelist(path: str | Path | None = None) -> frozenset[str]:
    """Read allowed top-level package names, defaulting to the packaged list."""
    if path is None:
        text = resources.files("candidate_shim").joinpath("whitelist.txt").read_text()
    else:
        text = Path(path).read_text()
    names = set()
    for line in text.splitlines():
        entry = line.split("#", 1)[0].strip()
        if entry:
            names.add(entry)
    return frozenset(names)


def _top_level(module: str) -> str:
    return module.split(".", 1)[0]


def _allowed(module: str, whitelist: frozenset[str]) -> bool:
    top = _top_level(module)
    return top in whitelist or top in STDLIB_MODULES


def check_imports(source: str, whitelist: frozenset[str]) -> list[str]:
    """Return the modules named by import statements that are not allowed.

    Raises SyntaxError if the source does not parse; the caller reports that
    as a load failure.
    """
    tree = ast.parse(source)
    violations: list[str] = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                if not _allowed(alias.name, whitelist):
                    violations.append(alias.name)
        elif isinstance(node, ast.ImportFrom):
            if node.level:
                # Relative imports have no package context inside the shim.
                violations.append("." * node.level + (node.module or ""))
            elif node.module is not None and not _allowed(node.module, whitelist):
                violations.append(node.module)
    seen: set[str] = set()
    unique = []
    for name in violations:
        if name not in seen:
            seen.add(name)
            unique.append(name)
    return unique


def make_guarded_import(whitelist: frozenset[str]) -> Callable:
    """Wrap the real ``__import__`` so dynamic imports obey the whitelist."""
    real_import = builtins.__import__

    def guarded(name, globals=None, locals=None, fromlist=(), level=0):
        if level == 0 and not _allowed(name, whitelist):
            raise ImportError(f"import not whitelisted: {name}")
        return real_import(name, globals, locals, fromlist, level)

    return guarded


def guarded_builtins(whitelist: frozenset[str]) -> dict:
    """A builtins namespace for hosted code with import filtering installed."""
    namespace = dict(vars(builtins))
    namespace["__import__"] = make_guarded_import(whitelist)
    return namespace

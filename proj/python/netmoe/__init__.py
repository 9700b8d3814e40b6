"""Agentic mixture-of-experts network optimization toolkit.

Thin wrapper over the compiled core. Installed wheels carry the extension
inside this package; during development it may instead sit on sys.path from
the CMake build tree (build/bindings).
"""

try:
    from netmoe._netmoe import *  # noqa: F401,F403
    from netmoe._netmoe import __doc__ as _core_doc
except ImportError:  # build-tree layout: extension is top-level
    from _netmoe import *  # noqa: F401,F403
    from _netmoe import __doc__ as _core_doc

__version__ = "0.1.0"

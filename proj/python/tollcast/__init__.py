"""Highway mobility modeling from toll transactions.

The heavy lifting lives in the compiled extension; this package re-exports
its surface. Installed builds ship the extension inside the package, while
in-tree builds put it on sys.path next to the build directory.
"""

try:
    from ._tollcast import *  # noqa: F401,F403
    from ._tollcast import __version__  # noqa: F401
except ImportError:  # in-tree build: extension sits on sys.path
    from _tollcast import *  # noqa: F401,F403
    from _tollcast import __version__  # noqa: F401

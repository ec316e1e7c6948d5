"""Character-level output heads: spelling, distillation, and decoding."""
from ._spellm import *  # noqa: F401,F403
from ._spellm import __doc__  # noqa: F401

"""Captioning pipeline: synthetic corpus, left/right language models, object
classifier, guided decoding, and metric kernels. Everything lives in the
compiled core; this package re-exports it."""

from guidecap._core import *  # noqa: F401,F403
from guidecap._core import __version__  # noqa: F401

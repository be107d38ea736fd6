# Copyright (C) 2026 critloop authors
# SPDX-License-Identifier: Apache-2.0
"""Criteria-guided feedback pipeline: Python surface over the C++ core."""

from critloop._critloop import *  # noqa: F401,F403
from critloop._critloop import __version__  # noqa: F401

# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Sparsedom module initialization."""
__version__ = "0.4.0"
__title__ = "sparsedom"
__description__ = "Numerical lab for sparse domination of modulation invariant trilinear forms"
__long_description_content_type__ = "text/markdown"
__url__ = "https://github.com/sparsedom/sparsedom"
__author__ = "sparsedom"
__author_email__ = "sparsedom@users.noreply.github.com"
__license__ = "Apache 2.0"

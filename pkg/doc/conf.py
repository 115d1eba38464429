# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#
# Sphinx configuration of the vtol-transition documentation.
# pylint: disable=invalid-name

"""
Builds the user guide, the command-line reference and the API pages of the
workbench from the sources under ``src/``.
"""

import sys
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as package_version
from pathlib import Path

sys.path.insert(0, str(Path("..").resolve() / "src"))

project = "vtol-transition"
copyright = "2025, Benjamin Thomas Schwertfeger"  # noqa: A001 # pylint: disable=redefined-builtin
author = "Benjamin Thomas Schwertfeger"

try:
    release = package_version("vtol-transition")
except PackageNotFoundError:
    release = "0+unknown"
version = ".".join(release.split(".")[:2])

# Shared link targets of all pages
rst_epilog = Path("links.rst").read_text(encoding="utf-8")

extensions = [
    "sphinx_click",
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx.ext.autosectionlabel",
]

autodoc_member_order = "bysource"
autodoc_typehints = "description"
autodoc_default_options = {
    "members": True,
    "show-inheritance": True,
}
autosectionlabel_prefix_document = True

napoleon_google_docstring = True
napoleon_numpy_docstring = False
napoleon_use_rtype = False

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "torch": ("https://pytorch.org/docs/stable", None),
    "sqlalchemy": ("https://docs.sqlalchemy.org/en/20", None),
}

exclude_patterns = ["_build", "links.rst"]

html_theme = "sphinx_book_theme"
html_title = f"vtol-transition {release}"

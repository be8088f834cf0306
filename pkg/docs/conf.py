"""
Sphinx configuration of the farfieldsv documentation.

Build with ``sphinx-build -b html docs docs/_build`` after installing
requirements-dev.txt.
"""

import farfieldsv
import sphinx_rtd_theme

project = "farfieldsv"
author = "The farfieldsv developers"
copyright = author
version = release = farfieldsv.__version__

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
    "sphinx.ext.graphviz",
    "sphinx.ext.inheritance_diagram",
    "sphinx_copybutton",
]

# Docstrings use a "Parameters:" block rather than the numpydoc layout.
autodoc_member_order = "bysource"
autodoc_typehints = "description"
autosummary_generate = False
inheritance_graph_attrs = {"rankdir": "LR", "size": '"8.0, 4.0"'}

master_doc = "index"
language = "en"
exclude_patterns = ["_build"]

html_theme = "sphinx_rtd_theme"
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
html_theme_options = {"collapse_navigation": False, "navigation_depth": 3}
html_show_sourcelink = False
htmlhelp_basename = "farfieldsvdoc"

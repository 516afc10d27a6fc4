# -*- coding: utf-8 -*-
#
# Sphinx configuration of the otfs-isac documentation.

import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join('..', '..')))

import otfs_isac  # noqa: E402
import sphinx_rtd_theme  # noqa: E402


# -- Project information -----------------------------------------------------

project = 'otfs-isac'
copyright = '2026, Harald Albrecht'
author = 'Harald Albrecht'

version = otfs_isac.__version__
release = version


# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
    'sphinx.ext.mathjax',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'
language = 'en'
exclude_patterns = []
pygments_style = 'sphinx'

autodoc_member_order = 'bysource'


# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
htmlhelp_basename = 'otfs-isacdoc'


# -- Options for manual page output ------------------------------------------

man_pages = [
    (master_doc, 'otfs-isac', 'otfs-isac Documentation',
     [author], 1)
]

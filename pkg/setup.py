#!/usr/bin/env python3

from setuptools import setup
from otfs_isac import __version__
import os


with open(os.path.join(
            os.path.abspath(os.path.dirname(__file__)),
            'README.md'
          ), encoding='utf-8') as f:
    ldesc = f.read()

setup(
    name='otfs-isac',
    version=__version__,
    description='Cell-free massive MIMO ISAC simulator with OTFS and '
                'max-min power allocation',
    long_description=ldesc,
    long_description_content_type='text/markdown',
    classifiers=[
        'Development Status :: 4 - Beta',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3 :: Only',
        'License :: OSI Approved :: Apache Software License',
        'Topic :: Scientific/Engineering',
        'Topic :: Communications'
    ],
    license='Apache License 2.0',
    author='TheDiveO',
    author_email='thediveo@gmx.eu',
    packages=['otfs_isac', 'otfs_isac.tools'],
    python_requires='>=3.8',
    entry_points={
        'console_scripts': [
            'otfsisac=otfs_isac.tools.otfsisac:main'
        ]
    },
    install_requires=[
        'numpy',
        'scipy',
        'cvxpy',
        'pyyaml',
        'pandas',
        'tqdm',
        'psutil',
        'asciitree',
        'sty'
    ],
    extras_require={
        'dev': [
            'pytest',
            'pytest-cov',
            'coverage',
            'sphinx',
            'sphinx_rtd_theme'
        ]
    }
)

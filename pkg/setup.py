#!/usr/bin/env python3

from setuptools import setup, find_packages

with open("README.md", "r") as fh:
    long_description = fh.read()

setup(
    name="pyhydro",
    version="0.1.0",
    description="Hyperbolic spectral graph condensation with privacy evaluation",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="GPL",
    python_requires=">=3.9",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    keywords=["graph condensation", "hyperbolic", "spectral", "link prediction", "privacy"],
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    install_requires=["numpy", "scipy", "networkx>=2.6", "scikit-learn", "pandas"],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["pyhydro = pyhydro.cli:main"]},
)

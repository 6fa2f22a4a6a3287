#!/usr/bin/env python3

from setuptools import setup
from setuptools import find_packages


setup(
    name="fwreg",
    description="Forster-Warmuth series regression for counterfactual and missing-data problems",
    author="The fwreg developers",
    test_suite="test",
    license="BSD",
    python_requires="~=3.8",
    packages=find_packages(exclude=("test*", "bench*", "doc*", "examples*")),
    include_package_data=True,
    install_requires=[
        "numpy>=1.20",
        "scipy>=1.10",
        "pandas>=1.3",
        "scikit-learn>=1.0",
    ],
    entry_points={
        "console_scripts": ["fwreg=fwreg.cli:main"],
    },
)

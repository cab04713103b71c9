#!/usr/bin/env python3
"""
Chromosome Straightening Toolkit Setup Script

Installs the straightkit package and its `straightkit` command:
    pip install -e .
"""

from pathlib import Path

from setuptools import find_packages, setup


def read_requirements():
    """Runtime requirements from requirements.txt (pytest is test-only)"""
    lines = Path(__file__).with_name("requirements.txt").read_text().splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith(("#", "pytest"))]


setup(
    name="straightkit",
    version="0.1.0",
    description="Chromosome straightening with backbone-conditioned image-to-image translation",
    long_description=Path(__file__).with_name("README.md").read_text(encoding="utf-8"),
    long_description_content_type="text/markdown",
    package_dir={"": "src"},
    packages=find_packages("src", include=["straightkit", "straightkit.*"]),
    python_requires=">=3.9",
    install_requires=read_requirements(),
    extras_require={"test": ["pytest>=7.4.0"]},
    entry_points={"console_scripts": ["straightkit=straightkit.cli:main"]},
)

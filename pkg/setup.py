from setuptools import setup, find_packages

setup(
    name="leocoopbf",
    version="0.1.0",
    description="Cooperative beamforming for LEO satellite constellations",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.22.0",
        "scipy>=1.8.0",
    ],
    entry_points={
        "console_scripts": [
            "leocoopbf=src.main:main",
        ],
    },
)

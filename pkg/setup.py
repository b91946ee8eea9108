from setuptools import setup, find_packages
import os


# Read the version from __init__.py
def get_version():
    version_file = os.path.join(os.path.dirname(__file__), "prune_lab", "__init__.py")
    with open(version_file, "r") as f:
        for line in f:
            if line.startswith("__version__"):
                delim = '"' if '"' in line else "'"
                return line.split(delim)[1]
    raise RuntimeError("Unable to find version string.")


setup(
    name="prune-lab",
    version=get_version(),
    packages=find_packages(include=["prune_lab", "prune_lab.*"]),
    install_requires=[
        "pandas",
        "numpy",
        "matplotlib",
        "seaborn",
    ],
    extras_require={"test": ["pytest", "pytest-cov"]},
    entry_points={
        "console_scripts": [
            "prunelab=prune_lab.experiment:main",
        ],
    },
    description="Desk-scale experiments on how magnitude pruning changes predictions and representations",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: BSD License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.9",
)

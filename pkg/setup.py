from distutils.util import convert_path

import setuptools


# Load the readme
with open("README.md", "r") as fh:
    long_description = fh.read()

# Load the version info
version_namespace = {}
ver_path = convert_path("humanseek/version.py")
with open(ver_path) as ver_file:
    exec(ver_file.read(), version_namespace)

# Execute the setup
setuptools.setup(
    name="humanseek",
    version=version_namespace["__version__"],
    description="Commonsense-guided human search and socially aware approach for mobile robots",
    long_description=long_description,
    long_description_content_type="text/markdown",
    install_requires=[
        "joblib>=1.0",
        "numpy>=1.20",
        "scipy>=1.7",
        "pandas>=1.5",
        "matplotlib>=3.3",
        "loguru>=0.5",
        "pyyaml>=5.4",
    ],
    packages=setuptools.find_packages(exclude=["tests"]),
    package_data={"humanseek": ["data/*", "data/*/*", "data/*/*/*"]},
    entry_points={"console_scripts": ["humanseek = humanseek.cli:main"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    python_requires=">=3.8",
    tests_require=["pytest"],
)

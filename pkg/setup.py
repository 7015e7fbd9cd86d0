from setuptools import setup, find_packages

setup(
    name="lipimpl",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    include_package_data=True,
    install_requires=[
        "pydantic>=2.5.3",
        "python-dotenv>=1.0.0",
        "click>=8.1.0",
        "rich>=13.7.0",
        "numpy>=1.24.0",
        "scipy>=1.10.0",
    ],
    entry_points={
        "console_scripts": [
            "lipimpl=lipimpl.main:main",
        ],
    },
    author="David Arnold",
    description="Chord-iteration implicit function solver with Lipschitz perturbation certificates and dry-friction switching-time analysis",
    python_requires=">=3.9",
)

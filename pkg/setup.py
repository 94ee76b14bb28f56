from setuptools import setup, find_packages

# read the contents of your README file
from os import path

this_directory = path.abspath(path.dirname(__file__))
with open(path.join(this_directory, "README.md"), encoding="utf-8") as f:
    long_description = f.read()

setup(
    name="Gradient_Reversal_Adaptation",
    packages=find_packages(),
    version="0.1.0",  # adjust
    license="MIT",
    description="Unsupervised adaptation of a frame classifier to far-field speech with a gradient reversal layer",
    long_description=long_description,
    long_description_content_type="text/markdown",
    keywords=["Domain Adaptation", "Gradient Reversal", "Far-Field Speech", "Acoustic Model"],
    classifiers=[
        "Development Status :: 3 - Alpha",  # "3 - Alpha" / "4 - Beta" / "5 - Production/Stable"
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
    ],
    python_requires=">=3.9",
    install_requires=[
        "scipy>=1.8.1",
        "matplotlib>=3.5.2",
        "numpy>=1.23.1",
        "mockito~=1.3.3",
    ],  # adjust
    extras_require={
        "docs": "pdoc~=12.0.2",
        "style": "SciencePlots>=1.0.9",
        "black": "black>=22.6.0",
    },
    package_data={
        "Gradient_Reversal_Adaptation.Configurations": ["experiments.csv", "channels.csv"],
    },
    entry_points={
        "console_scripts": ["gra=Gradient_Reversal_Adaptation.Experiments.Cli:run"],
    },
    test_suite="Gradient_Reversal_Adaptation.Tests",
)

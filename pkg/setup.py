# -*- coding: utf-8 -*-
import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

with open("requirements.txt", "r") as fr:
    install_requires = fr.read().splitlines()

setuptools.setup(
    name="popnet",
    version="0.1.0",
    author="PopNet contributors",
    description="Pop-out depth priors for RGB-D salient and camouflaged object segmentation",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["examples", "examples.*"]),
    install_requires=install_requires,
    include_package_data=True,
    package_data={"popnet": ["report_schema.json"]},
    entry_points={"console_scripts": ["popnet=popnet.cli:main"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ])

# -*- coding: utf-8 -*-

# DO NOT EDIT THIS FILE!
# This file has been autogenerated by dephell <3
# https://github.com/dephell/dephell

try:
    from setuptools import setup
except ImportError:
    from distutils.core import setup

import os.path

readme = ''
here = os.path.abspath(os.path.dirname(__file__))
readme_path = os.path.join(here, 'README.rst')
if os.path.exists(readme_path):
    with open(readme_path, 'rb') as stream:
        readme = stream.read().decode('utf8')

setup(
    long_description=readme,
    name='ssl-label-selection',
    version='0.1.0',
    description='Clustering-based labelled set selection and supervision policies for semi-supervised learning',
    python_requires='==3.*,>=3.8.0',
    author='ssl-label-selection contributors',
    license='MIT',
    keywords='semi-supervised-learning k-means curriculum-learning active-learning',
    classifiers=['Development Status :: 3 - Alpha', 'Intended Audience :: Education',
                 'Intended Audience :: Science/Research', 'Operating System :: OS Independent',
                 'License :: OSI Approved :: MIT License', 'Programming Language :: Python :: 3.8',
                 'Programming Language :: Python :: 3.9',
                 'Topic :: Scientific/Engineering :: Artificial Intelligence'],
    entry_points={"console_scripts": ["ssl-label-selection = ssl_label_selection.cli:main"]},
    packages=['ssl_label_selection'],
    package_dir={"": "."},
    package_data={},
    install_requires=['numpy>=1.19.2', 'pandas>=1.1.3', 'pyyaml>=5.3.1', 'scipy>=1.5.2'],
    extras_require={
        "dev": ["dephell==0.*,>=0.8.3", "pytest>=6.1.0", "pytest-cov>=2.10.1",
                "scikit-learn>=0.23.2", "sphinx==3.*,>=3.2.1", "sphinx-rtd-theme==0.*,>=0.5.0"]},
)

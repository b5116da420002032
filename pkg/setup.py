#! /usr/bin/env python

from setuptools import setup

setup(
    name='fwm-cat-sim',
    version='0.1.1',
    description='Truncated Fock space simulations of cat-like state generation by four-wave mixing in a three-mode microring',
    keywords='quantum optics four-wave mixing fock space lindblad wigner ',
    license='GPLv3',
    packages=['fwmcat'],
    package_data={'fwmcat': ['presets/*.json']},
    install_requires=['numpy', 'scipy', 'pymongo'],
    tests_require=['mongomock'],
    test_suite='tests',
    entry_points={
        'console_scripts': ['fwmcat=fwmcat.cli:main']
    }
)

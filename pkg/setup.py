"""
Setup configuration for the inflap package.
"""

from setuptools import setup, find_packages

setup(
    name='inflap',
    version='0.1.0',
    description='Numerical laboratory for inhomogeneous infinity-Laplacian equations on square lattices',
    packages=find_packages(where='src'),
    package_dir={'': 'src'},
    package_data={'inflap': ['presets/*.cfg']},
    install_requires=[
        'numpy>=1.24',
        'scipy>=1.10',
        'numba>=0.57',
        'shapely>=2.0.0',
        'pandas>=2.0',
        'matplotlib>=3.7',
    ],
    extras_require={
        'test': ['pytest>=7.3'],
    },
    python_requires='>=3.8',
    entry_points={
        'console_scripts': [
            'inflap=inflap.__main__:main',
        ],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
)

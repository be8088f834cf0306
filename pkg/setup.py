from os import path
from setuptools import setup, find_packages
import sys


min_version = (3, 9)
if sys.version_info < min_version:
    error = """
farfieldsv does not support Python {0}.{1}.
Python {2}.{3} and above is required. Check your Python version like so:

python3 --version

This may be due to an out-of-date pip. Make sure you have pip >= 9.0.1.
Upgrade pip like so:

pip install --upgrade pip
""".format(*sys.version_info[:2], *min_version)
    sys.exit(error)

here = path.abspath(path.dirname(__file__))

with open(path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

with open(path.join(here, 'requirements.txt')) as requirements_file:
    # Parse requirements.txt, ignoring any commented-out lines.
    requirements = [line for line in requirements_file.read().splitlines()
                    if not line.startswith('#')]

# The version is single-sourced from the package.
with open(path.join(here, 'farfieldsv', '__init__.py'), encoding='utf-8') as f:
    version = next(line.split('"')[1] for line in f
                   if line.startswith('__version__'))


setup(
    name='farfieldsv',
    version=version,
    description="A desk-scale toolkit for far-field speaker verification.",
    long_description=long_description,
    long_description_content_type='text/markdown',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Topic :: Multimedia :: Sound/Audio :: Speech',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'License :: OSI Approved :: BSD License',
        'Programming Language :: Python :: 3',
        'Natural Language :: English',
    ],
    keywords='speaker verification i-vector PLDA WPE dereverberation',
    packages=find_packages(exclude=['docs', 'tests', 'examples']),
    install_requires=requirements,
    extras_require={
        'dev': ['pytest', 'coverage', 'flake8', 'mypy'],
    },
    include_package_data=True,
    entry_points={
        'console_scripts': [
            'fsv=farfieldsv.cli:main',
        ],
    },
)

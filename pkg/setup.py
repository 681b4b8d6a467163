"""
DeepSight library

Create a new wheel via the following command: python setup.py bdist_wheel

The wheel will be located at: dist/*.whl
"""

import os
import subprocess

from setuptools import setup, find_packages

VERSION = '0.1.0'


def fetch_requirements(path):
    with open(path, 'r') as fd:
        return [r.strip() for r in fd.readlines() if r.strip()]


install_requires = [r for r in fetch_requirements('requirements.txt')
                    if r.split('>')[0] not in ('pytest', 'hypothesis', 'pre-commit')]


def write_git_version_info():
    try:
        git_hash = subprocess.check_output(['git', 'rev-parse', '--short', 'HEAD']).decode().strip()
        git_branch = subprocess.check_output(['git', 'rev-parse', '--abbrev-ref',
                                              'HEAD']).decode().strip()
    except (subprocess.CalledProcessError, OSError):
        git_hash = None
        git_branch = None
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                        'deepsight',
                        'git_version_info.py')
    with open(path, 'w') as fd:
        fd.write("git_hash = {!r}\n".format(git_hash))
        fd.write("git_branch = {!r}\n".format(git_branch))


write_git_version_info()

setup(name='deepsight',
      version=VERSION,
      description='DeepSight object segmentation, classification and discovery',
      author='DeepSight Team',
      install_requires=install_requires,
      packages=find_packages(exclude=["tests",
                                      "docs"]),
      scripts=['bin/deepsight'],
      python_requires='>=3.6',
      classifiers=['Programming Language :: Python :: 3.6'])

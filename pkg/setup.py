import os
import subprocess
import time

from setuptools import find_packages, setup

VERSION_INFO = (0, 1, 0)
SHORT_VERSION = '.'.join(str(v) for v in VERSION_INFO)

version_file = 'sdelab/version.py'
VERSION_TEMPLATE = """# GENERATED VERSION FILE
# TIME: {time}

__version__ = '{full}'
short_version = '{short}'
"""


def readme():
    with open('README.md') as f:
        return f.read()


def _read_version_file():
    scope = {}
    with open(version_file) as f:
        exec(compile(f.read(), version_file, 'exec'), scope)
    return scope['__version__']


def source_revision():
    """Short commit hash of the checkout, else the one recorded in version.py."""
    if os.path.isdir('.git'):
        env = {k: os.environ[k] for k in ('SYSTEMROOT', 'PATH', 'HOME') if k in os.environ}
        env.update(LANGUAGE='C', LANG='C', LC_ALL='C')
        try:
            done = subprocess.run(['git', 'rev-parse', '--short=7', 'HEAD'],
                                  stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, env=env)
            return done.stdout.decode('ascii').strip() or 'unknown'
        except OSError:
            return 'unknown'
    if os.path.exists(version_file):
        return _read_version_file().rpartition('+')[2]
    return 'unknown'


def write_version_py():
    revision = source_revision()
    with open(version_file, 'w') as f:
        f.write(VERSION_TEMPLATE.format(time=time.asctime(),
                                        full='{}+{}'.format(SHORT_VERSION, revision),
                                        short=SHORT_VERSION))


if __name__ == '__main__':
    write_version_py()
    setup(
        name='sdelab',
        version=_read_version_file(),
        description='Numerical laboratory for SDEs with locally unbounded drift',
        long_description=readme(),
        long_description_content_type='text/markdown',
        keywords='stochastic differential equations, invariant measures, Monte Carlo',
        packages=find_packages(include=('sdelab', 'sdelab.*')),
        package_data={'sdelab': ['configs/*.yaml']},
        entry_points={'console_scripts': ['sdelab=sdelab.cli:main']},
        classifiers=[
            'Development Status :: 4 - Beta',
            'Operating System :: OS Independent',
            'Programming Language :: Python :: 3',
            'Programming Language :: Python :: 3.8',
            'Programming Language :: Python :: 3.9',
            'Programming Language :: Python :: 3.10',
            'Programming Language :: Python :: 3.11',
        ],
        license='GPLv3',
        python_requires='>=3.8',
        tests_require=['pytest', 'hypothesis'],
        install_requires=[
            'numpy', 'scipy>=1.12', 'terminaltables',
            'tqdm', 'easydict', 'pyyaml', 'joblib'
        ],
        zip_safe=False)

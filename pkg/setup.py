from setuptools import setup, find_packages

setup(
    name="eaqga",
    version="1.0.0",
    packages=find_packages(exclude=["examples", "examples.*"]),
    install_requires=[
        'numpy>=1.24.0',
        'pandas>=2.0.0',
        'networkx>=3.0',
        'python-dotenv>=1.0.0',
        'joblib>=1.2.0',
        'tomli>=1.1.0; python_version < "3.11"',
    ],
    extras_require={
        'test': [
            'pytest>=7.0',
            'scipy>=1.10.0',
        ],
    },
    entry_points={
        'console_scripts': [
            'eaqga=eaqga.main:main',
        ],
    },
    description="Entanglement-aware quantum-enhanced genetic algorithm for QUBO portfolio problems, with GA/AQGA baselines and a benchmark harness",
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires='>=3.10',
)

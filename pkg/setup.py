from setuptools import setup


def requirements():
    with open("requirements.txt", encoding='utf8') as file:
        return [line.strip() for line in file if line.strip()]


setup(
    name='phimono',
    version='0.1.0',
    packages=['phimono'],
    license='MIT License',
    description='Grid verification of Phi-monotone and Phi-Hoelder functions and their Hermite-Hadamard and '
                'Ostrowski bounds',
    install_requires=requirements(),
    entry_points={'console_scripts': ['analyze=phimono.cli:main']}
)

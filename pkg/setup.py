import setuptools

with open('README.md') as fh:
    long_description = fh.read()

setuptools.setup(
    name='qkrlab',
    version='0.1',
    scripts=[],
    author='The QKRLab Authors',
    description='Quantum Key Recycling Lab: rate analysis and protocol simulation',
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=setuptools.find_packages(),
    python_requires='>=3.9',
    install_requires=[
        'numpy>=1.20',
        'scipy>=1.7'
    ],
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: Apache Software License',
        'Operating System :: OS Independent',
    ],
    package_data={'qkrlab': ['resources/*.json']},
    include_package_data=True
)

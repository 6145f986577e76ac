from setuptools import setup, find_packages

setup(
    name="tumor-cascade",
    version="0.1.0",
    author="Kaffa Dev",
    description="Cascaded brain tumor detection and 3D atrous segmentation",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    py_modules=["app"],
    install_requires=[
        'torch>=2.0.1',
        'numpy>=1.24.0',
        'scipy>=1.10.0',
        'opencv-python-headless>=4.8.0',
        'sqlalchemy>=2.0.19',
        'pandas>=2.0.0',
        'pyyaml>=6.0',
    ],
    extras_require={
        'test': ['pytest>=7.0'],
    },
    python_requires='>=3.9',
    entry_points={
        'console_scripts':[
            'tumor-cascade=app:main',
        ],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Medical Science Apps.',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
    ],
)

from setuptools import setup, find_packages

setup(
    name="undernewton",
    version="1.0.0",
    packages=find_packages(),
    install_requires=[
        "typer",
        "rich",
        "pydantic>=2",
        "python-dotenv",
        "numpy",
        "scipy",
    ],
    entry_points={
        "console_scripts": [
            "undernewton=undernewton.main:app",
        ],
    },
    python_requires=">=3.10",
)

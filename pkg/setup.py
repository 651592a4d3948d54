#!/usr/bin/env python
"""
Environment setup for stfem.

1. Checks the Python version
2. Installs the dependencies
3. Creates .env from .env.example
4. Creates the output and log directories
"""

import shutil
import subprocess
import sys
from pathlib import Path


def check_python_version():
    """tomllib needs Python 3.11."""
    required_version = (3, 11)
    current_version = sys.version_info
    if current_version < required_version:
        print(f"ERROR: Python {required_version[0]}.{required_version[1]} or newer required. "
              f"Current version: {current_version[0]}.{current_version[1]}")
        return False
    print(f"✓ Python {current_version[0]}.{current_version[1]} OK")
    return True


def install_dependencies():
    print("\nInstalling dependencies...")
    try:
        subprocess.run([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"], check=True)
    except subprocess.CalledProcessError as e:
        print(f"ERROR: dependency installation failed: {e}")
        return False
    print("✓ Dependencies installed")
    return True


def setup_env_file():
    env_file = Path(".env")
    env_example = Path(".env.example")
    if env_file.exists():
        print("\n✓ .env already present, keeping it")
        return True
    if env_example.exists():
        shutil.copy(env_example, env_file)
        print("\n✓ .env created from .env.example")
    return True


def create_directory_structure():
    print("\nCreating directories...")
    for directory in ("logs", "output"):
        path = Path(directory)
        if not path.exists():
            path.mkdir(parents=True, exist_ok=True)
            print(f"✓ Directory {directory} created")
    return True


def main():
    print("=== stfem setup ===\n")
    if not check_python_version():
        return 1
    if not install_dependencies():
        return 1
    if not setup_env_file():
        return 1
    if not create_directory_structure():
        return 1

    print("\n=== Setup complete ===")
    print("\nRun a convergence study with:")
    print("python main.py converge --config config/heat2d_eafe.toml")
    return 0


if __name__ == "__main__":
    sys.exit(main())

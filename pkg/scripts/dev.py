#!/usr/bin/env python3
"""
Development script for the FedAC simulator

This script provides development utilities: environment setup, tests, linting and a demo run.
"""

import argparse
import os
import subprocess
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.parent


def setup_development_environment():
    """Set up the development environment."""
    print("🔧 Setting up development environment...")

    os.chdir(PROJECT_ROOT)

    # Create virtual environment if it doesn't exist
    venv_path = PROJECT_ROOT / "venv"
    if not venv_path.exists():
        print("📦 Creating virtual environment...")
        subprocess.run([sys.executable, "-m", "venv", "venv"], check=True)

    python_exe = venv_python()
    pip_exe = venv_path / ("Scripts/pip.exe" if os.name == "nt" else "bin/pip")

    print("📚 Installing requirements...")
    subprocess.run([str(pip_exe), "install", "--upgrade", "pip"], check=True)
    subprocess.run([str(pip_exe), "install", "-r", "requirements.txt"], check=True)
    subprocess.run([str(pip_exe), "install", "-e", ".[dev]"], check=True)

    print("🛠️  Installing development packages...")
    subprocess.run([str(pip_exe), "install", "black", "flake8", "mypy"], check=True)

    return python_exe


def venv_python() -> Path:
    venv_path = PROJECT_ROOT / "venv"
    if not venv_path.exists():
        return Path(sys.executable)
    if os.name == "nt":  # Windows
        return venv_path / "Scripts" / "python.exe"
    return venv_path / "bin" / "python"


def run_tests(python_exe, slow=False, extra=()):
    """Run the test suite."""
    print("🧪 Running test suite...")
    env = os.environ.copy()
    if slow:
        print("🐢 Including acceptance experiments (FEDAC_RUN_SLOW=1)")
        env["FEDAC_RUN_SLOW"] = "1"
    result = subprocess.run([str(python_exe), "-m", "pytest", "scripts/", *extra], env=env, cwd=PROJECT_ROOT)
    if result.returncode == 0:
        print("✅ Tests passed")
    else:
        print("❌ Tests failed")
    return result.returncode


def format_code(python_exe):
    """Format code using black."""
    print("🎨 Formatting code with black...")

    try:
        subprocess.run([str(python_exe), "-m", "black", "--line-length=120", "fedac/", "scripts/"], check=True)
        print("✅ Code formatted successfully")
    except subprocess.CalledProcessError:
        print("❌ Code formatting failed")


def lint_code(python_exe):
    """Lint code using flake8."""
    print("🔍 Linting code with flake8...")

    try:
        subprocess.run([str(python_exe), "-m", "flake8", "fedac/", "scripts/", "--max-line-length=120",
                        "--extend-ignore=E203,W503"], check=True)
        print("✅ Code linting passed")
    except subprocess.CalledProcessError:
        print("❌ Code linting failed")


def type_check(python_exe):
    """Type check code using mypy."""
    print("🔍 Type checking with mypy...")

    try:
        subprocess.run([str(python_exe), "-m", "mypy", "fedac/", "--ignore-missing-imports"], check=True)
        print("✅ Type checking passed")
    except subprocess.CalledProcessError:
        print("❌ Type checking failed")


def run_demo(python_exe, config="configs/synthetic.yaml", rounds=20):
    """Short run of a sample config followed by its partition report."""
    out = PROJECT_ROOT / "runs" / "demo"
    print(f"🚀 Demo: {config} for {rounds} rounds -> {out}")
    subprocess.run([str(python_exe), "-m", "fedac.main", "run", "--config", config, "--out", str(out),
                    "--set", f"rounds={rounds}"], check=True, cwd=PROJECT_ROOT)
    print("\n📊 Final cluster trace:")
    subprocess.run([str(python_exe), "-m", "fedac.main", "report", str(out / "snapshot"), "--kind", "clusters"],
                   check=True, cwd=PROJECT_ROOT)


def create_sample_env():
    """Create a sample .env file."""
    env_content = """# FedAC simulator - Environment Variables

# Artifacts
FEDAC_OUTPUT_DIR=./runs

# Concurrency
FEDAC_MAX_WORKERS=4
FEDAC_MAX_CONCURRENT_RUNS=2

# Logging
FEDAC_LOG_LEVEL=INFO
# FEDAC_LOG_FILE=runs/fedac.log
"""

    env_file = PROJECT_ROOT / ".env"
    if not env_file.exists():
        with open(env_file, "w") as f:
            f.write(env_content)
        print("✅ Created sample .env file")
    else:
        print("⚠️  .env file already exists")


def main():
    """Main development script."""
    parser = argparse.ArgumentParser(description="FedAC simulator - Development Script")
    parser.add_argument("command", choices=[
        "setup", "test", "format", "lint", "typecheck", "env", "demo", "all"
    ], help="Command to run")
    parser.add_argument("--slow", action="store_true", help="Include acceptance experiments in 'test'")
    parser.add_argument("--config", default="configs/synthetic.yaml", help="Config for 'demo'")
    parser.add_argument("--rounds", type=int, default=20, help="Rounds for 'demo'")

    args = parser.parse_args()

    print("🚀 FedAC simulator - Development Script")
    print("=" * 60)

    if args.command == "env":
        create_sample_env()
        return

    if args.command in ["setup", "all"]:
        python_exe = setup_development_environment()
        create_sample_env()
    else:
        python_exe = venv_python()

    if args.command == "all":
        format_code(python_exe)
        lint_code(python_exe)
        type_check(python_exe)
        if run_tests(python_exe, slow=args.slow):
            sys.exit(1)

    elif args.command == "test":
        if run_tests(python_exe, slow=args.slow):
            sys.exit(1)

    elif args.command == "format":
        format_code(python_exe)

    elif args.command == "lint":
        lint_code(python_exe)

    elif args.command == "typecheck":
        type_check(python_exe)

    elif args.command == "demo":
        run_demo(python_exe, args.config, args.rounds)

    print("\n✅ Development script completed")


if __name__ == "__main__":
    main()

"""
Simple script to verify the environment before running experiments
"""
import importlib
import sys
from pathlib import Path

REQUIRED_PACKAGES = [
    ("fastapi", "FastAPI"),
    ("uvicorn", "Uvicorn"),
    ("pydantic", "Pydantic"),
    ("pydantic_settings", "Pydantic-Settings"),
    ("dotenv", "python-dotenv"),
    ("numpy", "NumPy"),
    ("scipy", "SciPy"),
    ("networkx", "NetworkX"),
]


def check_imports():
    """Check that all required packages can be imported"""
    print("Checking imports...")
    ok = True
    for module, label in REQUIRED_PACKAGES:
        try:
            importlib.import_module(module)
            print(f"✓ {label}")
        except ImportError as e:
            print(f"✗ {label}: {e}")
            ok = False
    return ok


def check_env_file():
    """A .env file is optional; every setting has a default"""
    print("\nChecking environment configuration...")
    if Path(".env").exists():
        print("✓ .env file found")
    else:
        print("- no .env file, using defaults (see .env.example)")
    return True


def check_fixtures():
    print("\nChecking fixtures...")
    expected = Path("fixtures/expected.json")
    if expected.exists():
        print(f"✓ {expected}")
        return True
    print(f"✗ {expected} not found")
    return False


def check_invariants():
    """Run the quick fixture suite through the package itself"""
    print("\nRunning fixture check...")
    from app.services.verification import verification_service

    result = verification_service.fixtures(seed=0)
    print(f"{'✓' if result.passed else '✗'} {result.detail}")
    return result.passed


def main():
    print("=" * 50)
    print("Sublinear Cut Setup Verification")
    print("=" * 50)

    results = [("Imports", check_imports())]
    results.append(("Environment", check_env_file()))
    results.append(("Fixtures", check_fixtures()))
    if all(passed for _, passed in results):
        results.append(("Invariants", check_invariants()))

    print("\n" + "=" * 50)
    print("Summary")
    print("=" * 50)

    all_passed = True
    for name, passed in results:
        print(f"{name}: {'✓ PASS' if passed else '✗ FAIL'}")
        all_passed = all_passed and passed

    print("\n" + "=" * 50)
    if all_passed:
        print("✓ All checks passed!")
        print("\nTo run the full invariant suite:")
        print("  python -m app verify")
        print("\nTo start the API server:")
        print("  python run.py")
        return 0
    print("✗ Some checks failed. Please fix the issues above.")
    return 1


if __name__ == "__main__":
    sys.exit(main())

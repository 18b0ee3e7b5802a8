"""
whitneyext - Whitney-type extension of functions from regular subsets of
finite metric measure spaces, with audits of the observed constants.
"""

import importlib
import sys
import traceback

REQUIRED_PACKAGES = ["numpy", "scipy", "numba", "psutil"]


def check_dependencies():
    """Check if all required dependencies are available."""
    missing_deps = []
    for package in REQUIRED_PACKAGES:
        try:
            importlib.import_module(package)
        except ImportError:
            missing_deps.append(package)

    if missing_deps:
        print("ERROR: Missing required dependencies:")
        for dep in missing_deps:
            print(f"  - {dep}")
        print("\nPlease install with:")
        print("pip install -r requirements.txt")
        return False

    return True


def main():
    """Main entry point for the application."""
    debug_mode = "--debug" in sys.argv

    if not check_dependencies():
        sys.exit(2)

    try:
        from cli.app import main as cli_main
        sys.exit(cli_main(sys.argv[1:]))
    except Exception as e:
        print(f"FATAL ERROR: {e}")
        if debug_mode:
            print(f"Traceback: {traceback.format_exc()}")
        sys.exit(2)


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""
Dependency Verification Script

Imports every library the straightening toolkit needs and checks its
version. Run it when a straightkit command fails on import:
    python verify_dependencies.py
"""

import importlib
import sys
from importlib import metadata

from packaging.version import Version

# import name -> (distribution name, minimum version)
REQUIRED = {
    "Core Dependencies": {
        "numpy": ("numpy", "1.24.0"),
        "scipy": ("scipy", "1.10.0"),
    },
    "Image Processing": {
        "cv2": ("opencv-python", "4.8.0"),
        "PIL": ("pillow", "10.0.0"),
        "skimage": ("scikit-image", "0.21.0"),
        "matplotlib": ("matplotlib", "3.7.0"),
    },
    "Machine Learning Dependencies": {
        "torch": ("torch", "2.0.0"),
    },
    "Test Dependencies": {
        "pytest": ("pytest", "7.0.0"),
    },
}


def print_header(text):
    """Print formatted header text"""
    print(f"\n{text}")
    print("=" * len(text))


def _installed_version(module, dist_name):
    version = getattr(module, "__version__", None)
    if version is None:
        try:
            version = metadata.version(dist_name)
        except metadata.PackageNotFoundError:
            version = "unknown"
    return str(version)


def check_dependency(module_name, dist_name, min_version=None, extra_check=None):
    """Check that a dependency imports and meets the minimum version"""
    try:
        module = importlib.import_module(module_name)
    except ModuleNotFoundError:
        print(f"❌ {module_name}: Not found (pip install {dist_name})")
        return False
    except Exception as e:
        print(f"❌ {module_name}: Error - {e}")
        return False

    version = _installed_version(module, dist_name)
    if min_version and version != "unknown":
        # Local build tags such as 2.1.0+cpu are fine
        if Version(version.split("+")[0]) < Version(min_version):
            print(f"⚠️  {module_name}: version {version} found (Minimum required: {min_version})")
            return False

    print(f"✅ {module_name}: version {version}")
    if extra_check:
        return extra_check(module)
    return True


def check_torch(torch):
    """Threading and determinism support used by training"""
    try:
        print(f"  ↳ CPU threads: {torch.get_num_threads()}")
        torch.use_deterministic_algorithms(True, warn_only=True)
        torch.use_deterministic_algorithms(False)
        print("  ↳ Deterministic algorithms: Available")
        return True
    except Exception as e:
        print(f"  ↳ Error during extended checks: {e}")
        return False


def check_pillow(pil):
    """PNG and PGM (P5) support"""
    from PIL import features

    print(f"  ↳ PNG support: {'Available' if features.check('zlib') else 'Missing zlib'}")
    return True


EXTRA_CHECKS = {"torch": check_torch, "PIL": check_pillow}


def main():
    """Run dependency checks"""
    print_header("Chromosome Straightening Toolkit - Dependency Verification")
    print("Python version:", sys.version)

    results = []
    for section, modules in REQUIRED.items():
        print_header(section)
        for module_name, (dist_name, min_version) in modules.items():
            results.append(check_dependency(module_name, dist_name, min_version, EXTRA_CHECKS.get(module_name)))

    success_count = sum(results)
    total_count = len(results)
    print_header("Summary")
    print(f"✅ Successfully verified: {success_count}/{total_count} dependencies")

    if success_count < total_count:
        print(f"❌ Missing or problematic: {total_count - success_count} dependencies")
        print("\nTo install missing dependencies, run:")
        print("    pip install -r requirements.txt")
        return 1
    print("\nAll dependencies are installed correctly!")
    return 0


if __name__ == "__main__":
    sys.exit(main())

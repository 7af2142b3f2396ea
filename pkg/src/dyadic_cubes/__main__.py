"""Allow running as python -m dyadic_cubes."""
from dyadic_cubes.cli import main
if __name__ == "__main__":
    main()

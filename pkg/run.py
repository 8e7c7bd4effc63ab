import sys
import os

# Garante que a raiz do projeto esteja no caminho de importação
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())

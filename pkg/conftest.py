import os
import sys

# flat module layout: make `import rates` work from anywhere under tests/
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

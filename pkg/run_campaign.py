# run_campaign.py
"""
K-cell mean width lab - campaign launcher

    python run_campaign.py run configs/rate_ball_2d.json --workers 4 --check
    python run_campaign.py replay results/rate_ball_2d.csv configs/rate_ball_2d.json
"""

import sys
from pathlib import Path

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent))

from kcell_lab.cli import main

if __name__ == "__main__":
    sys.exit(main())

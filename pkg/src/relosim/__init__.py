"""Agent-based residential relocation and commute mode choice simulator.

Worker agents jointly pick housing units and commuting modes by weighted
multi-criteria scoring, iterated until the number of movers per iteration
settles below a threshold.  A calibration harness fits the 64 behavioral
weights (8 income profiles x 8 criteria) against observed housing and
mode-share distributions by restart hill climbing on the summed RMSE
errors.  A CLI and a small HTTP service expose runs, calibration, and
what-if intervention studies.
"""

__version__ = "0.1.0"

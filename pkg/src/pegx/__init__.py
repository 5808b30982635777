"""pegx: a desk-scale lab for policy transfer between robot embodiments.

Two simulated arms with different actuation dynamics perform peg-in-hole
insertion under a hybrid motion-force controller. A soft actor-critic agent
learns to place the controller's setpoint and gains; the transfer harness
trains, evaluates, transfers, and fine-tunes policies across the two
embodiments and reports the comparison.
"""

__version__ = "0.1.0"

"""Effect-based action prototypes for a ballistic stair-climbing robot.

Pipeline: uniform motion exploration, effect clustering, per-class prototype
generation, and DQN training over the resulting discrete action sets.
"""

__version__ = "0.1.0"

"""Asian option pricing and kinetic obstacle problems."""

from .asian import AsianModel, deterministic_price, mc_asian_oracle, price_asian
from .obstacle import (ObstacleProblem, energy_functional, obstacle_toy_1d,
                       solve_obstacle, stability_bound_check)

__all__ = ["AsianModel", "price_asian", "mc_asian_oracle", "deterministic_price",
           "ObstacleProblem", "solve_obstacle", "energy_functional",
           "stability_bound_check", "obstacle_toy_1d"]

"""Birkhoff spectra of interval maps with parabolic points."""

from .symbolic import PotentialTable, BudgetExceeded, birkhoff_average, enumerate_cylinders, variation_bound
from .map_model import BranchSystem, build_system, discretize_analytic
from .measures import MarkovMeasure, MeasureStats, entropy_rate, measure_stats, cylinder_mass, sample_path

__version__ = "0.1.0"

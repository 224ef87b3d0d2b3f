"""Two-charge delay electrodynamics: light-cone method of steps, energy audit, circular orbits."""
__version__ = "0.1.0"

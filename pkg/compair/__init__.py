"""
CompAir - zyklengenauer Simulator für hybride DRAM-/SRAM-PIM-Systeme mit rechnendem NoC
"""

__version__ = '0.1.0'

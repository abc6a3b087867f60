"""
Ausgabe von Reports und Sweep-Ergebnissen
"""

from .report_writer import ReportWriter

__all__ = ['ReportWriter']

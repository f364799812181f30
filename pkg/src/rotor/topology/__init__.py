"""Capture sets, degree certificates and periodic-orbit search."""
from .curves import CCW, CW, PolyCurve, split_curve, winding_number
from .degree import DegreeReport, DisplacementSampler, degree_fixed_point, sample_winding
from .capture import CaptureSet, approximate_null_set, build_capture_set, choose_n_bar, marching_squares
from .periodic import PeriodicOrbit, find_periodic, find_periodic_in
from .multiplicity import MultiplicityResult, multiplicity_search

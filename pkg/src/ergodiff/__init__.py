"""Temporo-spatial differentiation laboratory.

Temporal ergodic averages over Folner sets, spatial conditional averages
over shrinking regions, their composition, gauges of observables, and the
diagnostics that decide when the composed limit agrees with the pointwise
one.
"""
from .averaging import (Box, ConstantTheta, ExplicitList, FolnerSet, FunctionWeight, Interval,
                        MultipleAverageSpec, PolynomialImage, SequenceWeight, Unit, avg_field,
                        avg_multiple, avg_temporal, avg_weighted, folner_defect, folner_set,
                        modulus_power)
from .dynamics import (DistortionProfile, DoublingMap, FullShift, HolderProfile, Rotation,
                       SymbolicPoint, TorusPoint, TorusTranslation, TrivialAction, act, distance,
                       distortion_bound)
from .gauge import (InvariantMeasureCatalog, gauge_orbit_oracle, gauge_supnorm, herman_check,
                    unique_ergodicity_probe)
from .kernels import BACKEND
from .measure import (Ball, LevelSet, MeasureModel, SampleSet, SpatialFamily, WholeSpace, alpha,
                      check_distortion, measure_of, sup_alpha_over_regions)
from .observables import Constant, Cylinder, FunctionObservable, TrigPolynomial
from .tsd import (build_counterexample, decay_check, multiple_tsd, quantitative_bound,
                  random_tsd_experiment, run_tsd)

__version__ = "0.1.0"

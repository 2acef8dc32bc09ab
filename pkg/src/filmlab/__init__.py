"""Closed-loop multi-objective Bayesian optimization of thin-film
coatings, with a calibrated virtual laboratory standing in for the
physical platform."""

from .domain import (CanonicalObjectives, ObjectiveVector, ParameterBounds,
                     ParameterSet, ReferencePoint, SampleRecord, canonicalize,
                     decanonicalize, dominates, pareto_front_indices)
from .acquisition import (AcquisitionConfig, hypervolume, initial_design,
                          nehvi, suggest_batch)
from .gp import GpConfig, GpModel, fit, predict, posterior_sample
from .campaign import (CampaignConfig, CampaignState, run_campaign,
                       hypervolume_trace, reproducibility_stats, load_state,
                       measure_objectives)
from .virtlab import (GroundTruthParams, NoiseModel, ZERO_NOISE, ground_truth,
                      run_experiment, synthesize_image, synthesize_spectrum)

__version__ = "0.1.0"

"""Online estimation of total power-system inertia from PFC-unit measurements.

The estimator builds a two-parameter linear regression from the average
frequency of the primary-controlled units and their power signals, turns
it into two scalar regressions by delay extension and adjugate mixing, and
runs one gradient estimator per parameter. Simulators for an aggregated
model and a small multi-machine grid provide ground truth.
"""

from .estimator import (DivergenceWarning, DremEstimator, EstimateRecord, EstimateSeries,
                        EstimatorConfig, NotIdentifiableError, RegressorSnapshot, StreamError,
                        estimate_series, excitation_norm, extend_and_mix, gradient_update,
                        default_eta_init, recover_parameters, run_estimator)
from .filters import (DelayLine, DirtyDerivative, FilterState, LowPass, delay_step,
                      dirty_derivative_step, lowpass_step)
from .grid import (GridSimulator, LoadStep, MachineParams, Outage, RescheduleRamp, ScenarioSpec,
                   aggregate_params, compute_avg_freq, compute_coi, compute_h_tot,
                   compute_p_e_pfc, compute_p_m_pfc, compute_p_pfc_tot, default_fleet,
                   homogeneous_fleet, schedule_trace, simulate_scenario)
from .metrics import (MetricsReport, final_rel_err, metric_e_avg, metric_freq_replay,
                      replay_frequency)
from .model import (ENTSOE_PARAMS, AggParams, AggregatedScenario, AggState, FrequencyCollapseError,
                    MeasurementSeries, Sample, StepChange, TrueTheta, TruthTrace, agg_derivative,
                    governor_output, simulate_aggregated, step_aggregated, to_hz)
from .csvio import CsvFormatError, emit_csv, ingest_csv

__version__ = "0.1.0"

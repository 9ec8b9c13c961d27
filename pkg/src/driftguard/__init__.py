"""driftguard: prediction-interval control charts for time series whose
noise level changes over time.

Phase I fits a bootstrap ensemble of LSTM regressors plus a variance
network on in-control data; Phase II monitors new observations against
per-point prediction intervals.  Includes an AR-GARCH simulator,
false-alarm / detection metrics, benchmark detectors, a CLI and an HTTP
service.
"""

__version__ = "0.1.0"

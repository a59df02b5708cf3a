"""Time-averaging error quantification for stationary time series."""

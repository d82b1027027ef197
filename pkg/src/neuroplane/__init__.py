"""neuroplane: real-time concentration/relaxation neurofeedback engine."""

__version__ = "0.1.0"

# Floquet Chains: periodic linear systems, suspension flows and chain recurrence
__version__ = "0.3.0"

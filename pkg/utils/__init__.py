"""
Engines: analytic model, simulator, configuration, replication runner and reporting
"""

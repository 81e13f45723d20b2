# Experiment engine

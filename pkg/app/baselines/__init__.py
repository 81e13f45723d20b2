# Comparison policies: genie, direct, fixed thresholds

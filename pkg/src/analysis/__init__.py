# Test procedure and Monte Carlo experiments

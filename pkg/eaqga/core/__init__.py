"""
Core solver components: problem model, chain sampler, EAQGA, baselines and oracle.
"""

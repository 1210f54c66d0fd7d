"""graphprior: measuring and modeling priors over small graphs.

Subpackages cover the full loop: simulate iterated-learning chains whose
stationary law is a shared prior, fit hierarchical max-entropy models to the
recorded responses, and summarize the result with graph cumulants and
mixing-time spectra.  A small HTTP service runs live chains, and the CLI in
`graphprior.cli` exposes every step.
"""

__version__ = "0.1.0"

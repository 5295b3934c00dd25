"""Monte Carlo laboratory for smallest-singular-value floors of random matrices
with independent isotropic heavy-tailed rows.

Subpackages:

- ``distributions``: samplers and analytic descriptors for isotropic families
- ``spectrum``: row-normalized sample matrices and extreme singular values
- ``smallball``: sandwich estimates of the small-ball function Q(u)
- ``rademacher``: Rademacher complexity of the linear class
- ``bounds``: floor/probability predictions with calibratable constants
- ``empirical_process``: truncation, dyadic levels, VC checks, exact tiny oracle
- ``experiments``: beta-sweep harness, exponent fits, verification suite, CLI
"""

__version__ = "0.1.0"

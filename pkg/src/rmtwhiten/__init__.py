"""Random-matrix-corrected whitening for spherical Gaussian mixtures."""

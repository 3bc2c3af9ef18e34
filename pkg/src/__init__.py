# Riemannian posterior sampler

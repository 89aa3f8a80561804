"""Eigenvalues of clamped and buckling plates by a mixed cubic FEM.

The package splits into a mesh/assembly/solve pipeline (meshgen, space,
assembly, eigensolver), corner asymptotics (corner), bisector analysis
(postprocess), and an experiment driver (experiments, cli).
"""

__version__ = "0.1.0"

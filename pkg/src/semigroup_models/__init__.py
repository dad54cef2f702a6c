"""Finite-dimensional models of pure contractive semigroups and their cogenerators."""

from .cogenerator import (
    Contraction,
    SemigroupSampler,
    cayley_generator,
    cogenerator_of,
    is_cogenerator,
    is_pure,
    purity_defect,
    semigroup_at,
)
from .commutant import commutant_solve, eigenspace_one, in_class_CE, repair_symbol
from .dilation import dilation_isometry, tensor_invariant_subspace_check
from .exceptions import ModelError, PreconditionError
from .hardy import OperatorSymbol, SubspaceBasis, TruncationParams, phi_coeffs, shift_semigroup_matrix
from .normal import joint_diagonalize, model_semigroup_at, normal_model
from .wold import StructuredIsometryTuple, classify_multishift, slocinski_decompose

__version__ = "0.1.0"

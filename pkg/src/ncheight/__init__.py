"""Heights for number fields, lattices, semisimple algebras and hermitian
bimodules, with the convolution dynamics they generate."""
from .errors import NcHeightError
from .exact import PowerProduct
from .numfield import FieldElement, NumberField
from .heights import (IntPolynomial, height_algebraic_number, lehmer_search, mahler_measure,
                      mahler_measure_torus, morphism_height, polynomial_height)
from .lattice import QuadLattice, gromov_mass, k_volume, lll_reduce, orthogonality_defect
from .ssalgebra import SemisimpleAlgebra, hattori_stallings_rank, make_algebra
from .bimodule import (HermitianBimodule, canonical_basis_height, concrete_tensor_oracle, hs_height,
                       jones_index, make_hermitian_bimodule, tensor_bimodules)
from .dynamics import build_universe, convolve, partition_function, rank_multiplicity, time_evolve
from .nctorus import NCTorusAlgebra, verify_arithmetic_axioms

__version__ = "0.1.0"

__all__ = [
    "NcHeightError", "PowerProduct", "FieldElement", "NumberField",
    "IntPolynomial", "height_algebraic_number", "lehmer_search", "mahler_measure", "mahler_measure_torus",
    "morphism_height", "polynomial_height",
    "QuadLattice", "gromov_mass", "k_volume", "lll_reduce", "orthogonality_defect",
    "SemisimpleAlgebra", "hattori_stallings_rank", "make_algebra",
    "HermitianBimodule", "canonical_basis_height", "concrete_tensor_oracle", "hs_height", "jones_index",
    "make_hermitian_bimodule", "tensor_bimodules",
    "build_universe", "convolve", "partition_function", "rank_multiplicity", "time_evolve",
    "NCTorusAlgebra", "verify_arithmetic_axioms",
]

from .tape import Tape, Tensor, backward, primitive
from .gradcheck import GradientReport, check_gradients
from .eigen import second_largest_eigenvalue_diff, normalize_symmetric
from .optim import SGD, Adam
from .rng import Rng

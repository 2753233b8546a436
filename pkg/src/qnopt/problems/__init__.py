from .data import load_idx, load_mnist, synthetic_digits
from .functions import Logistic, Quadratic, Rosenbrock, make_logistic, make_quadratic, test_functions
from .lenet import LENET5, Conv2d, Dense, MaxPool, output_shapes, param_count
from .mlp import Dataset, Mlp, MlpOracle, MlpSpec, cross_entropy, log_softmax, mlp_oracle, softmax
from .oracle import BatchView, CountingOracle, ObjectiveOracle, check_gradient

"""Asynchronous variance-reduced block proximal stochastic gradient methods."""

from .errors import (AsyncVRError, BlockIndexError, BudgetExceededError, ConfigError,
                     DimensionError, DivergenceError, InvalidPartitionError, InvalidStepError,
                     ParseError, TrajectoryError)
from .metrics import ergodic_gap, fit_line, fit_rate, gradient_mapping, relative_error
from .partition import BlockPartition, assemble, block_slice, even_partition, make_partition, set_block
from .problems import (gen_lasso, gen_lasso_ratio, gen_pl_quadratic, gen_sigmoid_data,
                       gen_sigmoid_ls, lipschitz_blocks, load_libsvm)
from .regularizers import box, l1, prox, zero
from .schedules import BatchPolicy, BlockClocks, batch_size, constant, geometric, polynomial, power
from .selection import build_distribution, draw_block
from .solver import (Budget, SolverConfig, SteplengthRule, async_vr_step, reference_optimum, run,
                     run_bsg)

__version__ = "0.1.0"

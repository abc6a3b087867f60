# Kernels: hand-written row-level programs for the non-linear operators
from .programs import (
    ASM_DIR, EXP_FLOWS, SQRT_ROUNDS, TAYLOR_ORDER, exp_program, lane_mask, load_template, max_program,
    max_tree_level, rope_program, sqrt_program,
)
from .reference import (
    exp_reference, rmsnorm_reference, rope_reference, silu_reference, softmax_reference, sqrt_reference,
)
from .runner import (
    KERNELS, KernelMachine, KernelResult, KernelTrace, SoftmaxProgram, exp_kernel, exp_programs,
    rmsnorm_kernel, rope_kernel, silu_kernel, softmax_kernel, softmax_program, sqrt_kernel, trace_exp,
)
from .costs import KernelCosts, kernel_costs
from .checks import KERNEL_CHECKS, ROPE_CYCLE_BOUND, KernelCheck, check_kernel, rel_error

__all__ = [
    'ASM_DIR', 'EXP_FLOWS', 'SQRT_ROUNDS', 'TAYLOR_ORDER', 'exp_program', 'lane_mask', 'load_template',
    'max_program', 'max_tree_level', 'rope_program', 'sqrt_program', 'exp_reference', 'rmsnorm_reference',
    'rope_reference', 'silu_reference', 'softmax_reference', 'sqrt_reference', 'KERNELS', 'KernelMachine',
    'KernelResult', 'SoftmaxProgram', 'exp_kernel', 'exp_programs', 'rmsnorm_kernel', 'rope_kernel', 'silu_kernel',
    'softmax_kernel', 'softmax_program', 'sqrt_kernel', 'KernelTrace', 'trace_exp', 'KernelCosts',
    'kernel_costs', 'KERNEL_CHECKS', 'ROPE_CYCLE_BOUND', 'KernelCheck', 'check_kernel', 'rel_error',
]

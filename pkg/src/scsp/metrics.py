"""FLOPs and parameter-sparsity accounting.

Conv layers cost 2*H*W*(C_in*K^2 + 1)*C_out (H, W the output feature map),
FC layers (2*C_in - 1)*C_out, both exact integer counts. Effective FLOPs
recompute the same formulas with channel counts reduced to the currently
nonzero filters, propagating the reduced channel count into the next layer's
C_in; a per-layer variant without the propagation is also available since
published per-layer tables are usually computed that way.

Sparsity counts exactly-nonzero weight entries (zeroize writes exact zeros);
biases are excluded from the accounting.
"""

from dataclasses import dataclass

import numpy as np

from . import nn

_INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class LayerBudget:
    layer_id: int
    theoretical_flops: int
    effective_flops: int
    total_params: int
    active_params: int


def conv_flops(h, w, c_in, k, c_out):
    """Forward FLOPs of a conv layer with output map h x w."""
    if min(h, w, c_in, k, c_out) < 1:
        raise ValueError("all conv dimensions must be positive")
    flops = 2 * h * w * (c_in * k * k + 1) * c_out
    if flops > _INT64_MAX:
        raise ValueError(f"FLOP count {flops} exceeds 64-bit range")
    return flops


def fc_flops(c_in, c_out):
    """Forward FLOPs of a fully connected layer."""
    if min(c_in, c_out) < 1:
        raise ValueError("fc dimensions must be positive")
    flops = (2 * c_in - 1) * c_out
    if flops > _INT64_MAX:
        raise ValueError(f"FLOP count {flops} exceeds 64-bit range")
    return flops


def sparsity(weights):
    """Fraction of exactly-nonzero entries."""
    weights = np.asarray(weights)
    if weights.size == 0:
        raise ValueError("empty weight tensor")
    return np.count_nonzero(weights) / weights.size


def _active_filters(weights):
    flat = weights.reshape(-1, weights.shape[-1])
    return int(np.count_nonzero(np.any(flat != 0.0, axis=0)))


def effective_network_flops(state, propagate_in_channels=True):
    """Per-layer budgets plus totals for the current (possibly pruned) state.

    Theoretical counts use the architecture's channel sizes; effective counts
    replace C_out with the layer's nonzero-filter count and (by default) C_in
    with the previous layer's. Returns (budgets, totals) where totals holds
    theoretical_flops, effective_flops and pruned_flops_pct.
    """
    shapes = nn.feature_shapes(state.specs)
    budgets = []
    spatial = None  # output H*W multiplier feeding a flatten
    c_prev_total = 1
    c_prev_active = 1
    total_theory = 0
    total_eff = 0
    for i, spec in enumerate(state.specs):
        h_in, w_in, _ = shapes[i]
        if spec.kind == nn.CONV:
            h_out = (h_in + 2 * spec.padding - spec.kernel) // spec.stride + 1
            w_out = (w_in + 2 * spec.padding - spec.kernel) // spec.stride + 1
            w_tensor = state.weights[i]
            active = _active_filters(w_tensor)
            theory = conv_flops(h_out, w_out, spec.in_channels, spec.kernel, spec.out_channels)
            c_in_eff = c_prev_active if propagate_in_channels else spec.in_channels
            eff = (
                conv_flops(h_out, w_out, c_in_eff, spec.kernel, active)
                if active and c_in_eff
                else 0
            )
            budgets.append(
                LayerBudget(
                    layer_id=i,
                    theoretical_flops=theory,
                    effective_flops=eff,
                    total_params=int(w_tensor.size),
                    active_params=int(np.count_nonzero(w_tensor)),
                )
            )
            total_theory += theory
            total_eff += eff
            c_prev_total, c_prev_active = spec.out_channels, active
        elif spec.kind == nn.FLATTEN:
            spatial = h_in * w_in
        elif spec.kind == nn.FC:
            w_tensor = state.weights[i]
            active = _active_filters(w_tensor)
            # fan-in shrinks with the previous layer's pruned channels
            if spatial is not None:
                fan_in_eff = spatial * c_prev_active if propagate_in_channels else spec.fan_in
                spatial = None
            else:
                fan_in_eff = c_prev_active if propagate_in_channels else spec.fan_in
            theory = fc_flops(spec.fan_in, spec.fan_out)
            eff = fc_flops(fan_in_eff, active) if active and fan_in_eff else 0
            budgets.append(
                LayerBudget(
                    layer_id=i,
                    theoretical_flops=theory,
                    effective_flops=eff,
                    total_params=int(w_tensor.size),
                    active_params=int(np.count_nonzero(w_tensor)),
                )
            )
            total_theory += theory
            total_eff += eff
            c_prev_total, c_prev_active = spec.fan_out, active
    totals = {
        "theoretical_flops": total_theory,
        "effective_flops": total_eff,
        "pruned_flops_pct": 100.0 * (1.0 - total_eff / total_theory) if total_theory else 0.0,
    }
    return budgets, totals


def network_sparsity(state):
    """Model-level sparsity: nonzero weights over total weights."""
    nonzero = sum(int(np.count_nonzero(state.weights[i])) for i in state.parameter_layer_ids())
    total = sum(int(state.weights[i].size) for i in state.parameter_layer_ids())
    return nonzero / total

"""Group-effect ranking and the soft pruning schedule.

Every pruning round: cluster each prunable layer's filters, score each group
by the summed Lp norms of its members, zeroize the lowest-effect groups.
Zeroized filters keep receiving gradient updates (soft pruning), so they can
recover before the next round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import LayerSkip, cluster_filters, drop_zero_filters, reshape_filters


@dataclass(frozen=True)
class PruneConfig:
    """Schedule knobs: prune_rate_per_layer is the fraction of groups zeroized
    per round, pruning_gap the epoch stride between rounds, p_norm the Lp used
    for group effects, skip_layers the layer ids never pruned (the last FC by
    convention), recovery_tail_epochs the pruning-free epochs before the end."""

    prune_rate_per_layer: float = 0.2
    pruning_gap: int = 1
    p_norm: float = 2.0
    skip_layers: frozenset = frozenset()
    recovery_tail_epochs: int = 0

    def __post_init__(self):
        if not 0.0 <= self.prune_rate_per_layer < 1.0:
            raise ValueError(f"prune rate must be in [0, 1), got {self.prune_rate_per_layer}")
        if self.pruning_gap < 1:
            raise ValueError(f"pruning_gap must be >= 1, got {self.pruning_gap}")
        if self.p_norm < 1.0:
            raise ValueError(f"p_norm must be >= 1, got {self.p_norm}")
        if self.recovery_tail_epochs < 0:
            raise ValueError(f"recovery_tail_epochs must be >= 0, got {self.recovery_tail_epochs}")
        object.__setattr__(self, "skip_layers", frozenset(self.skip_layers))


@dataclass(frozen=True)
class GroupEffect:
    layer_id: int
    group_id: int
    effect: float  # sum of member filters' Lp norms, >= 0
    member_filters: np.ndarray  # original filter indices


@dataclass
class PruneMask:
    """Per-layer filter activity. active[j] is False exactly when filter j's
    weights are all zero at the time the mask was written; between pruning
    rounds the weights recover and the mask is informational only."""

    layer_id: int
    active: np.ndarray
    last_pruned_groups: list = field(default_factory=list)

    @classmethod
    def all_active(cls, layer_id, n_filters):
        return cls(layer_id=layer_id, active=np.ones(n_filters, dtype=bool))


@dataclass(frozen=True)
class PruneLogRecord:
    """One layer's outcome in one pruning round, consumed by the driver's
    reports (and by the final hard zeroize, via pruned_filters)."""

    layer_id: int
    group_sizes: list
    effects: list
    pruned_group_ids: list
    pruned_filters: np.ndarray


@dataclass(frozen=True)
class RecoveryReport:
    """Per-filter recovery after training past a pruning round."""

    layer_id: int
    pruned_filters: np.ndarray
    recovered: np.ndarray  # bool per pruned filter: norm became > 0
    recovered_filter_fraction: float
    recovered_weight_fraction: float  # nonzero fraction of previously zeroized weights


def group_effect(m, assignment, p=2.0):
    """Score each group: sum over member filters of the filter's Lp norm.

    The assignment must partition exactly the filters retained in m.
    """
    if p < 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    members_all = np.concatenate([g for g in assignment.groups]) if assignment.groups else np.empty(0, int)
    if sorted(members_all.tolist()) != sorted(m.active_index_map.tolist()):
        raise ValueError(
            f"layer {m.layer_id}: assignment does not partition the filter matrix "
            f"({len(members_all)} grouped vs {m.n_filters} retained filters)"
        )
    col_of = {int(orig): j for j, orig in enumerate(m.active_index_map)}
    norms = np.sum(np.abs(m.weights) ** p, axis=0) ** (1.0 / p)
    effects = []
    for gid, members in enumerate(assignment.groups):
        effect = float(sum(norms[col_of[int(j)]] for j in members))
        effects.append(
            GroupEffect(
                layer_id=m.layer_id,
                group_id=gid,
                effect=effect,
                member_filters=np.asarray(members, dtype=int),
            )
        )
    return effects


def select_groups_to_prune(effects, prune_rate):
    """Pick the floor(n_groups * prune_rate) groups of smallest effect.

    Ties break toward the lower group id. A floor of zero returns an empty
    list (layer untouched this round).
    """
    if not effects:
        raise ValueError("effects must be non-empty")
    if not 0.0 <= prune_rate < 1.0:
        raise ValueError(f"prune_rate must be in [0, 1), got {prune_rate}")
    # epsilon guards IEEE products like 3 * 0.1 landing a hair under an integer
    n_prune = int(math.floor(len(effects) * prune_rate + 1e-12))
    if n_prune == 0:
        return []
    ranked = sorted(effects, key=lambda e: (e.effect, e.group_id))
    return [e.group_id for e in ranked[:n_prune]]


def zeroize_groups(state, layer_id, groups, assignment):
    """Zeroize the weights and biases of every filter in the given groups.

    Mutates state in place; other filters' weights are untouched. Returns
    (state, mask) where the mask's activity is recomputed from the weights so
    that inactive <=> all-zero holds exactly.
    """
    n_groups = assignment.n_groups
    for g in groups:
        if not 0 <= g < n_groups:
            raise ValueError(f"layer {layer_id}: unknown group id {g} (have {n_groups} groups)")
    w = state.weights[layer_id]
    b = state.biases[layer_id]
    if groups:
        members = np.sort(np.concatenate([assignment.groups[g] for g in groups]).astype(int))
        w[..., members] = 0.0
        b[members] = 0.0
    mask = _mask_from_weights(layer_id, w, list(groups))
    state.masks[layer_id] = mask
    return state, mask


def zeroize_filters(state, layer_id, filter_indices):
    """Hard-zeroize an explicit filter set (the driver's final re-prune)."""
    filter_indices = np.asarray(filter_indices, dtype=int)
    w = state.weights[layer_id]
    b = state.biases[layer_id]
    if filter_indices.size:
        w[..., filter_indices] = 0.0
        b[filter_indices] = 0.0
    mask = _mask_from_weights(layer_id, w, state.masks[layer_id].last_pruned_groups)
    state.masks[layer_id] = mask
    return state, mask


def _mask_from_weights(layer_id, w, pruned_groups):
    flat = w.reshape(-1, w.shape[-1])
    active = np.any(flat != 0.0, axis=0)
    return PruneMask(layer_id=layer_id, active=active, last_pruned_groups=list(pruned_groups))


def scsp_step(state, spectral_cfgs, prune_cfg, seed):
    """One pruning round over every prunable, non-skipped layer.

    Per layer: cluster the nonzero filters, score groups, zeroize the
    lowest-effect floor(n_groups * rate). Filters that are currently zero are
    invisible to clustering (they only rejoin once training recovers them).
    Layers with too few nonzero filters are skipped silently. Mutates state in
    place; returns (masks, records) for the layers actually processed.
    """
    masks = []
    records = []
    for layer_id in state.prunable_layer_ids():
        if layer_id in prune_cfg.skip_layers:
            continue
        cfg = spectral_cfgs[layer_id]
        layer_seed = int(np.random.SeedSequence([seed, layer_id]).generate_state(1)[0])
        w = state.weights[layer_id]
        try:
            assignment = cluster_filters(w, cfg, layer_seed, layer_id)
        except LayerSkip:
            continue
        m = drop_zero_filters(reshape_filters(w, layer_id))
        effects = group_effect(m, assignment, prune_cfg.p_norm)
        selected = select_groups_to_prune(effects, prune_cfg.prune_rate_per_layer)
        _, mask = zeroize_groups(state, layer_id, selected, assignment)
        masks.append(mask)
        pruned = (
            np.sort(np.concatenate([assignment.groups[g] for g in selected]).astype(int))
            if selected
            else np.empty(0, dtype=int)
        )
        records.append(
            PruneLogRecord(
                layer_id=layer_id,
                group_sizes=[len(g) for g in assignment.groups],
                effects=[e.effect for e in effects],
                pruned_group_ids=list(selected),
                pruned_filters=pruned,
            )
        )
    return masks, records


def soft_recovery_check(state_before, state_after_update, mask):
    """Report, per filter pruned in `mask`, whether training made it nonzero.

    state_before is the state right after the pruning round (pruned filters
    exactly zero); state_after_update the state after >= 1 gradient updates.
    """
    layer_id = mask.layer_id
    pruned = np.nonzero(~mask.active)[0]
    w_before = state_before.weights[layer_id].reshape(-1, mask.active.size)
    w_after = state_after_update.weights[layer_id].reshape(-1, mask.active.size)
    if pruned.size and np.any(w_before[:, pruned] != 0.0):
        raise ValueError(f"layer {layer_id}: mask disagrees with state_before weights")
    recovered = np.any(w_after[:, pruned] != 0.0, axis=0)
    n_weights = w_after[:, pruned].size
    nonzero_weights = int(np.count_nonzero(w_after[:, pruned]))
    return RecoveryReport(
        layer_id=layer_id,
        pruned_filters=pruned,
        recovered=recovered,
        recovered_filter_fraction=float(recovered.mean()) if pruned.size else 1.0,
        recovered_weight_fraction=(nonzero_weights / n_weights) if n_weights else 1.0,
    )

#pragma once

#include "alignlab/induction.hpp"

namespace alignlab {

struct LayerSelectResult {
    int layer_fwd = 0;  // 1-based, for the source-to-target model
    int layer_rev = 0;  // 1-based, for the target-to-source model
    Mat agreement_aer;  // L x L, cell (i-1, j-1) = AER(fwd layer i vs rev layer j)
};

/// Cross-direction agreement layer selection: hypothesis alignments from
/// the forward model at layer i are scored against transposed reverse-model
/// alignments at layer j (references treated as sure == possible); returns
/// the argmin cell, ties broken by smallest (i, j).
/// `pairs` are validation pairs in the forward direction.
LayerSelectResult select_layers(const TransformerModel& model_fwd,
                                const TransformerModel& model_rev,
                                const std::vector<ParallelPair>& pairs, InduceMethod method);

/// Per-layer alignments over a corpus for one model/direction, teacher
/// forced; alignments[l-1][i] is the layer-l alignment of pair i.
std::vector<std::vector<AlignmentSet>> per_layer_alignments(const TransformerModel& model,
                                                            const std::vector<ParallelPair>& pairs,
                                                            InduceMethod method);

}  // namespace alignlab

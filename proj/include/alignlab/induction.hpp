#pragma once

#include "alignlab/corpus.hpp"
#include "alignlab/transformer.hpp"

namespace alignlab {

enum class InduceMethod { Naive, Shift, NaiveLayerAvg, ShiftLayerAvg };

InduceMethod parse_method(const std::string& s);  // "naive" | "shift" | "naive-la" | "shift-la"

// Default extraction layers when no selection has been run (1-based):
// shift uses layer 3, naive the penultimate layer.
int default_layer(InduceMethod method, int n_layers);

/// S[i][j] = W^l[i][j]; the <eos>-output row of W is discarded.
Mat scores_naive(const AttentionStack& stack, int layer);

/// S[i][j] = W^l[i+1][j]; the <bos>-input row of W is discarded.
Mat scores_shift(const AttentionStack& stack, int layer);

/// Mean of W^l over layers, then the mode's row selection.
Mat scores_layer_avg(const AttentionStack& stack, bool shift);

/// MAP extraction: one link per target row, argmax over sources, ties
/// broken toward the smallest source index. Result has possible == sure.
AlignmentSet map_extract(const Mat& scores);

/// scores_* + map_extract for the given method/layer (layer ignored for
/// layer-averaged methods).
AlignmentSet induce(const AttentionStack& stack, InduceMethod method, int layer);

}  // namespace alignlab

#include "alignlab/induction.hpp"

#include <cstring>

namespace alignlab {

InduceMethod parse_method(const std::string& s) {
    if (s == "naive") return InduceMethod::Naive;
    if (s == "shift") return InduceMethod::Shift;
    if (s == "naive-la") return InduceMethod::NaiveLayerAvg;
    if (s == "shift-la") return InduceMethod::ShiftLayerAvg;
    throw UsageError("unknown induction method: " + s);
}

int default_layer(InduceMethod method, int n_layers) {
    if (method == InduceMethod::Shift) return std::min(3, n_layers);
    if (method == InduceMethod::Naive) return std::max(1, n_layers - 1);
    return 1;  // layer-averaged methods ignore it
}

namespace {

const Mat& layer_of(const AttentionStack& stack, int layer) {
    if (layer < 1 || layer > stack.n_layers())
        throw UsageError("layer out of range: " + std::to_string(layer) + " (stack has " +
                         std::to_string(stack.n_layers()) + " layers)");
    return stack.layers[size_t(layer - 1)];
}

Mat drop_last_row(const Mat& w) {
    if (w.rows < 2) throw DimError("attention matrix needs at least 2 rows");
    Mat s(w.rows - 1, w.cols);
    std::memcpy(s.v.data(), w.v.data(), s.v.size() * sizeof(float));
    return s;
}

Mat drop_first_row(const Mat& w) {
    if (w.rows < 2) throw DimError("attention matrix needs at least 2 rows");
    Mat s(w.rows - 1, w.cols);
    std::memcpy(s.v.data(), w.v.data() + w.cols, s.v.size() * sizeof(float));
    return s;
}

}  // namespace

Mat scores_naive(const AttentionStack& stack, int layer) {
    return drop_last_row(layer_of(stack, layer));
}

Mat scores_shift(const AttentionStack& stack, int layer) {
    return drop_first_row(layer_of(stack, layer));
}

Mat scores_layer_avg(const AttentionStack& stack, bool shift) {
    if (stack.n_layers() < 1) throw UsageError("empty attention stack");
    Mat avg = stack.layers[0];
    for (int l = 1; l < stack.n_layers(); ++l)
        for (size_t i = 0; i < avg.v.size(); ++i) avg.v[i] += stack.layers[size_t(l)].v[i];
    for (auto& x : avg.v) x /= float(stack.n_layers());
    return shift ? drop_first_row(avg) : drop_last_row(avg);
}

AlignmentSet map_extract(const Mat& scores) {
    if (scores.rows < 1 || scores.cols < 1) throw UsageError("map_extract: empty score matrix");
    AlignmentSet a;
    for (int i = 0; i < scores.rows; ++i) {
        const float* row = scores.row(i);
        int best = 0;
        for (int j = 1; j < scores.cols; ++j)
            if (row[j] > row[best]) best = j;
        a.add_sure(best + 1, i + 1);
    }
    return a;
}

AlignmentSet induce(const AttentionStack& stack, InduceMethod method, int layer) {
    switch (method) {
        case InduceMethod::Naive:
            return map_extract(scores_naive(stack, layer));
        case InduceMethod::Shift:
            return map_extract(scores_shift(stack, layer));
        case InduceMethod::NaiveLayerAvg:
            return map_extract(scores_layer_avg(stack, false));
        case InduceMethod::ShiftLayerAvg:
            return map_extract(scores_layer_avg(stack, true));
    }
    throw UsageError("unreachable induction method");
}

}  // namespace alignlab

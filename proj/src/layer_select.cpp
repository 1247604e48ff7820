#include "alignlab/layer_select.hpp"

#include "alignlab/metrics.hpp"
#include "alignlab/symmetrize.hpp"

namespace alignlab {

std::vector<std::vector<AlignmentSet>> per_layer_alignments(const TransformerModel& model,
                                                            const std::vector<ParallelPair>& pairs,
                                                            InduceMethod method) {
    int n_layers = model.hp.layers;
    std::vector<std::vector<AlignmentSet>> out(static_cast<size_t>(n_layers));
    FwdOptions opt;
    for (auto& p : pairs) {
        auto r = forward_teacher_forced(model, p.src, p.tgt, opt);
        for (int l = 1; l <= n_layers; ++l)
            out[size_t(l - 1)].push_back(induce(r.attn, method, l));
    }
    return out;
}

LayerSelectResult select_layers(const TransformerModel& model_fwd,
                                const TransformerModel& model_rev,
                                const std::vector<ParallelPair>& pairs, InduceMethod method) {
    if (pairs.empty()) throw UsageError("select_layers: empty validation set");
    if (model_fwd.hp.src_vocab != model_rev.hp.tgt_vocab ||
        model_fwd.hp.tgt_vocab != model_rev.hp.src_vocab)
        throw UsageError("select_layers: models are not opposite directions of the same pair");
    int n_layers = model_fwd.hp.layers;
    if (model_rev.hp.layers != n_layers)
        throw UsageError("select_layers: layer count mismatch between directions");

    auto fwd = per_layer_alignments(model_fwd, pairs, method);
    std::vector<ParallelPair> rev_pairs;
    rev_pairs.reserve(pairs.size());
    for (auto& p : pairs) rev_pairs.push_back({p.tgt, p.src, std::nullopt});
    auto rev = per_layer_alignments(model_rev, rev_pairs, method);
    for (auto& layer : rev)
        for (auto& a : layer) a = transpose_alignment(a);

    LayerSelectResult res;
    res.agreement_aer = Mat(n_layers, n_layers);
    double best = 2.0;
    for (int i = 1; i <= n_layers; ++i)
        for (int j = 1; j <= n_layers; ++j) {
            AerCounts c;
            for (size_t k = 0; k < pairs.size(); ++k)
                c.add(fwd[size_t(i - 1)][k], rev[size_t(j - 1)][k]);
            double v = c.aer();
            res.agreement_aer.at(i - 1, j - 1) = float(v);
            if (v < best) {
                best = v;
                res.layer_fwd = i;
                res.layer_rev = j;
            }
        }
    return res;
}

}  // namespace alignlab

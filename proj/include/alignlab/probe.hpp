#pragma once

#include "alignlab/transformer.hpp"

namespace alignlab {

enum class ProbeKind { Naive, Linear, Mlp };
enum class ProbeMode { Input, Output };

ProbeKind parse_probe_kind(const std::string& s);
ProbeMode parse_probe_mode(const std::string& s);

/// Projection from decoder hidden states to the target embedding space:
/// identity (naive), affine map (linear) or a one-hidden-layer ReLU MLP
/// of width d_model (mlp).
struct Projection {
    ProbeKind kind = ProbeKind::Naive;
    TensorPtr w1, b1;  // linear: the affine map; mlp: first layer
    TensorPtr w2, b2;  // mlp only

    std::vector<TensorPtr> parameters() const;
    // Applies the projection to a batch of states (rows).
    Mat apply(const Mat& states) const;
    TensorPtr apply_graph(const TensorPtr& states) const;
};

struct ProbeFitConfig {
    int epochs = 30;
    int batch_rows = 256;
    float lr = 1e-3f;
    uint64_t seed = 1;
};

/// Fits the projection by MSE to target embeddings with Adam; naive needs
/// no fitting. Returns per-epoch mean squared error.
std::vector<double> fit_projection(Projection& proj, const Mat& states, const Mat& targets,
                                   const ProbeFitConfig& cfg);

Projection make_projection(ProbeKind kind, int d_model, Rng& rng);

/// Hidden states and per-position bookkeeping collected from teacher-forced
/// passes at one decoder layer. Position i (1-based, 1..|y|+1) has input
/// token y_{i-1} and output token y_i (y_0 = <bos>, y_{|y|+1} = <eos>).
struct ProbeDataset {
    Mat states;                 // one row per decoder position
    std::vector<int> sent;      // sentence index per row
    std::vector<int> pos;       // decoder position per row (1-based)
    std::vector<std::vector<int>> sent_tokens;  // per sentence: y_0..y_{|y|+1}
};

ProbeDataset collect_states(const TransformerModel& m, const std::vector<ParallelPair>& pairs,
                            int layer);

struct IdentifiabilityResult {
    double rate = 0.0;
    long correct = 0;
    long total = 0;
};

/// Fits the projection on ~90% of positions and reports the rate on the
/// held-out 10%: a position counts as correct when the nearest in-sentence
/// embedding (Euclidean, ties to the smallest position) sits at position
/// i-1 (input mode) or i (output mode).
IdentifiabilityResult identifiability_rate(const TransformerModel& m,
                                           const std::vector<ParallelPair>& pairs, int layer,
                                           ProbeMode mode, ProbeKind kind,
                                           const ProbeFitConfig& cfg);

}  // namespace alignlab

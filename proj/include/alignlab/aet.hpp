#pragma once

#include "alignlab/checkpoint.hpp"
#include "alignlab/corpus.hpp"
#include "alignlab/transformer.hpp"

namespace alignlab {

/// Alignment-Enhanced Transformer: a frozen base model plus a value-free
/// multi-head attention module (key/query projections only) attached at
/// decoder layer l_b. The module scores the current decoder input token
/// against the encoder outputs and never feeds the translation path.
struct AetModel {
    TransformerModel base;  // frozen
    int l_b = 0;            // 1-based attachment layer
    std::vector<TensorPtr> gq, gk;  // per head, d_model x d_k

    static AetModel init(TransformerModel base, int l_b, Rng& rng);
    std::vector<TensorPtr> module_parameters() const;
    size_t module_parameter_count() const;  // 2 * N * d_model * d_k
};

/// Row i is uniform over the sources aligned to target i, all-zero when
/// target i is unaligned.
Mat normalize_reference(const AlignmentSet& a, int tgt_len, int src_len);

/// Alignment scores for y_1..y_{|y|}: row i-1 comes from decoder position i
/// (the shift is built in); the <bos>-position output is discarded. Rows
/// are probability vectors.
Mat aet_forward(const AetModel& m, const std::vector<int>& src, const std::vector<int>& tgt);

/// Differentiable score graph from captured (constant) encoder outputs and
/// cross-attention query inputs; used by training and gradient checks.
TensorPtr aet_score_graph(const AetModel& m, const Mat& enc_out, const Mat& z_tilde);

/// L_a = -(1/|y|) sum_ij ref[i][j] * log S[i][j], S clamped at 1e-9.
TensorPtr aet_loss(const TensorPtr& scores, const Mat& ref);

struct AetTrainConfig {
    int max_updates = 2000;
    int batch_sentences = 16;
    float lr = 1e-4f;
    uint64_t seed = 1;
    std::ostream* log = nullptr;
    int log_every = 100;
};

struct AetTrainStats {
    std::vector<double> step_loss;
};

/// Trains only the module projections on (corpus, labels); the base stays
/// frozen (bit-identical parameters). Labels are symmetrized alignments
/// over the same corpus, one per pair.
AetTrainStats train_aet(AetModel& m, const std::vector<ParallelPair>& corpus,
                        const std::vector<AlignmentSet>& labels, const AetTrainConfig& cfg);

/// aet_forward then MAP extraction.
AlignmentSet induce_aet(const AetModel& m, const std::vector<int>& src,
                        const std::vector<int>& tgt);

// AET checkpoint = base checkpoint plus aet.* tensors and an l_b entry.
void save_aet(const AetModel& m, const std::string& path);
AetModel load_aet(const std::string& path);
bool checkpoint_is_aet(const std::string& path);

}  // namespace alignlab

#pragma once

#include <string>
#include <vector>

#include "alignlab/corpus.hpp"
#include "alignlab/tensor.hpp"

namespace alignlab {

struct Hyper {
    int layers = 4;       // encoder and decoder depth
    int heads = 4;
    int d_model = 64;
    int d_ff = 256;
    float dropout = 0.1f;
    int src_vocab = 0;
    int tgt_vocab = 0;
    int max_positions = 512;

    int d_k() const { return d_model / heads; }
    void validate() const;
};

/// Per-layer head-averaged cross-attention captured during a decoder pass,
/// plus (optionally) the cross-attention query inputs and layer outputs for
/// probing. layers[l] has shape (decoder positions) x |x|.
struct AttentionStack {
    std::vector<Mat> layers;    // W^l, head-averaged post-softmax weights
    std::vector<Mat> z;         // decoder layer outputs, one Mat per layer
    std::vector<Mat> z_tilde;   // cross-attention query inputs per layer
    int n_layers() const { return int(layers.size()); }
};

struct LinearP {
    TensorPtr w, b;
};
struct LayerNormP {
    TensorPtr g, b;
};
struct AttnP {
    LinearP q, k, v, o;
};
struct EncLayerP {
    LayerNormP ln1, ln2;
    AttnP self;
    LinearP ff1, ff2;
};
struct DecLayerP {
    LayerNormP ln1, ln2, ln3;
    AttnP self, cross;
    LinearP ff1, ff2;
};

/// Pre-norm encoder-decoder Transformer with sinusoidal positional
/// encodings and a head-averaged cross-attention capture path.
struct TransformerModel {
    Hyper hp;
    TensorPtr src_emb, tgt_emb;  // vocab x d_model
    LinearP out_proj;            // d_model x vocab
    std::vector<EncLayerP> enc;
    std::vector<DecLayerP> dec;
    LayerNormP enc_ln, dec_ln;

    static TransformerModel init(const Hyper& hp, Rng& rng);

    // Stable name -> tensor enumeration; checkpoint and optimizer order.
    std::vector<std::pair<std::string, TensorPtr>> named_parameters() const;
    std::vector<TensorPtr> parameters() const;
    size_t parameter_count() const;
    void set_requires_grad(bool on);
};

struct FwdOptions {
    bool training = false;       // dropout active
    Rng* rng = nullptr;          // required when training
    bool capture_attention = true;
    bool capture_states = false; // fill AttentionStack::z / z_tilde
};

/// Encoder outputs h, |x| x d_model (after the final encoder norm).
TensorPtr encode(const TransformerModel& m, const std::vector<int>& src, const FwdOptions& opt);

struct TeacherForcedResult {
    TensorPtr logits;  // (|y|+1) x V; row i predicts y_i (y_{|y|+1} = <eos>)
    AttentionStack attn;
    TensorPtr enc_out;  // kept for reuse by callers
};

/// Decoder inputs are <bos>, y_1..y_{|y|}; outputs y_1..y_{|y|}, <eos>.
TeacherForcedResult forward_teacher_forced(const TransformerModel& m, const std::vector<int>& src,
                                           const std::vector<int>& tgt, const FwdOptions& opt);

struct DecodeResult {
    std::vector<int> tokens;  // emitted target ids, <eos> stripped
    AttentionStack attn;      // one row per emitted step
};

DecodeResult greedy_decode(const TransformerModel& m, const std::vector<int>& src, int max_len);

/// Logits for the token following `prefix` (possibly empty), eval mode.
std::vector<float> next_token_logits(const TransformerModel& m, const TensorPtr& enc_out,
                                     const std::vector<int>& prefix);

struct TrainConfig {
    int epochs = 10;
    int batch_tokens = 1000;
    float lr = 5e-4f;
    int warmup_steps = 400;
    float label_smoothing = 0.1f;
    float clip_norm = 1.0f;  // 0 disables
    uint64_t seed = 1;
    std::string checkpoint_dir;  // empty: no checkpoints written
    const std::vector<ParallelPair>* validation = nullptr;
    int log_every = 50;
    std::ostream* log = nullptr;
};

struct TrainStats {
    std::vector<double> step_loss;        // per-step mean NLL
    std::vector<double> epoch_train_loss; // per-epoch mean
    std::vector<double> epoch_valid_loss; // empty when no validation set
};

/// Teacher-forced training with token-count batching, inverse-sqrt warmup
/// and per-epoch checkpoints. Aborts with NumericError on divergence.
TrainStats train(TransformerModel& m, const std::vector<ParallelPair>& corpus,
                 const TrainConfig& cfg);

/// Mean per-token NLL (no label smoothing) over a corpus, eval mode.
double validation_loss(const TransformerModel& m, const std::vector<ParallelPair>& pairs);

// Inverse-sqrt schedule with linear warmup; equals lr at step == warmup.
float lr_at_step(float lr, int warmup, long step);

}  // namespace alignlab

#include "alignlab/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>

#include "alignlab/checkpoint.hpp"

namespace alignlab {

void Hyper::validate() const {
    if (layers < 1 || heads < 1 || d_model < 1 || d_ff < 1)
        throw UsageError("hyper: layer/head/width counts must be positive");
    if (d_model % heads != 0) throw UsageError("hyper: d_model must be divisible by heads");
    if (src_vocab < 5 || tgt_vocab < 5) throw UsageError("hyper: vocab sizes not set");
    if (dropout < 0.f || dropout >= 1.f) throw UsageError("hyper: dropout must be in [0, 1)");
}

namespace {

TensorPtr xavier(int rows, int cols, Rng& rng) {
    float lim = std::sqrt(6.f / float(rows + cols));
    auto t = Tensor::create({rows, cols}, true);
    for (auto& x : t->data) x = float((rng.uniform() * 2.0 - 1.0) * lim);
    return t;
}

LinearP make_linear(int in, int out, Rng& rng) {
    LinearP p;
    p.w = xavier(in, out, rng);
    p.b = Tensor::create({out}, true);
    return p;
}

LayerNormP make_ln(int d) {
    LayerNormP p;
    p.g = Tensor::create({d}, true);
    std::fill(p.g->data.begin(), p.g->data.end(), 1.f);
    p.b = Tensor::create({d}, true);
    return p;
}

AttnP make_attn(int d, Rng& rng) {
    AttnP p;
    p.q = make_linear(d, d, rng);
    p.k = make_linear(d, d, rng);
    p.v = make_linear(d, d, rng);
    p.o = make_linear(d, d, rng);
    return p;
}

TensorPtr linear(const TensorPtr& x, const LinearP& p) {
    return ops::add_rowvec(ops::matmul(x, p.w), p.b);
}

TensorPtr ln(const TensorPtr& x, const LayerNormP& p) {
    return ops::layer_norm_rows(x, p.g, p.b);
}

TensorPtr ffn(const TensorPtr& x, const LinearP& a, const LinearP& b) {
    return linear(ops::relu(linear(x, a)), b);
}

TensorPtr maybe_dropout(const TensorPtr& x, const FwdOptions& opt, float rate) {
    if (!opt.training || rate == 0.f) return x;
    if (!opt.rng) throw UsageError("training forward pass needs an rng");
    return ops::dropout(x, rate, *opt.rng);
}

/// Multi-head attention; when capture != nullptr, stores the head-averaged
/// post-softmax weights.
TensorPtr multihead(const AttnP& p, const TensorPtr& q_in, const TensorPtr& kv_in, int heads,
                    bool causal, Mat* capture) {
    int d = q_in->dim(1);
    int dk = d / heads;
    auto q = linear(q_in, p.q);
    auto k = linear(kv_in, p.k);
    auto v = linear(kv_in, p.v);
    float inv_sqrt = 1.f / std::sqrt(float(dk));
    std::vector<TensorPtr> outs;
    if (capture) *capture = Mat(q_in->dim(0), kv_in->dim(0));
    for (int n = 0; n < heads; ++n) {
        auto qn = ops::slice_cols(q, n * dk, (n + 1) * dk);
        auto kn = ops::slice_cols(k, n * dk, (n + 1) * dk);
        auto vn = ops::slice_cols(v, n * dk, (n + 1) * dk);
        auto scores = ops::scale(ops::matmul_nt(qn, kn), inv_sqrt);
        auto attn = ops::softmax_rows(scores, causal);
        if (capture)
            for (size_t i = 0; i < capture->v.size(); ++i) capture->v[i] += attn->data[i];
        outs.push_back(ops::matmul(attn, vn));
    }
    if (capture)
        for (auto& x : capture->v) x /= float(heads);
    return linear(ops::concat_cols(outs), p.o);
}

TensorPtr positional_encoding(int len, int d) {
    auto pe = Tensor::create({len, d});
    for (int pos = 0; pos < len; ++pos)
        for (int i = 0; i < d; ++i) {
            double angle = pos / std::pow(10000.0, double(2 * (i / 2)) / d);
            pe->data[size_t(pos) * d + i] = float(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    return pe;
}

TensorPtr embed(const TensorPtr& table, const std::vector<int>& ids, int d,
                const FwdOptions& opt, float dropout_rate) {
    auto e = ops::scale(ops::embedding(table, ids), std::sqrt(float(d)));
    e = ops::add(e, positional_encoding(int(ids.size()), d));
    return maybe_dropout(e, opt, dropout_rate);
}

Mat tensor_to_mat(const TensorPtr& t) {
    Mat m(t->dim(0), t->dim(1));
    m.v = t->data;
    return m;
}

}  // namespace

TransformerModel TransformerModel::init(const Hyper& hp, Rng& rng) {
    hp.validate();
    TransformerModel m;
    m.hp = hp;
    int d = hp.d_model;
    m.src_emb = Tensor::create({hp.src_vocab, d}, true);
    m.tgt_emb = Tensor::create({hp.tgt_vocab, d}, true);
    float emb_std = 1.f / std::sqrt(float(d));
    for (auto& x : m.src_emb->data) x = float(rng.normal()) * emb_std;
    for (auto& x : m.tgt_emb->data) x = float(rng.normal()) * emb_std;
    m.out_proj = make_linear(d, hp.tgt_vocab, rng);
    for (int l = 0; l < hp.layers; ++l) {
        EncLayerP e;
        e.ln1 = make_ln(d);
        e.ln2 = make_ln(d);
        e.self = make_attn(d, rng);
        e.ff1 = make_linear(d, hp.d_ff, rng);
        e.ff2 = make_linear(hp.d_ff, d, rng);
        m.enc.push_back(std::move(e));
        DecLayerP dl;
        dl.ln1 = make_ln(d);
        dl.ln2 = make_ln(d);
        dl.ln3 = make_ln(d);
        dl.self = make_attn(d, rng);
        dl.cross = make_attn(d, rng);
        dl.ff1 = make_linear(d, hp.d_ff, rng);
        dl.ff2 = make_linear(hp.d_ff, d, rng);
        m.dec.push_back(std::move(dl));
    }
    m.enc_ln = make_ln(d);
    m.dec_ln = make_ln(d);
    return m;
}

std::vector<std::pair<std::string, TensorPtr>> TransformerModel::named_parameters() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    auto lin = [&](const std::string& n, const LinearP& p) {
        out.push_back({n + ".w", p.w});
        out.push_back({n + ".b", p.b});
    };
    auto lnp = [&](const std::string& n, const LayerNormP& p) {
        out.push_back({n + ".g", p.g});
        out.push_back({n + ".b", p.b});
    };
    auto att = [&](const std::string& n, const AttnP& p) {
        lin(n + ".q", p.q);
        lin(n + ".k", p.k);
        lin(n + ".v", p.v);
        lin(n + ".o", p.o);
    };
    out.push_back({"src_emb", src_emb});
    out.push_back({"tgt_emb", tgt_emb});
    lin("out_proj", out_proj);
    for (size_t l = 0; l < enc.size(); ++l) {
        std::string p = "enc." + std::to_string(l);
        lnp(p + ".ln1", enc[l].ln1);
        lnp(p + ".ln2", enc[l].ln2);
        att(p + ".self", enc[l].self);
        lin(p + ".ff1", enc[l].ff1);
        lin(p + ".ff2", enc[l].ff2);
    }
    for (size_t l = 0; l < dec.size(); ++l) {
        std::string p = "dec." + std::to_string(l);
        lnp(p + ".ln1", dec[l].ln1);
        lnp(p + ".ln2", dec[l].ln2);
        lnp(p + ".ln3", dec[l].ln3);
        att(p + ".self", dec[l].self);
        att(p + ".cross", dec[l].cross);
        lin(p + ".ff1", dec[l].ff1);
        lin(p + ".ff2", dec[l].ff2);
    }
    lnp("enc_ln", enc_ln);
    lnp("dec_ln", dec_ln);
    return out;
}

std::vector<TensorPtr> TransformerModel::parameters() const {
    std::vector<TensorPtr> out;
    for (auto& [n, t] : named_parameters()) out.push_back(t);
    return out;
}

size_t TransformerModel::parameter_count() const {
    size_t n = 0;
    for (auto& p : parameters()) n += p->numel();
    return n;
}

void TransformerModel::set_requires_grad(bool on) {
    for (auto& p : parameters()) p->requires_grad = on;
}

TensorPtr encode(const TransformerModel& m, const std::vector<int>& src, const FwdOptions& opt) {
    if (src.empty()) throw UsageError("encode: empty source");
    float dr = m.hp.dropout;
    auto x = embed(m.src_emb, src, m.hp.d_model, opt, dr);
    for (auto& layer : m.enc) {
        auto n1 = ln(x, layer.ln1);
        x = ops::add(x, maybe_dropout(multihead(layer.self, n1, n1, m.hp.heads, false, nullptr),
                                      opt, dr));
        x = ops::add(x, maybe_dropout(ffn(ln(x, layer.ln2), layer.ff1, layer.ff2), opt, dr));
    }
    return ln(x, m.enc_ln);
}

namespace {

/// Decoder pass over input ids <bos>, y_1..y_T. Fills the attention stack
/// and returns logits for every position.
TensorPtr decoder_pass(const TransformerModel& m, const TensorPtr& enc_out,
                       const std::vector<int>& dec_in, const FwdOptions& opt,
                       AttentionStack* stack) {
    float dr = m.hp.dropout;
    auto x = embed(m.tgt_emb, dec_in, m.hp.d_model, opt, dr);
    if (stack) {
        stack->layers.clear();
        stack->z.clear();
        stack->z_tilde.clear();
        stack->layers.resize(m.dec.size());
    }
    for (size_t l = 0; l < m.dec.size(); ++l) {
        auto& layer = m.dec[l];
        auto n1 = ln(x, layer.ln1);
        x = ops::add(
            x, maybe_dropout(multihead(layer.self, n1, n1, m.hp.heads, true, nullptr), opt, dr));
        auto zt = ln(x, layer.ln2);
        Mat* cap = (stack && opt.capture_attention) ? &stack->layers[l] : nullptr;
        x = ops::add(x,
                     maybe_dropout(multihead(layer.cross, zt, enc_out, m.hp.heads, false, cap),
                                   opt, dr));
        x = ops::add(x, maybe_dropout(ffn(ln(x, layer.ln3), layer.ff1, layer.ff2), opt, dr));
        if (stack && opt.capture_states) {
            stack->z_tilde.push_back(tensor_to_mat(zt));
            stack->z.push_back(tensor_to_mat(x));
        }
    }
    return linear(ln(x, m.dec_ln), m.out_proj);
}

}  // namespace

TeacherForcedResult forward_teacher_forced(const TransformerModel& m, const std::vector<int>& src,
                                           const std::vector<int>& tgt, const FwdOptions& opt) {
    if (src.empty() || tgt.empty()) throw UsageError("teacher-forced pass: empty sentence");
    TeacherForcedResult r;
    r.enc_out = encode(m, src, opt);
    std::vector<int> dec_in;
    dec_in.reserve(tgt.size() + 1);
    dec_in.push_back(kBos);
    dec_in.insert(dec_in.end(), tgt.begin(), tgt.end());
    r.logits = decoder_pass(m, r.enc_out, dec_in, opt, &r.attn);
    return r;
}

DecodeResult greedy_decode(const TransformerModel& m, const std::vector<int>& src, int max_len) {
    if (max_len < 1) throw UsageError("greedy_decode: max_len must be >= 1");
    FwdOptions opt;
    opt.training = false;
    DecodeResult r;
    auto enc_out = encode(m, src, opt);
    r.attn.layers.resize(m.dec.size());
    for (auto& w : r.attn.layers) w = Mat(0, int(src.size()));
    std::vector<int> dec_in = {kBos};
    for (int step = 0; step < max_len; ++step) {
        AttentionStack stack;
        auto logits = decoder_pass(m, enc_out, dec_in, opt, &stack);
        int t_len = logits->dim(0), v = logits->dim(1);
        const float* row = logits->data.data() + size_t(t_len - 1) * v;
        int best = 0;
        for (int j = 1; j < v; ++j)
            if (row[j] > row[best]) best = j;
        // append the attention row for this emitted step
        for (size_t l = 0; l < stack.layers.size(); ++l) {
            auto& w = r.attn.layers[l];
            w.rows += 1;
            const float* last = stack.layers[l].row(stack.layers[l].rows - 1);
            w.v.insert(w.v.end(), last, last + w.cols);
        }
        if (best == kEos) break;
        r.tokens.push_back(best);
        dec_in.push_back(best);
    }
    return r;
}

std::vector<float> next_token_logits(const TransformerModel& m, const TensorPtr& enc_out,
                                     const std::vector<int>& prefix) {
    FwdOptions opt;
    opt.capture_attention = false;
    std::vector<int> dec_in = {kBos};
    dec_in.insert(dec_in.end(), prefix.begin(), prefix.end());
    auto logits = decoder_pass(m, enc_out, dec_in, opt, nullptr);
    int t_len = logits->dim(0), v = logits->dim(1);
    const float* row = logits->data.data() + size_t(t_len - 1) * v;
    return std::vector<float>(row, row + v);
}

float lr_at_step(float lr, int warmup, long step) {
    if (warmup <= 0) return lr;
    double s = double(step);
    double w = double(warmup);
    return float(lr * std::min(s / w, std::sqrt(w / s)));
}

double validation_loss(const TransformerModel& m, const std::vector<ParallelPair>& pairs) {
    FwdOptions opt;
    opt.capture_attention = false;
    double total = 0.0;
    long tokens = 0;
    for (auto& p : pairs) {
        auto r = forward_teacher_forced(m, p.src, p.tgt, opt);
        std::vector<int> targets(p.tgt.begin(), p.tgt.end());
        targets.push_back(kEos);
        auto loss = ops::cross_entropy(r.logits, targets, 0.f);
        total += double(loss->data[0]) * double(targets.size());
        tokens += long(targets.size());
    }
    return tokens ? total / double(tokens) : 0.0;
}

TrainStats train(TransformerModel& m, const std::vector<ParallelPair>& corpus,
                 const TrainConfig& cfg) {
    if (corpus.empty()) throw UsageError("train: empty corpus");
    TrainStats stats;
    auto params = m.parameters();
    AdamState adam;
    adam.alpha = cfg.lr;
    adam.beta1 = 0.9f;
    adam.beta2 = 0.98f;
    adam.eps = 1e-9f;
    Rng shuffle_rng(cfg.seed);
    Rng dropout_rng(cfg.seed ^ 0x5bf03635ull);
    FwdOptions opt;
    opt.training = true;
    opt.rng = &dropout_rng;
    opt.capture_attention = false;
    long step = 0;
    if (!cfg.checkpoint_dir.empty())
        std::filesystem::create_directories(cfg.checkpoint_dir);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<size_t> idx(corpus.size());
        std::iota(idx.begin(), idx.end(), size_t(0));
        shuffle_rng.shuffle(idx);
        double epoch_nll = 0.0;
        long epoch_tokens = 0;
        size_t pos = 0;
        while (pos < idx.size()) {
            // batch by token count
            std::vector<size_t> batch;
            long batch_tokens = 0;
            while (pos < idx.size()) {
                const auto& p = corpus[idx[pos]];
                long t = long(p.src.size() + p.tgt.size() + 1);
                if (!batch.empty() && batch_tokens + t > cfg.batch_tokens) break;
                batch.push_back(idx[pos]);
                batch_tokens += t;
                ++pos;
            }
            for (auto& p : params) p->zero_grad();
            double batch_nll = 0.0;
            long out_tokens = 0;
            for (size_t bi : batch) {
                const auto& p = corpus[bi];
                auto r = forward_teacher_forced(m, p.src, p.tgt, opt);
                std::vector<int> targets(p.tgt.begin(), p.tgt.end());
                targets.push_back(kEos);
                auto loss_mean = ops::cross_entropy(r.logits, targets, cfg.label_smoothing);
                auto loss_sum = ops::scale(loss_mean, float(targets.size()));
                batch_nll += double(loss_sum->data[0]);
                out_tokens += long(targets.size());
                backward(loss_sum);
            }
            if (!std::isfinite(batch_nll))
                throw NumericError("training diverged: non-finite loss at step " +
                                   std::to_string(step + 1));
            float inv = 1.f / float(out_tokens);
            for (auto& p : params)
                for (auto& g : p->grad) g *= inv;
            if (cfg.clip_norm > 0.f) {
                double sq = 0.0;
                for (auto& p : params)
                    for (float g : p->grad) sq += double(g) * g;
                double norm = std::sqrt(sq);
                if (norm > cfg.clip_norm) {
                    float s = float(cfg.clip_norm / norm);
                    for (auto& p : params)
                        for (auto& g : p->grad) g *= s;
                }
            }
            ++step;
            adam_step(params, adam, lr_at_step(cfg.lr, cfg.warmup_steps, step));
            double step_loss = batch_nll / double(out_tokens);
            stats.step_loss.push_back(step_loss);
            epoch_nll += batch_nll;
            epoch_tokens += out_tokens;
            if (cfg.log && cfg.log_every > 0 && step % cfg.log_every == 0)
                *cfg.log << "step " << step << " loss " << step_loss << "\n";
        }
        stats.epoch_train_loss.push_back(epoch_nll / double(epoch_tokens));
        if (cfg.validation) {
            double vl = validation_loss(m, *cfg.validation);
            stats.epoch_valid_loss.push_back(vl);
            if (cfg.log)
                *cfg.log << "epoch " << epoch << " train_loss " << stats.epoch_train_loss.back()
                         << " valid_loss " << vl << "\n";
        } else if (cfg.log) {
            *cfg.log << "epoch " << epoch << " train_loss " << stats.epoch_train_loss.back()
                     << "\n";
        }
        if (!cfg.checkpoint_dir.empty())
            save_model(m, cfg.checkpoint_dir + "/ckpt-epoch-" + std::to_string(epoch) + ".bin");
    }
    if (!cfg.checkpoint_dir.empty()) save_model(m, cfg.checkpoint_dir + "/ckpt-last.bin");
    return stats;
}

}  // namespace alignlab

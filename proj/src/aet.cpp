#include "alignlab/aet.hpp"

#include <cmath>
#include <numeric>

#include "alignlab/induction.hpp"

namespace alignlab {

AetModel AetModel::init(TransformerModel base, int l_b, Rng& rng) {
    if (l_b < 1 || l_b > base.hp.layers) throw UsageError("aet: l_b out of range");
    AetModel m;
    m.base = std::move(base);
    m.base.set_requires_grad(false);
    m.l_b = l_b;
    int d = m.base.hp.d_model, dk = m.base.hp.d_k();
    float lim = std::sqrt(6.f / float(d + dk));
    for (int n = 0; n < m.base.hp.heads; ++n) {
        for (auto* dst : {&m.gq, &m.gk}) {
            auto t = Tensor::create({d, dk}, true);
            for (auto& x : t->data) x = float((rng.uniform() * 2.0 - 1.0) * lim);
            dst->push_back(t);
        }
    }
    return m;
}

std::vector<TensorPtr> AetModel::module_parameters() const {
    std::vector<TensorPtr> out;
    for (auto& t : gq) out.push_back(t);
    for (auto& t : gk) out.push_back(t);
    return out;
}

size_t AetModel::module_parameter_count() const {
    size_t n = 0;
    for (auto& t : module_parameters()) n += t->numel();
    return n;
}

Mat normalize_reference(const AlignmentSet& a, int tgt_len, int src_len) {
    Mat ref(tgt_len, src_len);
    std::vector<int> fanout(size_t(tgt_len), 0);
    for (auto& [s, t] : a.sure) {
        if (s < 1 || s > src_len || t < 1 || t > tgt_len)
            throw IndexError("normalize_reference: link out of bounds");
        ++fanout[size_t(t - 1)];
    }
    for (auto& [s, t] : a.sure)
        ref.at(t - 1, s - 1) = 1.f / float(fanout[size_t(t - 1)]);
    return ref;
}

TensorPtr aet_score_graph(const AetModel& m, const Mat& enc_out, const Mat& z_tilde) {
    int heads = m.base.hp.heads, dk = m.base.hp.d_k();
    auto h = Tensor::from_data({enc_out.rows, enc_out.cols}, enc_out.v);
    auto z = Tensor::from_data({z_tilde.rows, z_tilde.cols}, z_tilde.v);
    float inv_sqrt = 1.f / std::sqrt(float(dk));
    std::vector<TensorPtr> per_head;
    for (int n = 0; n < heads; ++n) {
        auto q = ops::matmul(z, m.gq[size_t(n)]);  // |y| x dk
        auto k = ops::matmul(h, m.gk[size_t(n)]);  // |x| x dk
        auto scores = ops::scale(ops::matmul_nt(q, k), inv_sqrt);
        per_head.push_back(ops::softmax_rows(scores, false));
    }
    return ops::mean_of(per_head);
}

namespace {

/// Captures encoder outputs and the layer-l_b cross-attention query inputs
/// for decoder positions 2..|y|+1 (input tokens y_1..y_{|y|}).
void capture_base(const AetModel& m, const std::vector<int>& src, const std::vector<int>& tgt,
                  Mat& enc_out, Mat& z_tilde) {
    FwdOptions opt;
    opt.capture_attention = false;
    opt.capture_states = true;
    auto r = forward_teacher_forced(m.base, src, tgt, opt);
    enc_out = Mat(r.enc_out->dim(0), r.enc_out->dim(1));
    enc_out.v = r.enc_out->data;
    const Mat& zt = r.attn.z_tilde[size_t(m.l_b - 1)];
    int y_len = int(tgt.size());
    z_tilde = Mat(y_len, zt.cols);
    // rows 2..|y|+1 (1-based) of the decoder positions
    std::copy(zt.v.begin() + zt.cols, zt.v.begin() + size_t(y_len + 1) * zt.cols,
              z_tilde.v.begin());
}

}  // namespace

Mat aet_forward(const AetModel& m, const std::vector<int>& src, const std::vector<int>& tgt) {
    if (m.l_b < 1 || m.l_b > m.base.hp.layers) throw UsageError("aet_forward: l_b out of range");
    Mat enc_out, z_tilde;
    capture_base(m, src, tgt, enc_out, z_tilde);
    auto s = aet_score_graph(m, enc_out, z_tilde);
    Mat out(s->dim(0), s->dim(1));
    out.v = s->data;
    return out;
}

TensorPtr aet_loss(const TensorPtr& scores, const Mat& ref) {
    if (scores->dim(0) != ref.rows || scores->dim(1) != ref.cols)
        throw DimError("aet_loss: score/reference shape mismatch");
    return ops::weighted_neg_log(scores, ref, 1.f / float(ref.rows));
}

AetTrainStats train_aet(AetModel& m, const std::vector<ParallelPair>& corpus,
                        const std::vector<AlignmentSet>& labels, const AetTrainConfig& cfg) {
    if (corpus.size() != labels.size())
        throw UsageError("train_aet: corpus/label count mismatch");
    if (corpus.empty()) throw UsageError("train_aet: empty corpus");
    AetTrainStats stats;
    auto params = m.module_parameters();
    AdamState adam;
    adam.alpha = cfg.lr;
    Rng rng(cfg.seed);
    std::vector<size_t> idx(corpus.size());
    std::iota(idx.begin(), idx.end(), size_t(0));
    size_t pos = idx.size();  // force initial shuffle
    for (int step = 1; step <= cfg.max_updates; ++step) {
        for (auto& p : params) p->zero_grad();
        double batch_loss = 0.0;
        int used = 0;
        for (int b = 0; b < cfg.batch_sentences; ++b) {
            if (pos >= idx.size()) {
                rng.shuffle(idx);
                pos = 0;
            }
            const auto& pair = corpus[idx[pos]];
            const auto& label = labels[idx[pos]];
            ++pos;
            Mat enc_out, z_tilde;
            capture_base(m, pair.src, pair.tgt, enc_out, z_tilde);
            auto s = aet_score_graph(m, enc_out, z_tilde);
            auto ref = normalize_reference(label, int(pair.tgt.size()), int(pair.src.size()));
            auto loss = aet_loss(s, ref);
            batch_loss += double(loss->data[0]);
            backward(loss);
            ++used;
        }
        if (!std::isfinite(batch_loss))
            throw NumericError("aet training diverged at step " + std::to_string(step));
        float inv = 1.f / float(used);
        for (auto& p : params)
            for (auto& g : p->grad) g *= inv;
        adam_step(params, adam);
        stats.step_loss.push_back(batch_loss / double(used));
        if (cfg.log && cfg.log_every > 0 && step % cfg.log_every == 0)
            *cfg.log << "aet step " << step << " loss " << stats.step_loss.back() << "\n";
    }
    return stats;
}

AlignmentSet induce_aet(const AetModel& m, const std::vector<int>& src,
                        const std::vector<int>& tgt) {
    return map_extract(aet_forward(m, src, tgt));
}

void save_aet(const AetModel& m, const std::string& path) {
    auto ckpt = model_to_checkpoint(m.base);
    ckpt.hyper["l_b"] = std::to_string(m.l_b);
    for (size_t n = 0; n < m.gq.size(); ++n) {
        ckpt.tensors.push_back({"aet.gq." + std::to_string(n), m.gq[n]->shape, m.gq[n]->data});
        ckpt.tensors.push_back({"aet.gk." + std::to_string(n), m.gk[n]->shape, m.gk[n]->data});
    }
    write_checkpoint_raw(ckpt, path);
}

AetModel load_aet(const std::string& path) {
    auto ckpt = read_checkpoint_raw(path);
    if (!ckpt.hyper.count("l_b")) throw FormatError(path + ": not an AET checkpoint (no l_b)");
    AetModel m;
    m.base = model_from_checkpoint(ckpt);
    m.base.set_requires_grad(false);
    m.l_b = std::stoi(ckpt.hyper.at("l_b"));
    int d = m.base.hp.d_model, dk = m.base.hp.d_k();
    for (int n = 0; n < m.base.hp.heads; ++n) {
        const auto* q = ckpt.find("aet.gq." + std::to_string(n));
        const auto* k = ckpt.find("aet.gk." + std::to_string(n));
        if (!q || !k) throw FormatError(path + ": missing aet projection tensors");
        m.gq.push_back(Tensor::from_data({d, dk}, *q, true));
        m.gk.push_back(Tensor::from_data({d, dk}, *k, true));
    }
    return m;
}

bool checkpoint_is_aet(const std::string& path) {
    auto ckpt = read_checkpoint_raw(path);
    return ckpt.hyper.count("l_b") > 0;
}

}  // namespace alignlab

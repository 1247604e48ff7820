#include "alignlab/probe.hpp"

#include <cmath>
#include <numeric>

namespace alignlab {

ProbeKind parse_probe_kind(const std::string& s) {
    if (s == "naive") return ProbeKind::Naive;
    if (s == "linear") return ProbeKind::Linear;
    if (s == "mlp") return ProbeKind::Mlp;
    throw UsageError("unknown probe kind: " + s);
}

ProbeMode parse_probe_mode(const std::string& s) {
    if (s == "input") return ProbeMode::Input;
    if (s == "output") return ProbeMode::Output;
    throw UsageError("unknown probe mode: " + s);
}

std::vector<TensorPtr> Projection::parameters() const {
    switch (kind) {
        case ProbeKind::Naive:
            return {};
        case ProbeKind::Linear:
            return {w1, b1};
        case ProbeKind::Mlp:
            return {w1, b1, w2, b2};
    }
    return {};
}

TensorPtr Projection::apply_graph(const TensorPtr& states) const {
    switch (kind) {
        case ProbeKind::Naive:
            return states;
        case ProbeKind::Linear:
            return ops::add_rowvec(ops::matmul(states, w1), b1);
        case ProbeKind::Mlp: {
            auto h = ops::relu(ops::add_rowvec(ops::matmul(states, w1), b1));
            return ops::add_rowvec(ops::matmul(h, w2), b2);
        }
    }
    throw UsageError("unreachable probe kind");
}

Mat Projection::apply(const Mat& states) const {
    auto x = Tensor::from_data({states.rows, states.cols}, states.v);
    auto y = apply_graph(x);
    Mat out(y->dim(0), y->dim(1));
    out.v = y->data;
    return out;
}

Projection make_projection(ProbeKind kind, int d_model, Rng& rng) {
    Projection p;
    p.kind = kind;
    if (kind == ProbeKind::Naive) return p;
    auto xavier = [&](int r, int c) {
        float lim = std::sqrt(6.f / float(r + c));
        auto t = Tensor::create({r, c}, true);
        for (auto& x : t->data) x = float((rng.uniform() * 2.0 - 1.0) * lim);
        return t;
    };
    p.w1 = xavier(d_model, d_model);
    p.b1 = Tensor::create({d_model}, true);
    if (kind == ProbeKind::Mlp) {
        p.w2 = xavier(d_model, d_model);
        p.b2 = Tensor::create({d_model}, true);
    }
    return p;
}

std::vector<double> fit_projection(Projection& proj, const Mat& states, const Mat& targets,
                                   const ProbeFitConfig& cfg) {
    if (states.rows == 0) throw UsageError("fit_projection: empty data");
    if (states.rows != targets.rows) throw UsageError("fit_projection: state/target mismatch");
    std::vector<double> epoch_mse;
    if (proj.kind == ProbeKind::Naive) return epoch_mse;  // identity, no parameters
    auto params = proj.parameters();
    AdamState adam;
    adam.alpha = cfg.lr;
    Rng rng(cfg.seed);
    std::vector<size_t> idx(size_t(states.rows));
    std::iota(idx.begin(), idx.end(), size_t(0));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(idx);
        double total = 0.0;
        long batches = 0;
        for (size_t pos = 0; pos < idx.size(); pos += size_t(cfg.batch_rows)) {
            size_t end = std::min(idx.size(), pos + size_t(cfg.batch_rows));
            int n = int(end - pos);
            Mat xs(n, states.cols), ts(n, targets.cols);
            for (int i = 0; i < n; ++i) {
                size_t r = idx[pos + size_t(i)];
                std::copy(states.row(int(r)), states.row(int(r)) + states.cols, xs.row(i));
                std::copy(targets.row(int(r)), targets.row(int(r)) + targets.cols, ts.row(i));
            }
            auto x = Tensor::from_data({n, states.cols}, xs.v);
            auto loss = ops::mse_to(proj.apply_graph(x), ts);
            for (auto& p : params) p->zero_grad();
            backward(loss);
            adam_step(params, adam);
            total += double(loss->data[0]);
            ++batches;
        }
        epoch_mse.push_back(total / double(batches));
    }
    return epoch_mse;
}

ProbeDataset collect_states(const TransformerModel& m, const std::vector<ParallelPair>& pairs,
                            int layer) {
    if (layer < 1 || layer > m.hp.layers) throw UsageError("collect_states: layer out of range");
    ProbeDataset ds;
    ds.states = Mat(0, m.hp.d_model);
    FwdOptions opt;
    opt.capture_attention = false;
    opt.capture_states = true;
    for (size_t si = 0; si < pairs.size(); ++si) {
        const auto& p = pairs[si];
        auto r = forward_teacher_forced(m, p.src, p.tgt, opt);
        const Mat& z = r.attn.z[size_t(layer - 1)];
        std::vector<int> toks;
        toks.push_back(kBos);
        toks.insert(toks.end(), p.tgt.begin(), p.tgt.end());
        toks.push_back(kEos);
        ds.sent_tokens.push_back(toks);
        for (int i = 0; i < z.rows; ++i) {
            ds.states.rows += 1;
            ds.states.v.insert(ds.states.v.end(), z.row(i), z.row(i) + z.cols);
            ds.sent.push_back(int(si));
            ds.pos.push_back(i + 1);
        }
    }
    return ds;
}

namespace {

const float* embedding_row(const TransformerModel& m, int token) {
    return m.tgt_emb->data.data() + size_t(token) * m.hp.d_model;
}

}  // namespace

IdentifiabilityResult identifiability_rate(const TransformerModel& m,
                                           const std::vector<ParallelPair>& pairs, int layer,
                                           ProbeMode mode, ProbeKind kind,
                                           const ProbeFitConfig& cfg) {
    auto ds = collect_states(m, pairs, layer);
    if (ds.states.rows == 0) throw UsageError("identifiability_rate: no positions collected");
    int d = m.hp.d_model;
    // 90/10 fit/report split over positions
    std::vector<int> fit_rows, eval_rows;
    for (int r = 0; r < ds.states.rows; ++r)
        (r % 10 == 9 ? eval_rows : fit_rows).push_back(r);
    if (eval_rows.empty()) eval_rows = fit_rows;  // tiny corpora

    Rng rng(cfg.seed);
    Projection proj = make_projection(kind, d, rng);
    if (kind != ProbeKind::Naive) {
        Mat xs(int(fit_rows.size()), d), ts(int(fit_rows.size()), d);
        for (size_t i = 0; i < fit_rows.size(); ++i) {
            int r = fit_rows[i];
            std::copy(ds.states.row(r), ds.states.row(r) + d, xs.row(int(i)));
            const auto& toks = ds.sent_tokens[size_t(ds.sent[size_t(r)])];
            int i_pos = ds.pos[size_t(r)];  // 1-based decoder position
            int tok = mode == ProbeMode::Input ? toks[size_t(i_pos - 1)] : toks[size_t(i_pos)];
            const float* e = embedding_row(m, tok);
            std::copy(e, e + d, ts.row(int(i)));
        }
        fit_projection(proj, xs, ts, cfg);
    }

    IdentifiabilityResult res;
    for (int r : eval_rows) {
        Mat x(1, d);
        std::copy(ds.states.row(r), ds.states.row(r) + d, x.row(0));
        Mat y = proj.apply(x);
        const auto& toks = ds.sent_tokens[size_t(ds.sent[size_t(r)])];
        // candidates: embeddings of all tokens of the sentence incl. bos/eos
        int best_pos = -1;
        double best_dist = 0.0;
        for (size_t k = 0; k < toks.size(); ++k) {
            const float* e = embedding_row(m, toks[k]);
            double dist = 0.0;
            for (int j = 0; j < d; ++j) {
                double dd = double(y.v[size_t(j)]) - e[j];
                dist += dd * dd;
            }
            if (best_pos < 0 || dist < best_dist) {  // ties keep smallest position
                best_pos = int(k);
                best_dist = dist;
            }
        }
        int i_pos = ds.pos[size_t(r)];
        int want = mode == ProbeMode::Input ? i_pos - 1 : i_pos;
        res.total += 1;
        if (best_pos == want) res.correct += 1;
    }
    res.rate = res.total ? double(res.correct) / double(res.total) : 0.0;
    return res;
}

}  // namespace alignlab

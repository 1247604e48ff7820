#pragma once

// Gradient-check harness: every graph recipe is built twice through a
// templated context — once over float32 autodiff tensors, once over a
// double-precision forward evaluator that serves as the central-difference
// oracle. Writing the recipe a single time keeps the two in lockstep.

#include <algorithm>
#include <cmath>
#include <vector>

#include "alignlab/tensor.hpp"

namespace gradcheck {

using alignlab::Mat;
using alignlab::Rng;
using alignlab::TensorPtr;

struct DMat {
    int rows = 0, cols = 0;
    std::vector<double> v;
    DMat() = default;
    DMat(int r, int c) : rows(r), cols(c), v(size_t(r) * c, 0.0) {}
    double& at(int r, int c) { return v[size_t(r) * cols + c]; }
    double at(int r, int c) const { return v[size_t(r) * cols + c]; }
};

struct FloatCtx {
    using M = TensorPtr;
    std::vector<TensorPtr> leaves;

    M leaf(int i) { return leaves[size_t(i)]; }
    M matmul(const M& a, const M& b) { return alignlab::ops::matmul(a, b); }
    M matmul_nt(const M& a, const M& b) { return alignlab::ops::matmul_nt(a, b); }
    M add(const M& a, const M& b) { return alignlab::ops::add(a, b); }
    M add_rowvec(const M& a, const M& b) { return alignlab::ops::add_rowvec(a, b); }
    M mul(const M& a, const M& b) { return alignlab::ops::mul(a, b); }
    M scale(const M& a, double c) { return alignlab::ops::scale(a, float(c)); }
    M relu(const M& a) { return alignlab::ops::relu(a); }
    M softmax_rows(const M& a, bool causal) { return alignlab::ops::softmax_rows(a, causal); }
    M softmax_axis0(const M& a) { return alignlab::ops::softmax(a, 0); }
    M layer_norm(const M& x, const M& g, const M& b) {
        return alignlab::ops::layer_norm_rows(x, g, b);
    }
    M embedding(const M& table, const std::vector<int>& ids) {
        return alignlab::ops::embedding(table, ids);
    }
    M cross_entropy(const M& logits, const std::vector<int>& t, double eps) {
        return alignlab::ops::cross_entropy(logits, t, float(eps));
    }
    M slice_cols(const M& a, int c0, int c1) { return alignlab::ops::slice_cols(a, c0, c1); }
    M concat_cols(const std::vector<M>& parts) { return alignlab::ops::concat_cols(parts); }
    M mean_of(const std::vector<M>& xs) { return alignlab::ops::mean_of(xs); }
    M weighted_neg_log(const M& s, const Mat& ref, double sc) {
        return alignlab::ops::weighted_neg_log(s, ref, float(sc));
    }
    M mse_to(const M& pred, const Mat& t) { return alignlab::ops::mse_to(pred, t); }
};

struct DoubleCtx {
    using M = DMat;
    std::vector<DMat> leaves;

    M leaf(int i) { return leaves[size_t(i)]; }
    M matmul(const M& a, const M& b) {
        M o(a.rows, b.cols);
        for (int i = 0; i < a.rows; ++i)
            for (int k = 0; k < a.cols; ++k)
                for (int j = 0; j < b.cols; ++j) o.at(i, j) += a.at(i, k) * b.at(k, j);
        return o;
    }
    M matmul_nt(const M& a, const M& b) {
        M o(a.rows, b.rows);
        for (int i = 0; i < a.rows; ++i)
            for (int j = 0; j < b.rows; ++j)
                for (int k = 0; k < a.cols; ++k) o.at(i, j) += a.at(i, k) * b.at(j, k);
        return o;
    }
    M add(const M& a, const M& b) {
        M o = a;
        for (size_t i = 0; i < o.v.size(); ++i) o.v[i] += b.v[i];
        return o;
    }
    M add_rowvec(const M& a, const M& b) {
        M o = a;
        for (int i = 0; i < a.rows; ++i)
            for (int j = 0; j < a.cols; ++j) o.at(i, j) += b.v[size_t(j)];
        return o;
    }
    M mul(const M& a, const M& b) {
        M o = a;
        for (size_t i = 0; i < o.v.size(); ++i) o.v[i] *= b.v[i];
        return o;
    }
    M scale(const M& a, double c) {
        M o = a;
        for (auto& x : o.v) x *= c;
        return o;
    }
    M relu(const M& a) {
        M o = a;
        for (auto& x : o.v) x = x > 0.0 ? x : 0.0;
        return o;
    }
    M softmax_rows(const M& a, bool causal) {
        M o(a.rows, a.cols);
        for (int i = 0; i < a.rows; ++i) {
            int lim = causal ? i + 1 : a.cols;
            double mx = a.at(i, 0);
            for (int j = 1; j < lim; ++j) mx = std::max(mx, a.at(i, j));
            double denom = 0.0;
            for (int j = 0; j < lim; ++j) denom += std::exp(a.at(i, j) - mx);
            for (int j = 0; j < lim; ++j) o.at(i, j) = std::exp(a.at(i, j) - mx) / denom;
        }
        return o;
    }
    M softmax_axis0(const M& a) {
        M o(a.rows, a.cols);
        for (int j = 0; j < a.cols; ++j) {
            double mx = a.at(0, j);
            for (int i = 1; i < a.rows; ++i) mx = std::max(mx, a.at(i, j));
            double denom = 0.0;
            for (int i = 0; i < a.rows; ++i) denom += std::exp(a.at(i, j) - mx);
            for (int i = 0; i < a.rows; ++i) o.at(i, j) = std::exp(a.at(i, j) - mx) / denom;
        }
        return o;
    }
    M layer_norm(const M& x, const M& g, const M& b) {
        const double eps = 1e-5;
        M o(x.rows, x.cols);
        for (int i = 0; i < x.rows; ++i) {
            double mean = 0.0;
            for (int j = 0; j < x.cols; ++j) mean += x.at(i, j);
            mean /= x.cols;
            double var = 0.0;
            for (int j = 0; j < x.cols; ++j) {
                double d = x.at(i, j) - mean;
                var += d * d;
            }
            var /= x.cols;
            double is = 1.0 / std::sqrt(var + eps);
            for (int j = 0; j < x.cols; ++j)
                o.at(i, j) = g.v[size_t(j)] * (x.at(i, j) - mean) * is + b.v[size_t(j)];
        }
        return o;
    }
    M embedding(const M& table, const std::vector<int>& ids) {
        M o(int(ids.size()), table.cols);
        for (size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < table.cols; ++j) o.at(int(i), j) = table.at(ids[i], j);
        return o;
    }
    M cross_entropy(const M& logits, const std::vector<int>& t, double eps) {
        double total = 0.0;
        int v = logits.cols;
        for (int i = 0; i < logits.rows; ++i) {
            double mx = logits.at(i, 0);
            for (int j = 1; j < v; ++j) mx = std::max(mx, logits.at(i, j));
            double sum_exp = 0.0, sum_logit = 0.0;
            for (int j = 0; j < v; ++j) {
                sum_exp += std::exp(logits.at(i, j) - mx);
                sum_logit += logits.at(i, j);
            }
            double lse = mx + std::log(sum_exp);
            total += lse - (1.0 - eps) * logits.at(i, t[size_t(i)]) - (eps / v) * sum_logit;
        }
        M o(1, 1);
        o.v[0] = total / logits.rows;
        return o;
    }
    M slice_cols(const M& a, int c0, int c1) {
        M o(a.rows, c1 - c0);
        for (int i = 0; i < a.rows; ++i)
            for (int j = c0; j < c1; ++j) o.at(i, j - c0) = a.at(i, j);
        return o;
    }
    M concat_cols(const std::vector<M>& parts) {
        int total = 0;
        for (auto& p : parts) total += p.cols;
        M o(parts[0].rows, total);
        int off = 0;
        for (auto& p : parts) {
            for (int i = 0; i < p.rows; ++i)
                for (int j = 0; j < p.cols; ++j) o.at(i, off + j) = p.at(i, j);
            off += p.cols;
        }
        return o;
    }
    M mean_of(const std::vector<M>& xs) {
        M o = xs[0];
        for (size_t k = 1; k < xs.size(); ++k)
            for (size_t i = 0; i < o.v.size(); ++i) o.v[i] += xs[k].v[i];
        for (auto& x : o.v) x /= double(xs.size());
        return o;
    }
    M weighted_neg_log(const M& s, const Mat& ref, double sc) {
        double total = 0.0;
        for (size_t i = 0; i < s.v.size(); ++i) {
            double w = ref.v[i];
            if (w == 0.0) continue;
            total += w * std::log(std::max(s.v[i], 1e-9));
        }
        M o(1, 1);
        o.v[0] = -sc * total;
        return o;
    }
    M mse_to(const M& pred, const Mat& t) {
        double total = 0.0;
        for (size_t i = 0; i < pred.v.size(); ++i) {
            double d = pred.v[i] - double(t.v[i]);
            total += d * d;
        }
        M o(1, 1);
        o.v[0] = total / double(pred.v.size());
        return o;
    }
};

// One seeded graph: leaf shapes, constant matrices, index vectors.
struct GraphSpec {
    int kind = 0;
    std::vector<std::vector<int>> leaf_shapes;
    std::vector<std::vector<float>> leaf_values;
    std::vector<int> targets;  // CE targets / embedding ids
    Mat const_mat;             // mse target or reference weights
    int m = 0, n = 0, k = 0;
};

constexpr int kNumKinds = 7;

inline GraphSpec make_spec(uint64_t seed) {
    Rng rng(seed);
    GraphSpec sp;
    sp.kind = int(rng.uniform_int(kNumKinds));
    sp.m = 2 + int(rng.uniform_int(4));  // 2..5
    sp.n = 2 + int(rng.uniform_int(4));
    sp.k = 2 + int(rng.uniform_int(4));
    auto val = [&] { return float(rng.uniform() * 2.0 - 1.0); };
    auto add_leaf = [&](int r, int c) {
        sp.leaf_shapes.push_back({r, c});
        std::vector<float> v(size_t(r) * c);
        for (auto& x : v) x = val();
        sp.leaf_values.push_back(std::move(v));
    };
    int m = sp.m, n = sp.n, k = sp.k;
    switch (sp.kind) {
        case 0:  // mlp block: matmul + add_rowvec + relu + matmul + mse
            add_leaf(m, k);
            add_leaf(k, n);
            add_leaf(1, n);
            add_leaf(n, k);
            sp.const_mat = Mat(m, k);
            for (auto& x : sp.const_mat.v) x = val();
            break;
        case 1:  // logits = matmul; CE with label smoothing
            add_leaf(m, k);
            add_leaf(k, n);
            for (int i = 0; i < m; ++i) sp.targets.push_back(int(rng.uniform_int(uint64_t(n))));
            break;
        case 2:  // attention cell: scaled matmul_nt + causal softmax + matmul + mse
            add_leaf(m, k);
            add_leaf(m, k);
            add_leaf(m, n);
            sp.const_mat = Mat(m, n);
            for (auto& x : sp.const_mat.v) x = val();
            break;
        case 3:  // layer norm + elementwise mul + mse
            add_leaf(m, n);
            add_leaf(1, n);
            add_leaf(1, n);
            add_leaf(m, n);
            sp.const_mat = Mat(m, n);
            for (auto& x : sp.const_mat.v) x = val();
            break;
        case 4: {  // softmax rows + weighted negative log
            add_leaf(m, k);
            add_leaf(n, k);
            sp.const_mat = Mat(m, n);
            for (int i = 0; i < m; ++i) sp.const_mat.at(i, int(rng.uniform_int(uint64_t(n)))) = 1.f;
            break;
        }
        case 5:  // slice + concat + column softmax + mean + mse
            add_leaf(m, 2 * n);
            add_leaf(m, n);
            sp.const_mat = Mat(m, 2 * n);
            for (auto& x : sp.const_mat.v) x = val();
            break;
        case 6:  // embedding + matmul + CE (no smoothing)
            add_leaf(6, k);  // table
            add_leaf(k, n);
            for (int i = 0; i < m; ++i) sp.targets.push_back(int(rng.uniform_int(uint64_t(n))));
            for (int i = 0; i < m; ++i) sp.const_mat.v.push_back(float(rng.uniform_int(6)));
            break;
    }
    return sp;
}

template <class C>
typename C::M build_graph(C& c, const GraphSpec& sp) {
    switch (sp.kind) {
        case 0: {
            auto h = c.relu(c.add_rowvec(c.matmul(c.leaf(0), c.leaf(1)), c.leaf(2)));
            return c.mse_to(c.matmul(h, c.leaf(3)), sp.const_mat);
        }
        case 1:
            return c.cross_entropy(c.matmul(c.leaf(0), c.leaf(1)), sp.targets, 0.1);
        case 2: {
            auto a = c.softmax_rows(c.scale(c.matmul_nt(c.leaf(0), c.leaf(1)),
                                            1.0 / std::sqrt(double(sp.k))),
                                    true);
            return c.mse_to(c.matmul(a, c.leaf(2)), sp.const_mat);
        }
        case 3: {
            auto y = c.layer_norm(c.leaf(0), c.leaf(1), c.leaf(2));
            return c.mse_to(c.mul(y, c.leaf(3)), sp.const_mat);
        }
        case 4: {
            auto s = c.softmax_rows(c.matmul_nt(c.leaf(0), c.leaf(1)), false);
            return c.weighted_neg_log(s, sp.const_mat, 1.0 / double(sp.m));
        }
        case 5: {
            auto left = c.slice_cols(c.leaf(0), 0, sp.n);
            auto right = c.slice_cols(c.leaf(0), sp.n, 2 * sp.n);
            auto sm = c.softmax_axis0(c.add(right, c.leaf(1)));
            auto j = c.concat_cols({left, c.mean_of({sm, c.leaf(1)})});
            return c.mse_to(j, sp.const_mat);
        }
        case 6: {
            std::vector<int> ids;
            for (auto x : sp.const_mat.v) ids.push_back(int(x));
            auto e = c.embedding(c.leaf(0), ids);
            return c.cross_entropy(c.matmul(e, c.leaf(1)), sp.targets, 0.0);
        }
    }
    throw alignlab::UsageError("bad graph kind");
}

struct GradcheckResult {
    double max_rel_err = 0.0;
    long checked = 0;
};

inline GradcheckResult run_gradcheck(uint64_t seed, double h = 1e-3) {
    auto sp = make_spec(seed);

    FloatCtx fc;
    for (size_t i = 0; i < sp.leaf_shapes.size(); ++i)
        fc.leaves.push_back(alignlab::Tensor::from_data(sp.leaf_shapes[i], sp.leaf_values[i],
                                                        /*requires_grad=*/true));
    auto loss = build_graph(fc, sp);
    alignlab::backward(loss);

    DoubleCtx dc;
    for (size_t i = 0; i < sp.leaf_shapes.size(); ++i) {
        DMat d(sp.leaf_shapes[i][0], sp.leaf_shapes[i][1]);
        for (size_t j = 0; j < d.v.size(); ++j) d.v[j] = double(sp.leaf_values[i][j]);
        dc.leaves.push_back(std::move(d));
    }

    GradcheckResult res;
    for (size_t li = 0; li < dc.leaves.size(); ++li) {
        for (size_t e = 0; e < dc.leaves[li].v.size(); ++e) {
            double orig = dc.leaves[li].v[e];
            dc.leaves[li].v[e] = orig + h;
            double fp = build_graph(dc, sp).v[0];
            dc.leaves[li].v[e] = orig - h;
            double fm = build_graph(dc, sp).v[0];
            dc.leaves[li].v[e] = orig;
            double fd = (fp - fm) / (2.0 * h);
            double ad = fc.leaves[li]->grad.empty() ? 0.0 : double(fc.leaves[li]->grad[e]);
            double rel = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.checked;
        }
    }
    return res;
}

}  // namespace gradcheck

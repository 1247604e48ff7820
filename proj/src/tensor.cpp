#include "alignlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

namespace alignlab {

namespace {
bool g_finite_checks = true;

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw DimError("tensor extents must be positive");
        n *= size_t(d);
    }
    return n;
}

void require_2d(const TensorPtr& t, const char* op) {
    if (t->shape.size() != 2) throw DimError(std::string(op) + ": expected 2-D tensor");
}
}  // namespace

void set_finite_checks(bool on) { g_finite_checks = on; }
bool finite_checks_enabled() { return g_finite_checks; }

TensorPtr Tensor::create(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    size_t n = shape_numel(shape);
    t->shape = std::move(shape);
    t->data.assign(n, 0.f);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::from_data(std::vector<int> shape, std::vector<float> values, bool requires_grad) {
    size_t n = shape_numel(shape);
    if (n != values.size()) throw DimError("from_data: shape/value count mismatch");
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::scalar(float v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.f);
}

void Tensor::zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.f);
}

void Tensor::check_finite(const char* op) const {
    for (float x : data) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("non-finite value produced by ") + op);
        }
    }
}

namespace {

TensorPtr make_node(std::vector<int> shape, std::vector<TensorPtr> parents, const char* op) {
    auto t = Tensor::create(std::move(shape));
    for (auto& p : parents) {
        if (p->requires_grad) t->requires_grad = true;
    }
    t->parents = std::move(parents);
    (void)op;
    return t;
}

void finish_node(const TensorPtr& t, const char* op) {
    if (g_finite_checks) t->check_finite(op);
}

}  // namespace

void backward(const TensorPtr& loss) {
    if (!loss->is_scalar()) throw UsageError("backward: loss must be scalar");
    // iterative topo sort
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> seen;
    std::vector<std::pair<Tensor*, size_t>> stack;
    stack.push_back({loss.get(), 0});
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Tensor* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // reverse topological order: loss last in `order`
    for (Tensor* t : order) t->ensure_grad();
    loss->grad[0] += 1.f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* t = *it;
        if (t->backward_fn) t->backward_fn(*t);
    }
}

namespace ops {

namespace {

// C[m x n] += A[m x k] @ B[k x n], ikj order (vectorizable without
// reassociation).
void gemm_acc(const float* A, const float* B, float* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        float* crow = C + size_t(i) * n;
        const float* arow = A + size_t(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            float a = arow[kk];
            if (a == 0.f) continue;
            const float* brow = B + size_t(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

}  // namespace

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    int m = a->dim(0), k = a->dim(1), k2 = b->dim(0), n = b->dim(1);
    if (k != k2) throw DimError("matmul: inner dimensions disagree");
    auto out = make_node({m, n}, {a, b}, "matmul");
    gemm_acc(a->data.data(), b->data.data(), out->data.data(), m, k, n);
    finish_node(out, "matmul");
    if (out->requires_grad) {
        out->backward_fn = [m, k, n](Tensor& t) {
            auto& a = t.parents[0];
            auto& b = t.parents[1];
            const float* g = t.grad.data();
            if (a->requires_grad) {
                a->ensure_grad();
                // dA = g @ B^T : materialize B^T, then gemm
                std::vector<float> bt(size_t(n) * k);
                for (int kk = 0; kk < k; ++kk)
                    for (int j = 0; j < n; ++j) bt[size_t(j) * k + kk] = b->data[size_t(kk) * n + j];
                gemm_acc(g, bt.data(), a->grad.data(), m, n, k);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                // dB[kk][j] += sum_i A[i][kk] * g[i][j]
                for (int i = 0; i < m; ++i) {
                    const float* arow = a->data.data() + size_t(i) * k;
                    const float* grow = g + size_t(i) * n;
                    for (int kk = 0; kk < k; ++kk) {
                        float av = arow[kk];
                        if (av == 0.f) continue;
                        float* dbrow = b->grad.data() + size_t(kk) * n;
                        for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                    }
                }
            }
        };
    }
    return out;
}

TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b) {
    require_2d(a, "matmul_nt");
    require_2d(b, "matmul_nt");
    int m = a->dim(0), k = a->dim(1), n = b->dim(0);
    if (k != b->dim(1)) throw DimError("matmul_nt: inner dimensions disagree");
    auto out = make_node({m, n}, {a, b}, "matmul_nt");
    for (int i = 0; i < m; ++i) {
        const float* arow = a->data.data() + size_t(i) * k;
        float* crow = out->data.data() + size_t(i) * n;
        for (int j = 0; j < n; ++j) {
            const float* brow = b->data.data() + size_t(j) * k;
            float s = 0.f;
            for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
            crow[j] = s;
        }
    }
    finish_node(out, "matmul_nt");
    if (out->requires_grad) {
        out->backward_fn = [m, k, n](Tensor& t) {
            auto& a = t.parents[0];
            auto& b = t.parents[1];
            const float* g = t.grad.data();
            if (a->requires_grad) {
                a->ensure_grad();
                // dA = g[m x n] @ B[n x k]
                gemm_acc(g, b->data.data(), a->grad.data(), m, n, k);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                // dB[j][kk] += sum_i g[i][j] * A[i][kk]
                for (int i = 0; i < m; ++i) {
                    const float* grow = g + size_t(i) * n;
                    const float* arow = a->data.data() + size_t(i) * k;
                    for (int j = 0; j < n; ++j) {
                        float gv = grow[j];
                        if (gv == 0.f) continue;
                        float* dbrow = b->grad.data() + size_t(j) * k;
                        for (int kk = 0; kk < k; ++kk) dbrow[kk] += gv * arow[kk];
                    }
                }
            }
        };
    }
    return out;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw DimError("add: shape mismatch");
    auto out = make_node(a->shape, {a, b}, "add");
    for (size_t i = 0; i < out->numel(); ++i) out->data[i] = a->data[i] + b->data[i];
    finish_node(out, "add");
    if (out->requires_grad) {
        out->backward_fn = [](Tensor& t) {
            for (auto& p : t.parents) {
                if (!p->requires_grad) continue;
                p->ensure_grad();
                for (size_t i = 0; i < t.grad.size(); ++i) p->grad[i] += t.grad[i];
            }
        };
    }
    return out;
}

TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& b) {
    require_2d(a, "add_rowvec");
    int m = a->dim(0), n = a->dim(1);
    if (int(b->numel()) != n) throw DimError("add_rowvec: width mismatch");
    auto out = make_node(a->shape, {a, b}, "add_rowvec");
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out->data[size_t(i) * n + j] = a->data[size_t(i) * n + j] + b->data[size_t(j)];
    finish_node(out, "add_rowvec");
    if (out->requires_grad) {
        out->backward_fn = [m, n](Tensor& t) {
            auto& a = t.parents[0];
            auto& b = t.parents[1];
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < t.grad.size(); ++i) a->grad[i] += t.grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) b->grad[size_t(j)] += t.grad[size_t(i) * n + j];
            }
        };
    }
    return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw DimError("mul: shape mismatch");
    auto out = make_node(a->shape, {a, b}, "mul");
    for (size_t i = 0; i < out->numel(); ++i) out->data[i] = a->data[i] * b->data[i];
    finish_node(out, "mul");
    if (out->requires_grad) {
        out->backward_fn = [](Tensor& t) {
            auto& a = t.parents[0];
            auto& b = t.parents[1];
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < t.grad.size(); ++i) a->grad[i] += t.grad[i] * b->data[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (size_t i = 0; i < t.grad.size(); ++i) b->grad[i] += t.grad[i] * a->data[i];
            }
        };
    }
    return out;
}

TensorPtr scale(const TensorPtr& a, float c) {
    auto out = make_node(a->shape, {a}, "scale");
    for (size_t i = 0; i < out->numel(); ++i) out->data[i] = a->data[i] * c;
    finish_node(out, "scale");
    if (out->requires_grad) {
        out->backward_fn = [c](Tensor& t) {
            auto& a = t.parents[0];
            a->ensure_grad();
            for (size_t i = 0; i < t.grad.size(); ++i) a->grad[i] += t.grad[i] * c;
        };
    }
    return out;
}

TensorPtr relu(const TensorPtr& a) {
    auto out = make_node(a->shape, {a}, "relu");
    for (size_t i = 0; i < out->numel(); ++i) out->data[i] = a->data[i] > 0.f ? a->data[i] : 0.f;
    finish_node(out, "relu");
    if (out->requires_grad) {
        out->backward_fn = [](Tensor& t) {
            auto& a = t.parents[0];
            a->ensure_grad();
            for (size_t i = 0; i < t.grad.size(); ++i)
                if (a->data[i] > 0.f) a->grad[i] += t.grad[i];
        };
    }
    return out;
}

TensorPtr softmax_rows(const TensorPtr& a, bool causal) {
    require_2d(a, "softmax_rows");
    int m = a->dim(0), n = a->dim(1);
    if (n == 0) throw DimError("softmax_rows: empty axis");
    if (causal && m != n) throw DimError("softmax_rows: causal mask requires square matrix");
    auto out = make_node(a->shape, {a}, "softmax_rows");
    for (int i = 0; i < m; ++i) {
        int lim = causal ? i + 1 : n;
        const float* x = a->data.data() + size_t(i) * n;
        float* y = out->data.data() + size_t(i) * n;
        float mx = x[0];
        for (int j = 1; j < lim; ++j) mx = std::max(mx, x[j]);
        double denom = 0.0;
        for (int j = 0; j < lim; ++j) {
            y[j] = std::exp(x[j] - mx);
            denom += y[j];
        }
        float inv = float(1.0 / denom);
        for (int j = 0; j < lim; ++j) y[j] *= inv;
        for (int j = lim; j < n; ++j) y[j] = 0.f;
    }
    finish_node(out, "softmax_rows");
    if (out->requires_grad) {
        out->backward_fn = [m, n, causal](Tensor& t) {
            auto& a = t.parents[0];
            a->ensure_grad();
            for (int i = 0; i < m; ++i) {
                int lim = causal ? i + 1 : n;
                const float* y = t.data.data() + size_t(i) * n;
                const float* gy = t.grad.data() + size_t(i) * n;
                float* gx = a->grad.data() + size_t(i) * n;
                double dot = 0.0;
                for (int j = 0; j < lim; ++j) dot += double(gy[j]) * y[j];
                for (int j = 0; j < lim; ++j) gx[j] += y[j] * (gy[j] - float(dot));
            }
        };
    }
    return out;
}

TensorPtr softmax(const TensorPtr& a, int axis) {
    if (a->shape.size() == 1) {
        if (axis != 0) throw DimError("softmax: axis out of range");
        auto row = a;
        // view as 1 x n
        auto r2 = make_node({1, a->dim(0)}, {a}, "reshape");
        r2->data = a->data;
        if (r2->requires_grad)
            r2->backward_fn = [](Tensor& t) {
                auto& p = t.parents[0];
                p->ensure_grad();
                for (size_t i = 0; i < t.grad.size(); ++i) p->grad[i] += t.grad[i];
            };
        auto sm = softmax_rows(r2, false);
        auto back = make_node(a->shape, {sm}, "reshape");
        back->data = sm->data;
        if (back->requires_grad)
            back->backward_fn = [](Tensor& t) {
                auto& p = t.parents[0];
                p->ensure_grad();
                for (size_t i = 0; i < t.grad.size(); ++i) p->grad[i] += t.grad[i];
            };
        return back;
    }
    require_2d(a, "softmax");
    if (axis == 1) return softmax_rows(a, false);
    if (axis != 0) throw DimError("softmax: axis out of range");
    // column softmax via explicit transpose round-trip
    int m = a->dim(0), n = a->dim(1);
    auto tr = make_node({n, m}, {a}, "transpose");
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) tr->data[size_t(j) * m + i] = a->data[size_t(i) * n + j];
    if (tr->requires_grad)
        tr->backward_fn = [m, n](Tensor& t) {
            auto& p = t.parents[0];
            p->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    p->grad[size_t(i) * n + j] += t.grad[size_t(j) * m + i];
        };
    auto sm = softmax_rows(tr, false);
    auto back = make_node({m, n}, {sm}, "transpose");
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) back->data[size_t(i) * n + j] = sm->data[size_t(j) * m + i];
    if (back->requires_grad)
        back->backward_fn = [m, n](Tensor& t) {
            auto& p = t.parents[0];
            p->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    p->grad[size_t(j) * m + i] += t.grad[size_t(i) * n + j];
        };
    return back;
}

TensorPtr layer_norm_rows(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias,
                          float eps) {
    require_2d(x, "layer_norm");
    int m = x->dim(0), n = x->dim(1);
    if (int(gain->numel()) != n || int(bias->numel()) != n)
        throw DimError("layer_norm: gain/bias width mismatch");
    auto out = make_node(x->shape, {x, gain, bias}, "layer_norm");
    auto xhat = std::make_shared<std::vector<float>>(size_t(m) * n);
    auto inv_std = std::make_shared<std::vector<float>>(size_t(m));
    for (int i = 0; i < m; ++i) {
        const float* xr = x->data.data() + size_t(i) * n;
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += xr[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            double d = xr[j] - mean;
            var += d * d;
        }
        var /= n;
        float is = float(1.0 / std::sqrt(var + eps));
        (*inv_std)[size_t(i)] = is;
        float* xh = xhat->data() + size_t(i) * n;
        float* yr = out->data.data() + size_t(i) * n;
        for (int j = 0; j < n; ++j) {
            xh[j] = (xr[j] - float(mean)) * is;
            yr[j] = gain->data[size_t(j)] * xh[j] + bias->data[size_t(j)];
        }
    }
    finish_node(out, "layer_norm");
    if (out->requires_grad) {
        out->backward_fn = [m, n, xhat, inv_std](Tensor& t) {
            auto& x = t.parents[0];
            auto& gain = t.parents[1];
            auto& bias = t.parents[2];
            for (int i = 0; i < m; ++i) {
                const float* gy = t.grad.data() + size_t(i) * n;
                const float* xh = xhat->data() + size_t(i) * n;
                if (gain->requires_grad) {
                    gain->ensure_grad();
                    for (int j = 0; j < n; ++j) gain->grad[size_t(j)] += gy[j] * xh[j];
                }
                if (bias->requires_grad) {
                    bias->ensure_grad();
                    for (int j = 0; j < n; ++j) bias->grad[size_t(j)] += gy[j];
                }
                if (x->requires_grad) {
                    x->ensure_grad();
                    float* gx = x->grad.data() + size_t(i) * n;
                    double m1 = 0.0, m2 = 0.0;
                    for (int j = 0; j < n; ++j) {
                        double dxh = double(gy[j]) * gain->data[size_t(j)];
                        m1 += dxh;
                        m2 += dxh * xh[j];
                    }
                    m1 /= n;
                    m2 /= n;
                    float is = (*inv_std)[size_t(i)];
                    for (int j = 0; j < n; ++j) {
                        double dxh = double(gy[j]) * gain->data[size_t(j)];
                        gx[j] += float(is * (dxh - m1 - double(xh[j]) * m2));
                    }
                }
            }
        };
    }
    return out;
}

TensorPtr embedding(const TensorPtr& table, const std::vector<int>& ids) {
    require_2d(table, "embedding");
    int v = table->dim(0), d = table->dim(1);
    for (int id : ids)
        if (id < 0 || id >= v) throw IndexError("embedding: id out of range");
    auto out = make_node({int(ids.size()), d}, {table}, "embedding");
    for (size_t i = 0; i < ids.size(); ++i)
        std::memcpy(out->data.data() + i * d, table->data.data() + size_t(ids[i]) * d,
                    sizeof(float) * size_t(d));
    finish_node(out, "embedding");
    if (out->requires_grad) {
        auto ids_copy = ids;
        out->backward_fn = [ids_copy, d](Tensor& t) {
            auto& table = t.parents[0];
            table->ensure_grad();
            for (size_t i = 0; i < ids_copy.size(); ++i) {
                float* dst = table->grad.data() + size_t(ids_copy[i]) * d;
                const float* src = t.grad.data() + i * d;
                for (int j = 0; j < d; ++j) dst[j] += src[j];
            }
        };
    }
    return out;
}

TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets,
                        float label_smoothing) {
    require_2d(logits, "cross_entropy");
    int t_len = logits->dim(0), v = logits->dim(1);
    if (int(targets.size()) != t_len) throw DimError("cross_entropy: target count mismatch");
    if (label_smoothing < 0.f || label_smoothing >= 1.f)
        throw UsageError("cross_entropy: label smoothing must be in [0, 1)");
    for (int id : targets)
        if (id < 0 || id >= v) throw IndexError("cross_entropy: target id out of range");
    auto out = make_node({1}, {logits}, "cross_entropy");
    float eps = label_smoothing;
    // per-row log-softmax pieces, accumulated in double
    double total = 0.0;
    for (int i = 0; i < t_len; ++i) {
        const float* x = logits->data.data() + size_t(i) * v;
        float mx = x[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, x[j]);
        double sum_exp = 0.0, sum_logit = 0.0;
        for (int j = 0; j < v; ++j) {
            sum_exp += std::exp(double(x[j]) - mx);
            sum_logit += x[j];
        }
        double lse = mx + std::log(sum_exp);
        // -sum_j q_j (x_j - lse), q = (1-eps) onehot + eps/V
        double nll = lse - (1.0 - eps) * x[targets[size_t(i)]] - (eps / v) * sum_logit;
        total += nll;
    }
    out->data[0] = float(total / t_len);
    finish_node(out, "cross_entropy");
    if (out->requires_grad) {
        auto tgt = targets;
        out->backward_fn = [tgt, t_len, v, eps](Tensor& t) {
            auto& logits = t.parents[0];
            logits->ensure_grad();
            float g = t.grad[0] / float(t_len);
            for (int i = 0; i < t_len; ++i) {
                const float* x = logits->data.data() + size_t(i) * v;
                float* gx = logits->grad.data() + size_t(i) * v;
                float mx = x[0];
                for (int j = 1; j < v; ++j) mx = std::max(mx, x[j]);
                double sum_exp = 0.0;
                for (int j = 0; j < v; ++j) sum_exp += std::exp(double(x[j]) - mx);
                for (int j = 0; j < v; ++j) {
                    float p = float(std::exp(double(x[j]) - mx) / sum_exp);
                    float q = eps / v + (j == tgt[size_t(i)] ? 1.f - eps : 0.f);
                    gx[j] += g * (p - q);
                }
            }
        };
    }
    return out;
}

TensorPtr slice_cols(const TensorPtr& a, int c0, int c1) {
    require_2d(a, "slice_cols");
    int m = a->dim(0), n = a->dim(1);
    if (c0 < 0 || c1 > n || c0 >= c1) throw DimError("slice_cols: bad column range");
    int w = c1 - c0;
    auto out = make_node({m, w}, {a}, "slice_cols");
    for (int i = 0; i < m; ++i)
        std::memcpy(out->data.data() + size_t(i) * w, a->data.data() + size_t(i) * n + c0,
                    sizeof(float) * size_t(w));
    finish_node(out, "slice_cols");
    if (out->requires_grad) {
        out->backward_fn = [m, n, c0, w](Tensor& t) {
            auto& a = t.parents[0];
            a->ensure_grad();
            for (int i = 0; i < m; ++i) {
                float* dst = a->grad.data() + size_t(i) * n + c0;
                const float* src = t.grad.data() + size_t(i) * w;
                for (int j = 0; j < w; ++j) dst[j] += src[j];
            }
        };
    }
    return out;
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw DimError("concat_cols: no inputs");
    int m = parts[0]->dim(0);
    int total = 0;
    for (auto& p : parts) {
        require_2d(p, "concat_cols");
        if (p->dim(0) != m) throw DimError("concat_cols: row count mismatch");
        total += p->dim(1);
    }
    auto out = make_node({m, total}, parts, "concat_cols");
    int off = 0;
    for (auto& p : parts) {
        int w = p->dim(1);
        for (int i = 0; i < m; ++i)
            std::memcpy(out->data.data() + size_t(i) * total + off,
                        p->data.data() + size_t(i) * w, sizeof(float) * size_t(w));
        off += w;
    }
    finish_node(out, "concat_cols");
    if (out->requires_grad) {
        out->backward_fn = [m, total](Tensor& t) {
            int off = 0;
            for (auto& p : t.parents) {
                int w = p->dim(1);
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (int i = 0; i < m; ++i) {
                        const float* src = t.grad.data() + size_t(i) * total + off;
                        float* dst = p->grad.data() + size_t(i) * w;
                        for (int j = 0; j < w; ++j) dst[j] += src[j];
                    }
                }
                off += w;
            }
        };
    }
    return out;
}

TensorPtr dropout(const TensorPtr& a, float rate, Rng& rng) {
    if (rate < 0.f || rate >= 1.f) throw UsageError("dropout: rate must be in [0, 1)");
    if (rate == 0.f) return a;
    auto out = make_node(a->shape, {a}, "dropout");
    auto mask = std::make_shared<std::vector<float>>(a->numel());
    float keep = 1.f - rate;
    float inv = 1.f / keep;
    for (size_t i = 0; i < a->numel(); ++i) {
        float mv = rng.bernoulli(keep) ? inv : 0.f;
        (*mask)[i] = mv;
        out->data[i] = a->data[i] * mv;
    }
    finish_node(out, "dropout");
    if (out->requires_grad) {
        out->backward_fn = [mask](Tensor& t) {
            auto& a = t.parents[0];
            a->ensure_grad();
            for (size_t i = 0; i < t.grad.size(); ++i) a->grad[i] += t.grad[i] * (*mask)[i];
        };
    }
    return out;
}

TensorPtr weighted_neg_log(const TensorPtr& s, const Mat& ref, float scale_factor, float clamp) {
    require_2d(s, "weighted_neg_log");
    if (s->dim(0) != ref.rows || s->dim(1) != ref.cols)
        throw DimError("weighted_neg_log: shape mismatch");
    auto out = make_node({1}, {s}, "weighted_neg_log");
    double total = 0.0;
    for (size_t i = 0; i < s->numel(); ++i) {
        float w = ref.v[i];
        if (w == 0.f) continue;
        total += double(w) * std::log(std::max(s->data[i], clamp));
    }
    out->data[0] = -scale_factor * float(total);
    finish_node(out, "weighted_neg_log");
    if (out->requires_grad) {
        Mat ref_copy = ref;
        out->backward_fn = [ref_copy, scale_factor, clamp](Tensor& t) {
            auto& s = t.parents[0];
            s->ensure_grad();
            float g = t.grad[0];
            for (size_t i = 0; i < s->numel(); ++i) {
                float w = ref_copy.v[i];
                if (w == 0.f) continue;
                if (s->data[i] <= clamp) continue;  // clamped region, flat
                s->grad[i] += -g * scale_factor * w / s->data[i];
            }
        };
    }
    return out;
}

TensorPtr mean_of(const std::vector<TensorPtr>& xs) {
    if (xs.empty()) throw DimError("mean_of: no inputs");
    for (auto& x : xs)
        if (x->shape != xs[0]->shape) throw DimError("mean_of: shape mismatch");
    auto out = make_node(xs[0]->shape, xs, "mean_of");
    float inv = 1.f / float(xs.size());
    for (size_t i = 0; i < out->numel(); ++i) {
        float s = 0.f;
        for (auto& x : xs) s += x->data[i];
        out->data[i] = s * inv;
    }
    finish_node(out, "mean_of");
    if (out->requires_grad) {
        out->backward_fn = [inv](Tensor& t) {
            for (auto& p : t.parents) {
                if (!p->requires_grad) continue;
                p->ensure_grad();
                for (size_t i = 0; i < t.grad.size(); ++i) p->grad[i] += t.grad[i] * inv;
            }
        };
    }
    return out;
}

TensorPtr mse_to(const TensorPtr& pred, const Mat& target) {
    require_2d(pred, "mse_to");
    if (pred->dim(0) != target.rows || pred->dim(1) != target.cols)
        throw DimError("mse_to: shape mismatch");
    auto out = make_node({1}, {pred}, "mse_to");
    double total = 0.0;
    for (size_t i = 0; i < pred->numel(); ++i) {
        double d = double(pred->data[i]) - target.v[i];
        total += d * d;
    }
    out->data[0] = float(total / double(pred->numel()));
    finish_node(out, "mse_to");
    if (out->requires_grad) {
        Mat t_copy = target;
        out->backward_fn = [t_copy](Tensor& t) {
            auto& pred = t.parents[0];
            pred->ensure_grad();
            float g = t.grad[0] * 2.f / float(pred->numel());
            for (size_t i = 0; i < pred->numel(); ++i)
                pred->grad[i] += g * (pred->data[i] - t_copy.v[i]);
        };
    }
    return out;
}

}  // namespace ops

void adam_step(const std::vector<TensorPtr>& params, AdamState& state, float lr_override) {
    if (state.m.size() != params.size()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i]->numel(), 0.f);
            state.v[i].assign(params[i]->numel(), 0.f);
        }
    }
    state.t += 1;
    float lr = lr_override >= 0.f ? lr_override : state.alpha;
    double bc1 = 1.0 - std::pow(double(state.beta1), double(state.t));
    double bc2 = 1.0 - std::pow(double(state.beta2), double(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (p->numel() != state.m[i].size()) throw DimError("adam_step: state shape mismatch");
        if (p->grad.empty()) continue;
        float* m = state.m[i].data();
        float* v = state.v[i].data();
        for (size_t j = 0; j < p->numel(); ++j) {
            float g = p->grad[j];
            m[j] = state.beta1 * m[j] + (1.f - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.f - state.beta2) * g * g;
            float mhat = float(m[j] / bc1);
            float vhat = float(v[j] / bc2);
            p->data[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace alignlab

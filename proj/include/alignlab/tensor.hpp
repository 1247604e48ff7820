#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "alignlab/common.hpp"

namespace alignlab {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense float32 tensor node in a reverse-mode autodiff graph.
/// Interior nodes hold their inputs (parents) and a pull-style backward
/// closure; leaves have no parents. Gradients accumulate across backward
/// calls until zero_grad().
class Tensor {
  public:
    std::vector<int> shape;
    std::vector<float> data;
    std::vector<float> grad;  // sized lazily, only when requires_grad
    bool requires_grad = false;

    std::vector<TensorPtr> parents;
    std::function<void(Tensor&)> backward_fn;  // adds into parents' grads

    static TensorPtr create(std::vector<int> shape, bool requires_grad = false);
    static TensorPtr from_data(std::vector<int> shape, std::vector<float> values,
                               bool requires_grad = false);
    static TensorPtr scalar(float v, bool requires_grad = false);

    size_t numel() const { return data.size(); }
    int dim(int i) const { return shape[size_t(i)]; }
    bool is_scalar() const { return data.size() == 1; }

    void ensure_grad();
    void zero_grad();
    void check_finite(const char* op) const;
};

/// Runs reverse-mode accumulation from a scalar loss. Repeated calls
/// accumulate into existing grad buffers.
void backward(const TensorPtr& loss);

/// Global toggle for post-op NaN/Inf scans (on by default).
void set_finite_checks(bool on);
bool finite_checks_enabled();

namespace ops {

// a[m x k] @ b[k x n]
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
// a[m x k] @ b[n x k]^T -> [m x n]
TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);

TensorPtr add(const TensorPtr& a, const TensorPtr& b);           // same shape
TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& b);    // b broadcast over rows
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);           // elementwise
TensorPtr scale(const TensorPtr& a, float c);
TensorPtr relu(const TensorPtr& a);

// Row softmax with max-subtraction. causal requires a square matrix and
// masks entries above the diagonal.
TensorPtr softmax_rows(const TensorPtr& a, bool causal = false);
// Generic axis softmax over a 1-D or 2-D tensor (axis 0 or 1).
TensorPtr softmax(const TensorPtr& a, int axis);

TensorPtr layer_norm_rows(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias,
                          float eps = 1e-5f);

// Gathers rows of table by id; grad scatters back into the table.
TensorPtr embedding(const TensorPtr& table, const std::vector<int>& ids);

// Mean over positions of label-smoothed negative log-likelihood.
TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets,
                        float label_smoothing = 0.f);

TensorPtr slice_cols(const TensorPtr& a, int c0, int c1);
TensorPtr concat_cols(const std::vector<TensorPtr>& parts);

// Inverted dropout; identity when rate == 0.
TensorPtr dropout(const TensorPtr& a, float rate, Rng& rng);

// -(scale) * sum_ij ref[i][j] * log(max(s[i][j], clamp)); used by the
// alignment-module loss.
TensorPtr weighted_neg_log(const TensorPtr& s, const Mat& ref, float scale,
                           float clamp = 1e-9f);

// Elementwise mean of same-shaped tensors.
TensorPtr mean_of(const std::vector<TensorPtr>& xs);

// Mean squared error of pred against a constant target, scalar output.
TensorPtr mse_to(const TensorPtr& pred, const Mat& target);

}  // namespace ops

/// Adam with bias correction. m/v buffers are keyed by position in the
/// parameter list, which must stay stable across steps.
struct AdamState {
    float alpha = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    long t = 0;
    std::vector<std::vector<float>> m, v;
};

/// One optimizer step over params using their grad buffers. lr_override < 0
/// means use state.alpha (callers pass a scheduled rate).
void adam_step(const std::vector<TensorPtr>& params, AdamState& state, float lr_override = -1.f);

}  // namespace alignlab

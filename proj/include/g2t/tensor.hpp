#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace g2t {

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};
struct NonScalarLoss : std::runtime_error {
  explicit NonScalarLoss(const std::string& msg) : std::runtime_error(msg) {}
};

class TensorNode;
using Tensor = std::shared_ptr<TensorNode>;

// One node of the reverse-mode tape. Values are always 64-bit floats; shapes
// are rank 0 (scalar), 1 (vector) or 2 (matrix), row-major.
class TensorNode {
 public:
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<Tensor> parents;
  std::function<void(TensorNode&)> backward_fn;

  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  std::size_t size() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

Tensor make_tensor(std::vector<int> shape, std::vector<double> value,
                   bool requires_grad = false);
Tensor zeros(std::vector<int> shape, bool requires_grad = false);
Tensor scalar(double v);

// Elementwise / linear algebra primitives.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& a, const Tensor& v);  // broadcast v over rows
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor layer_norm_rows(const Tensor& a, const Tensor& gamma,
                       const Tensor& beta, double eps = 1e-6);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);
// out[i,j] = mask[i*cols+j] ? fill : a[i,j]; no gradient through filled slots.
Tensor masked_fill(const Tensor& a, const std::vector<std::uint8_t>& mask,
                   double fill);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// Mean negative log-likelihood of targets under row-wise softmax(logits),
// averaged over positions where mask is nonzero.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<std::uint8_t>& mask);

// Graph message-passing primitives over an edge list (src -> dst).
// out[v] = (1/|in(v)|) * sum_{(u,v)} x[u]; zero rows for nodes with no edges.
Tensor neighbor_mean(const Tensor& x, const std::vector<int>& src,
                     const std::vector<int>& dst, int num_nodes);
// s_e = scale * dot(q[dst_e], k[src_e] + rel_embed[rel_e])
Tensor edge_scores(const Tensor& q, const Tensor& k, const Tensor& rel_embed,
                   const std::vector<int>& src, const std::vector<int>& dst,
                   const std::vector<int>& rel, double scale);
// Per-destination softmax over edge scores with multiplicative per-source
// gates: alpha_e = g[src_e]*exp(s_e) / (sum_{e' into dst} g[src_e']*exp(s_e')
// + floor). Gates must be strictly positive.
Tensor gated_edge_softmax(const Tensor& scores, const Tensor& gates,
                          const std::vector<int>& src,
                          const std::vector<int>& dst, int num_nodes,
                          double floor);
// out[dst_e] += alpha_e * v[src_e]
Tensor edge_weighted_sum(const Tensor& alpha, const Tensor& v,
                         const std::vector<int>& src,
                         const std::vector<int>& dst, int num_nodes);

// Reverse-mode sweep from a scalar loss; gradients accumulate into .grad of
// every reachable node with requires_grad.
void backward(const Tensor& loss);

}  // namespace g2t

#include "g2t/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "g2t/kernels.hpp"

namespace g2t {

namespace {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a->shape != b->shape)
    throw ShapeMismatch(std::string(op) + ": shapes " + shape_str(a->shape) +
                        " vs " + shape_str(b->shape));
}

Tensor new_node(std::vector<int> shape) {
  auto t = std::make_shared<TensorNode>();
  t->shape = std::move(shape);
  t->value.assign(shape_size(t->shape), 0.0);
  return t;
}

void wire(const Tensor& out, std::vector<Tensor> parents,
          std::function<void(TensorNode&)> fn) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  out->requires_grad = rg;
  if (rg) {
    out->parents = std::move(parents);
    out->backward_fn = std::move(fn);
  }
}

// Numerically stable sigmoid.
inline double sigmoid1(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor make_tensor(std::vector<int> shape, std::vector<double> value,
                   bool requires_grad) {
  if (value.size() != shape_size(shape))
    throw ShapeMismatch("make_tensor: value size " +
                        std::to_string(value.size()) + " vs shape " +
                        shape_str(shape));
  auto t = std::make_shared<TensorNode>();
  t->shape = std::move(shape);
  t->value = std::move(value);
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

Tensor zeros(std::vector<int> shape, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return make_tensor(std::move(shape), std::vector<double>(n, 0.0),
                     requires_grad);
}

Tensor scalar(double v) { return make_tensor({}, {v}); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
    throw ShapeMismatch("matmul: shapes " + shape_str(a->shape) + " vs " +
                        shape_str(b->shape));
  const std::size_t n = a->shape[0], k = a->shape[1], m = b->shape[1];
  Tensor out = new_node({(int)n, (int)m});
  kernels::matmul(a->value.data(), b->value.data(), out->value.data(), n, k, m);
  wire(out, {a, b}, [a, b, n, k, m](TensorNode& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      std::vector<double> da(n * k);
      kernels::matmul_bt(self.grad.data(), b->value.data(), da.data(), n, m, k);
      for (std::size_t i = 0; i < da.size(); ++i) a->grad[i] += da[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      std::vector<double> db(k * m);
      kernels::matmul_at(a->value.data(), self.grad.data(), db.data(), k, n, m);
      for (std::size_t i = 0; i < db.size(); ++i) b->grad[i] += db[i];
    }
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a->shape.size() != 2)
    throw ShapeMismatch("transpose: rank != 2, shape " + shape_str(a->shape));
  const int n = a->shape[0], m = a->shape[1];
  Tensor out = new_node({m, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out->value[j * n + i] = a->value[i * m + j];
  wire(out, {a}, [a, n, m](TensorNode& self) {
    a->ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) a->grad[i * m + j] += self.grad[j * n + i];
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = new_node(a->shape);
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = a->value[i] + b->value[i];
  wire(out, {a, b}, [a, b](TensorNode& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) b->grad[i] += self.grad[i];
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = new_node(a->shape);
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = a->value[i] - b->value[i];
  wire(out, {a, b}, [a, b](TensorNode& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) b->grad[i] -= self.grad[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = new_node(a->shape);
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = a->value[i] * b->value[i];
  wire(out, {a, b}, [a, b](TensorNode& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        a->grad[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        b->grad[i] += self.grad[i] * a->value[i];
    }
  });
  return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  if (a->shape.size() != 2 || (int)v->size() != a->shape[1])
    throw ShapeMismatch("add_rowvec: shapes " + shape_str(a->shape) + " vs " +
                        shape_str(v->shape));
  const int n = a->shape[0], m = a->shape[1];
  Tensor out = new_node(a->shape);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      out->value[i * m + j] = a->value[i * m + j] + v->value[j];
  wire(out, {a, v}, [a, v, n, m](TensorNode& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i];
    }
    if (v->requires_grad) {
      v->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) v->grad[j] += self.grad[i * m + j];
    }
  });
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = new_node(a->shape);
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] * c;
  wire(out, {a}, [a, c](TensorNode& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      a->grad[i] += self.grad[i] * c;
  });
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = new_node(a->shape);
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = a->value[i] > 0 ? a->value[i] : 0.0;
  wire(out, {a}, [a](TensorNode& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      if (a->value[i] > 0) a->grad[i] += self.grad[i];
  });
  return out;
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = new_node(a->shape);
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = sigmoid1(a->value[i]);
  wire(out, {a}, [a](TensorNode& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      const double y = self.value[i];
      a->grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
  return out;
}

Tensor tanh_op(const Tensor& a) {
  Tensor out = new_node(a->shape);
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = std::tanh(a->value[i]);
  wire(out, {a}, [a](TensorNode& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      const double y = self.value[i];
      a->grad[i] += self.grad[i] * (1.0 - y * y);
    }
  });
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  if (a->shape.size() != 2)
    throw ShapeMismatch("softmax_rows: rank != 2, shape " +
                        shape_str(a->shape));
  const int n = a->shape[0], m = a->shape[1];
  Tensor out = new_node(a->shape);
  out->value = a->value;
  kernels::softmax_rows_serial(out->value.data(), n, m);
  wire(out, {a}, [a, n, m](TensorNode& self) {
    a->ensure_grad();
    for (int i = 0; i < n; ++i) {
      const double* y = self.value.data() + i * m;
      const double* dy = self.grad.data() + i * m;
      double dot = 0.0;
      for (int j = 0; j < m; ++j) dot += y[j] * dy[j];
      for (int j = 0; j < m; ++j) a->grad[i * m + j] += y[j] * (dy[j] - dot);
    }
  });
  return out;
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gamma,
                       const Tensor& beta, double eps) {
  if (a->shape.size() != 2 || (int)gamma->size() != a->shape[1] ||
      (int)beta->size() != a->shape[1])
    throw ShapeMismatch("layer_norm_rows: shapes " + shape_str(a->shape) +
                        " vs " + shape_str(gamma->shape));
  const int n = a->shape[0], m = a->shape[1];
  Tensor out = new_node(a->shape);
  auto xhat = std::make_shared<std::vector<double>>(n * m);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  for (int i = 0; i < n; ++i) {
    const double* x = a->value.data() + i * m;
    double mean = 0.0;
    for (int j = 0; j < m; ++j) mean += x[j];
    mean /= m;
    double var = 0.0;
    for (int j = 0; j < m; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= m;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (int j = 0; j < m; ++j) {
      const double xh = (x[j] - mean) * is;
      (*xhat)[i * m + j] = xh;
      out->value[i * m + j] = xh * gamma->value[j] + beta->value[j];
    }
  }
  wire(out, {a, gamma, beta},
       [a, gamma, beta, xhat, inv_std, n, m](TensorNode& self) {
         for (int i = 0; i < n; ++i) {
           const double* dy = self.grad.data() + i * m;
           const double* xh = xhat->data() + i * m;
           if (gamma->requires_grad) {
             gamma->ensure_grad();
             for (int j = 0; j < m; ++j) gamma->grad[j] += dy[j] * xh[j];
           }
           if (beta->requires_grad) {
             beta->ensure_grad();
             for (int j = 0; j < m; ++j) beta->grad[j] += dy[j];
           }
           if (a->requires_grad) {
             a->ensure_grad();
             double s1 = 0.0, s2 = 0.0;
             for (int j = 0; j < m; ++j) {
               const double g = dy[j] * gamma->value[j];
               s1 += g;
               s2 += g * xh[j];
             }
             const double is = (*inv_std)[i];
             for (int j = 0; j < m; ++j) {
               const double g = dy[j] * gamma->value[j];
               a->grad[i * m + j] +=
                   is * (g - s1 / m - xh[j] * s2 / m);
             }
           }
         }
       });
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: empty");
  const bool vec = parts[0]->shape.size() <= 1;
  const int cols = vec ? 1 : parts[0]->shape[1];
  int rows = 0;
  for (const auto& p : parts) {
    if ((vec && p->shape.size() > 1) ||
        (!vec && (p->shape.size() != 2 || p->shape[1] != cols)))
      throw ShapeMismatch("concat_rows: shapes " + shape_str(parts[0]->shape) +
                          " vs " + shape_str(p->shape));
    rows += p->rows();
  }
  Tensor out =
      vec ? new_node({rows}) : new_node(std::vector<int>{rows, cols});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.begin(), p->value.end(), out->value.begin() + off);
    off += p->size();
  }
  wire(out, parts, [parts](TensorNode& self) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      if (p->requires_grad) {
        p->ensure_grad();
        for (std::size_t i = 0; i < p->size(); ++i)
          p->grad[i] += self.grad[off + i];
      }
      off += p->size();
    }
  });
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: empty");
  const int rows = parts[0]->shape.size() == 2 ? parts[0]->shape[0] : 0;
  int cols = 0;
  for (const auto& p : parts) {
    if (p->shape.size() != 2 || p->shape[0] != rows)
      throw ShapeMismatch("concat_cols: shapes " + shape_str(parts[0]->shape) +
                          " vs " + shape_str(p->shape));
    cols += p->shape[1];
  }
  Tensor out = new_node({rows, cols});
  int coff = 0;
  for (const auto& p : parts) {
    const int pc = p->shape[1];
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < pc; ++j)
        out->value[i * cols + coff + j] = p->value[i * pc + j];
    coff += pc;
  }
  wire(out, parts, [parts, rows, cols](TensorNode& self) {
    int coff = 0;
    for (const auto& p : parts) {
      const int pc = p->shape[1];
      if (p->requires_grad) {
        p->ensure_grad();
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < pc; ++j)
            p->grad[i * pc + j] += self.grad[i * cols + coff + j];
      }
      coff += pc;
    }
  });
  return out;
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
  const int n = a->rows();
  if (r0 < 0 || r1 > n || r0 >= r1)
    throw ShapeMismatch("slice_rows: [" + std::to_string(r0) + "," +
                        std::to_string(r1) + ") of " + shape_str(a->shape));
  const int m = a->shape.size() == 2 ? a->shape[1] : 1;
  Tensor out = a->shape.size() == 2
                   ? new_node(std::vector<int>{r1 - r0, m})
                   : new_node(std::vector<int>{r1 - r0});
  std::copy(a->value.begin() + (std::size_t)r0 * m,
            a->value.begin() + (std::size_t)r1 * m, out->value.begin());
  wire(out, {a}, [a, r0, m](TensorNode& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      a->grad[(std::size_t)r0 * m + i] += self.grad[i];
  });
  return out;
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_size(shape) != a->size())
    throw ShapeMismatch("reshape: " + shape_str(a->shape) + " to " +
                        shape_str(shape));
  Tensor out = new_node(std::move(shape));
  out->value = a->value;
  wire(out, {a}, [a](TensorNode& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i];
  });
  return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  if (table->shape.size() != 2)
    throw ShapeMismatch("gather_rows: table rank != 2");
  const int m = table->shape[1];
  for (int id : ids)
    if (id < 0 || id >= table->shape[0])
      throw ShapeMismatch("gather_rows: id " + std::to_string(id) +
                          " out of range " + shape_str(table->shape));
  Tensor out = new_node({(int)ids.size(), m});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(table->value.begin() + (std::size_t)ids[i] * m,
              table->value.begin() + (std::size_t)(ids[i] + 1) * m,
              out->value.begin() + i * m);
  wire(out, {table}, [table, ids, m](TensorNode& self) {
    table->ensure_grad();
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < m; ++j)
        table->grad[(std::size_t)ids[i] * m + j] += self.grad[i * m + j];
  });
  return out;
}

Tensor masked_fill(const Tensor& a, const std::vector<std::uint8_t>& mask,
                   double fill) {
  if (mask.size() != a->size())
    throw ShapeMismatch("masked_fill: mask size " +
                        std::to_string(mask.size()) + " vs " +
                        shape_str(a->shape));
  Tensor out = new_node(a->shape);
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = mask[i] ? fill : a->value[i];
  wire(out, {a}, [a, mask](TensorNode& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      if (!mask[i]) a->grad[i] += self.grad[i];
  });
  return out;
}

Tensor sum_all(const Tensor& a) {
  Tensor out = new_node({});
  out->value[0] = std::accumulate(a->value.begin(), a->value.end(), 0.0);
  wire(out, {a}, [a](TensorNode& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += self.grad[0];
  });
  return out;
}

Tensor mean_all(const Tensor& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a->size()));
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<std::uint8_t>& mask) {
  if (logits->shape.size() != 2 || targets.size() != (std::size_t)logits->shape[0] ||
      mask.size() != targets.size())
    throw ShapeMismatch("cross_entropy: logits " + shape_str(logits->shape) +
                        " vs " + std::to_string(targets.size()) + " targets");
  const int n = logits->shape[0], v = logits->shape[1];
  std::size_t count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  if (count == 0) throw ShapeMismatch("cross_entropy: empty mask");
  auto probs = std::make_shared<std::vector<double>>(logits->value);
  kernels::softmax_rows_serial(probs->data(), n, v);
  double nll = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (targets[i] < 0 || targets[i] >= v)
      throw ShapeMismatch("cross_entropy: target id out of range");
    nll -= std::log(std::max((*probs)[(std::size_t)i * v + targets[i]], 1e-300));
  }
  Tensor out = new_node({});
  out->value[0] = nll / static_cast<double>(count);
  wire(out, {logits},
       [logits, targets, mask, probs, n, v, count](TensorNode& self) {
         logits->ensure_grad();
         const double g = self.grad[0] / static_cast<double>(count);
         for (int i = 0; i < n; ++i) {
           if (!mask[i]) continue;
           for (int j = 0; j < v; ++j)
             logits->grad[(std::size_t)i * v + j] +=
                 g * ((*probs)[(std::size_t)i * v + j] -
                      (j == targets[i] ? 1.0 : 0.0));
         }
       });
  return out;
}

Tensor neighbor_mean(const Tensor& x, const std::vector<int>& src,
                     const std::vector<int>& dst, int num_nodes) {
  if (x->shape.size() != 2 || src.size() != dst.size())
    throw ShapeMismatch("neighbor_mean: bad inputs");
  const int m = x->shape[1];
  std::vector<int> indeg(num_nodes, 0);
  for (int v : dst) indeg[v]++;
  Tensor out = new_node({num_nodes, m});
  for (std::size_t e = 0; e < src.size(); ++e) {
    const double w = 1.0 / indeg[dst[e]];
    for (int j = 0; j < m; ++j)
      out->value[(std::size_t)dst[e] * m + j] +=
          w * x->value[(std::size_t)src[e] * m + j];
  }
  wire(out, {x}, [x, src, dst, indeg, m](TensorNode& self) {
    x->ensure_grad();
    for (std::size_t e = 0; e < src.size(); ++e) {
      const double w = 1.0 / indeg[dst[e]];
      for (int j = 0; j < m; ++j)
        x->grad[(std::size_t)src[e] * m + j] +=
            w * self.grad[(std::size_t)dst[e] * m + j];
    }
  });
  return out;
}

Tensor edge_scores(const Tensor& q, const Tensor& k, const Tensor& rel_embed,
                   const std::vector<int>& src, const std::vector<int>& dst,
                   const std::vector<int>& rel, double scale) {
  if (q->shape != k->shape || q->shape.size() != 2 ||
      rel_embed->shape.size() != 2 || rel_embed->shape[1] != q->shape[1])
    throw ShapeMismatch("edge_scores: shapes " + shape_str(q->shape) + " / " +
                        shape_str(rel_embed->shape));
  const int m = q->shape[1];
  const std::size_t ne = src.size();
  Tensor out = new_node({(int)ne});
  for (std::size_t e = 0; e < ne; ++e) {
    const double* qa = q->value.data() + (std::size_t)dst[e] * m;
    const double* ka = k->value.data() + (std::size_t)src[e] * m;
    const double* ra = rel_embed->value.data() + (std::size_t)rel[e] * m;
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += qa[j] * (ka[j] + ra[j]);
    out->value[e] = s * scale;
  }
  wire(out, {q, k, rel_embed},
       [q, k, rel_embed, src, dst, rel, scale, m, ne](TensorNode& self) {
         for (std::size_t e = 0; e < ne; ++e) {
           const double g = self.grad[e] * scale;
           const double* qa = q->value.data() + (std::size_t)dst[e] * m;
           const double* ka = k->value.data() + (std::size_t)src[e] * m;
           const double* ra = rel_embed->value.data() + (std::size_t)rel[e] * m;
           if (q->requires_grad) {
             q->ensure_grad();
             double* dq = q->grad.data() + (std::size_t)dst[e] * m;
             for (int j = 0; j < m; ++j) dq[j] += g * (ka[j] + ra[j]);
           }
           if (k->requires_grad) {
             k->ensure_grad();
             double* dk = k->grad.data() + (std::size_t)src[e] * m;
             for (int j = 0; j < m; ++j) dk[j] += g * qa[j];
           }
           if (rel_embed->requires_grad) {
             rel_embed->ensure_grad();
             double* dr = rel_embed->grad.data() + (std::size_t)rel[e] * m;
             for (int j = 0; j < m; ++j) dr[j] += g * qa[j];
           }
         }
       });
  return out;
}

Tensor gated_edge_softmax(const Tensor& scores, const Tensor& gates,
                          const std::vector<int>& src,
                          const std::vector<int>& dst, int num_nodes,
                          double floor) {
  const std::size_t ne = src.size();
  if (scores->size() != ne || scores->shape.size() != 1)
    throw ShapeMismatch("gated_edge_softmax: scores shape");
  if ((int)gates->size() != num_nodes)
    throw ShapeMismatch("gated_edge_softmax: gates size " +
                        std::to_string(gates->size()) + " vs " +
                        std::to_string(num_nodes) + " nodes");
  // Group edges by destination.
  std::vector<double> mx(num_nodes, -1e300);
  for (std::size_t e = 0; e < ne; ++e)
    mx[dst[e]] = std::max(mx[dst[e]], scores->value[e]);
  std::vector<double> z(num_nodes, 0.0);
  std::vector<double> w(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    w[e] = std::exp(scores->value[e] - mx[dst[e]]);
    z[dst[e]] += gates->value[src[e]] * w[e];
  }
  Tensor out = new_node({(int)ne});
  std::vector<double> zf(num_nodes);
  for (int v = 0; v < num_nodes; ++v)
    zf[v] = z[v] + floor * std::exp(std::min(-mx[v], 700.0));
  for (std::size_t e = 0; e < ne; ++e)
    out->value[e] = gates->value[src[e]] * w[e] / zf[dst[e]];
  wire(out, {scores, gates},
       [scores, gates, src, dst, num_nodes, ne](TensorNode& self) {
         // s_grp(v) = sum over edges into v of dL/dalpha_e * alpha_e
         std::vector<double> sgrp(num_nodes, 0.0);
         for (std::size_t e = 0; e < ne; ++e)
           sgrp[dst[e]] += self.grad[e] * self.value[e];
         if (scores->requires_grad) {
           scores->ensure_grad();
           for (std::size_t e = 0; e < ne; ++e)
             scores->grad[e] +=
                 self.value[e] * (self.grad[e] - sgrp[dst[e]]);
         }
         if (gates->requires_grad) {
           gates->ensure_grad();
           for (std::size_t e = 0; e < ne; ++e) {
             const double gu = std::max(gates->value[src[e]], 1e-300);
             gates->grad[src[e]] +=
                 self.value[e] * (self.grad[e] - sgrp[dst[e]]) / gu;
           }
         }
       });
  return out;
}

Tensor edge_weighted_sum(const Tensor& alpha, const Tensor& v,
                         const std::vector<int>& src,
                         const std::vector<int>& dst, int num_nodes) {
  const std::size_t ne = src.size();
  if (alpha->size() != ne || v->shape.size() != 2)
    throw ShapeMismatch("edge_weighted_sum: bad inputs");
  const int m = v->shape[1];
  Tensor out = new_node({num_nodes, m});
  for (std::size_t e = 0; e < ne; ++e) {
    const double a = alpha->value[e];
    const double* vs = v->value.data() + (std::size_t)src[e] * m;
    double* od = out->value.data() + (std::size_t)dst[e] * m;
    for (int j = 0; j < m; ++j) od[j] += a * vs[j];
  }
  wire(out, {alpha, v}, [alpha, v, src, dst, m, ne](TensorNode& self) {
    for (std::size_t e = 0; e < ne; ++e) {
      const double* go = self.grad.data() + (std::size_t)dst[e] * m;
      const double* vs = v->value.data() + (std::size_t)src[e] * m;
      if (alpha->requires_grad) {
        alpha->ensure_grad();
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += go[j] * vs[j];
        alpha->grad[e] += acc;
      }
      if (v->requires_grad) {
        v->ensure_grad();
        double* dv = v->grad.data() + (std::size_t)src[e] * m;
        const double a = alpha->value[e];
        for (int j = 0; j < m; ++j) dv[j] += a * go[j];
      }
    }
  });
  return out;
}

void backward(const Tensor& loss) {
  if (loss->size() != 1)
    throw NonScalarLoss("backward: loss has " + std::to_string(loss->size()) +
                        " elements");
  // Topological sort (children before parents after reversal).
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorNode* p = node->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second)
        stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

}  // namespace g2t

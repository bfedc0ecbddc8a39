#include "backtrack/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <utility>

#include "backtrack/error.hpp"

namespace backtrack {
namespace {

void require_2d(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected 2-d tensor, got " + t.shape_str());
}

// Splits [0, rows) into contiguous chunks, one worker per chunk. Each output
// row is written by exactly one thread, so results are bit-identical to the
// sequential loop regardless of worker count.
template <typename Fn>
void parallel_rows(int rows, std::size_t work_per_row, const Fn& fn) {
  static const int hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = static_cast<int>(std::min<std::size_t>(
      hw, std::max<std::size_t>(1, rows * work_per_row / (1u << 18))));
  if (workers <= 1 || rows < 2) {
    fn(0, rows);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const int chunk = (rows + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(rows, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (std::thread& t : pool) t.join();
}

// c[m x n] += a[m x k] * b[k x n]
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  parallel_rows(m, static_cast<std::size_t>(k) * n, [=](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const double* arow = a + static_cast<std::size_t>(i) * k;
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int p = 0; p < k; ++p) {
        const double aip = arow[p];
        if (aip == 0.0) continue;
        const double* brow = b + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  });
}

// da[m x k] += dc[m x n] * b^T   (b is [k x n])
void matmul_acc_bt(const double* dc, const double* b, double* da, int m, int k, int n) {
  parallel_rows(m, static_cast<std::size_t>(k) * n, [=](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const double* dcrow = dc + static_cast<std::size_t>(i) * n;
      double* darow = da + static_cast<std::size_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        const double* brow = b + static_cast<std::size_t>(p) * n;
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += dcrow[j] * brow[j];
        darow[p] += s;
      }
    }
  });
}

// db[k x n] += a^T * dc   (a is [m x k]); workers own disjoint db row ranges
void matmul_acc_at(const double* a, const double* dc, double* db, int m, int k, int n) {
  parallel_rows(k, static_cast<std::size_t>(m) * n, [=](int lo, int hi) {
    for (int i = 0; i < m; ++i) {
      const double* arow = a + static_cast<std::size_t>(i) * k;
      const double* dcrow = dc + static_cast<std::size_t>(i) * n;
      for (int p = lo; p < hi; ++p) {
        const double aip = arow[p];
        if (aip == 0.0) continue;
        double* dbrow = db + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) dbrow[j] += aip * dcrow[j];
      }
    }
  });
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tape::VarId Tape::push(Tensor value, bool tracked, std::function<void(Tape&, VarId)> backprop) {
  Node n;
  n.value = std::move(value);
  n.tracked = tracked;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(VarId id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

const Tensor& Tape::grad(VarId id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) {
    throw ContractViolation("grad read before backward() reached node " + std::to_string(id));
  }
  return n.grad;
}

void Tape::accumulate(VarId id, const double* g, std::size_t n) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (!node.tracked) return;
  Tensor& buf = grad_buf(id);
  double* dst = buf.data();
  for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
}

Tape::VarId Tape::constant(Tensor v) { return push(std::move(v), false, nullptr); }

Tape::VarId Tape::leaf(Tensor v) { return push(std::move(v), true, nullptr); }

Tape::VarId Tape::param(Parameter& p) {
  VarId id = push(p.value, true, nullptr);
  nodes_.back().bound = &p;
  return id;
}

Tape::VarId Tape::matmul(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_2d(ta, "matmul");
  require_2d(tb, "matmul");
  if (ta.cols() != tb.rows()) {
    throw DimensionError("matmul: inner dims disagree, " + ta.shape_str() + " * " + tb.shape_str());
  }
  const int m = ta.rows(), k = ta.cols(), n = tb.cols();
  Tensor out({m, n});
  matmul_acc(ta.data(), tb.data(), out.data(), m, k, n);
  bool tr = tracked(a) || tracked(b);
  return push(std::move(out), tr, [a, b, m, k, n](Tape& t, VarId self) {
    const double* dc = t.grad(self).data();
    if (t.tracked(a)) {
      matmul_acc_bt(dc, t.value(b).data(), t.grad_buf(a).data(), m, k, n);
    }
    if (t.tracked(b)) {
      matmul_acc_at(t.value(a).data(), dc, t.grad_buf(b).data(), m, k, n);
    }
  });
}

Tape::VarId Tape::add(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) throw DimensionError("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  const double* pb = tb.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
  const std::size_t n = out.size();
  return push(std::move(out), tracked(a) || tracked(b), [a, b, n](Tape& t, VarId self) {
    const double* g = t.grad(self).data();
    t.accumulate(a, g, n);
    t.accumulate(b, g, n);
  });
}

Tape::VarId Tape::add_rowvec(VarId a, VarId row) {
  const Tensor& ta = value(a);
  const Tensor& tr = value(row);
  require_2d(ta, "add_rowvec");
  const int rows = ta.rows(), cols = ta.cols();
  if (static_cast<int>(tr.size()) != cols) {
    throw DimensionError("add_rowvec: row vector size " + tr.shape_str() + " vs cols " + std::to_string(cols));
  }
  Tensor out = ta;
  for (int i = 0; i < rows; ++i) {
    double* orow = out.data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) orow[j] += tr.data()[j];
  }
  return push(std::move(out), tracked(a) || tracked(row), [a, row, rows, cols](Tape& t, VarId self) {
    const double* g = t.grad(self).data();
    t.accumulate(a, g, static_cast<std::size_t>(rows) * cols);
    if (t.tracked(row)) {
      double* dr = t.grad_buf(row).data();
      for (int i = 0; i < rows; ++i) {
        const double* grow = g + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) dr[j] += grow[j];
      }
    }
  });
}

Tape::VarId Tape::sub(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) throw DimensionError("sub: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb.data()[i];
  const std::size_t n = out.size();
  return push(std::move(out), tracked(a) || tracked(b), [a, b, n](Tape& t, VarId self) {
    const double* g = t.grad(self).data();
    t.accumulate(a, g, n);
    if (t.tracked(b)) {
      double* db = t.grad_buf(b).data();
      for (std::size_t i = 0; i < n; ++i) db[i] -= g[i];
    }
  });
}

Tape::VarId Tape::mul(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) throw DimensionError("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb.data()[i];
  const std::size_t n = out.size();
  return push(std::move(out), tracked(a) || tracked(b), [a, b, n](Tape& t, VarId self) {
    const double* g = t.grad(self).data();
    if (t.tracked(a)) {
      double* da = t.grad_buf(a).data();
      const double* vb = t.value(b).data();
      for (std::size_t i = 0; i < n; ++i) da[i] += g[i] * vb[i];
    }
    if (t.tracked(b)) {
      double* db = t.grad_buf(b).data();
      const double* va = t.value(a).data();
      for (std::size_t i = 0; i < n; ++i) db[i] += g[i] * va[i];
    }
  });
}

Tape::VarId Tape::mul_colvec(VarId a, VarId col) {
  const Tensor& ta = value(a);
  const Tensor& tc = value(col);
  require_2d(ta, "mul_colvec");
  const int rows = ta.rows(), cols = ta.cols();
  if (static_cast<int>(tc.size()) != rows) {
    throw DimensionError("mul_colvec: column vector size mismatch");
  }
  Tensor out = ta;
  for (int i = 0; i < rows; ++i) {
    double* orow = out.data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) orow[j] *= tc.data()[i];
  }
  return push(std::move(out), tracked(a) || tracked(col), [a, col, rows, cols](Tape& t, VarId self) {
    const double* g = t.grad(self).data();
    if (t.tracked(a)) {
      double* da = t.grad_buf(a).data();
      const double* vc = t.value(col).data();
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
          da[static_cast<std::size_t>(i) * cols + j] += g[static_cast<std::size_t>(i) * cols + j] * vc[i];
        }
      }
    }
    if (t.tracked(col)) {
      double* dc = t.grad_buf(col).data();
      const double* va = t.value(a).data();
      for (int i = 0; i < rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < cols; ++j) {
          s += g[static_cast<std::size_t>(i) * cols + j] * va[static_cast<std::size_t>(i) * cols + j];
        }
        dc[i] += s;
      }
    }
  });
}

Tape::VarId Tape::scale(VarId a, double k) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= k;
  const std::size_t n = out.size();
  return push(std::move(out), tracked(a), [a, k, n](Tape& t, VarId self) {
    if (!t.tracked(a)) return;
    const double* g = t.grad(self).data();
    double* da = t.grad_buf(a).data();
    for (std::size_t i = 0; i < n; ++i) da[i] += k * g[i];
  });
}

Tape::VarId Tape::add_scalar(VarId a, double k) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += k;
  const std::size_t n = out.size();
  return push(std::move(out), tracked(a), [a, n](Tape& t, VarId self) {
    t.accumulate(a, t.grad(self).data(), n);
  });
}

Tape::VarId Tape::silu(VarId a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    out[i] = ta[i] * sigmoid_scalar(ta[i]);
  }
  const std::size_t n = out.size();
  return push(std::move(out), tracked(a), [a, n](Tape& t, VarId self) {
    if (!t.tracked(a)) return;
    const double* g = t.grad(self).data();
    const double* x = t.value(a).data();
    double* da = t.grad_buf(a).data();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = sigmoid_scalar(x[i]);
      da[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
    }
  });
}

Tape::VarId Tape::sigmoid(VarId a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) out[i] = sigmoid_scalar(ta[i]);
  const std::size_t n = out.size();
  return push(std::move(out), tracked(a), [a, n](Tape& t, VarId self) {
    if (!t.tracked(a)) return;
    const double* g = t.grad(self).data();
    const double* y = t.value(self).data();
    double* da = t.grad_buf(a).data();
    for (std::size_t i = 0; i < n; ++i) da[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Tape::VarId Tape::log_clamped(VarId a, double floor) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) out[i] = std::log(std::max(ta[i], floor));
  const std::size_t n = out.size();
  return push(std::move(out), tracked(a), [a, floor, n](Tape& t, VarId self) {
    if (!t.tracked(a)) return;
    const double* g = t.grad(self).data();
    const double* x = t.value(a).data();
    double* da = t.grad_buf(a).data();
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] > floor) da[i] += g[i] / x[i];
    }
  });
}

Tape::VarId Tape::clamp_min(VarId a, double lo) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) out[i] = std::max(ta[i], lo);
  const std::size_t n = out.size();
  return push(std::move(out), tracked(a), [a, lo, n](Tape& t, VarId self) {
    if (!t.tracked(a)) return;
    const double* g = t.grad(self).data();
    const double* x = t.value(a).data();
    double* da = t.grad_buf(a).data();
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] > lo) da[i] += g[i];
    }
  });
}

Tape::VarId Tape::layer_norm(VarId a, VarId gain, VarId bias, double eps) {
  const Tensor& ta = value(a);
  require_2d(ta, "layer_norm");
  const int rows = ta.rows(), cols = ta.cols();
  if (cols == 0) throw DimensionError("layer_norm: zero-width rows");
  const Tensor& tg = value(gain);
  const Tensor& tb = value(bias);
  if (static_cast<int>(tg.size()) != cols || static_cast<int>(tb.size()) != cols) {
    throw DimensionError("layer_norm: gain/bias size mismatch");
  }
  Tensor out({rows, cols});
  Tensor xhat({rows, cols});
  std::vector<double> inv_std(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) {
    const double* xr = ta.data() + static_cast<std::size_t>(i) * cols;
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += xr[j];
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= cols;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(i)] = is;
    for (int j = 0; j < cols; ++j) {
      const double xh = (xr[j] - mean) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = xh * tg.data()[j] + tb.data()[j];
    }
  }
  bool tr = tracked(a) || tracked(gain) || tracked(bias);
  return push(std::move(out), tr,
              [a, gain, bias, rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                  Tape& t, VarId self) {
    const double* g = t.grad(self).data();
    const double* gn = t.value(gain).data();
    if (t.tracked(gain)) {
      double* dg = t.grad_buf(gain).data();
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
          dg[j] += g[static_cast<std::size_t>(i) * cols + j] * xhat.at(i, j);
        }
      }
    }
    if (t.tracked(bias)) {
      double* db = t.grad_buf(bias).data();
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) db[j] += g[static_cast<std::size_t>(i) * cols + j];
      }
    }
    if (t.tracked(a)) {
      double* da = t.grad_buf(a).data();
      for (int i = 0; i < rows; ++i) {
        const double* grow = g + static_cast<std::size_t>(i) * cols;
        double mean_gy = 0.0, mean_gyx = 0.0;
        for (int j = 0; j < cols; ++j) {
          const double gy = grow[j] * gn[j];
          mean_gy += gy;
          mean_gyx += gy * xhat.at(i, j);
        }
        mean_gy /= cols;
        mean_gyx /= cols;
        const double is = inv_std[static_cast<std::size_t>(i)];
        for (int j = 0; j < cols; ++j) {
          const double gy = grow[j] * gn[j];
          da[static_cast<std::size_t>(i) * cols + j] += (gy - mean_gy - xhat.at(i, j) * mean_gyx) * is;
        }
      }
    }
  });
}

Tape::VarId Tape::softmax_rows(VarId a) {
  const Tensor& ta = value(a);
  require_2d(ta, "softmax_rows");
  const int rows = ta.rows(), cols = ta.cols();
  if (cols < 1) throw DimensionError("softmax_rows: need at least one class");
  Tensor out({rows, cols});
  for (int i = 0; i < rows; ++i) {
    const double* xr = ta.data() + static_cast<std::size_t>(i) * cols;
    double* orow = out.data() + static_cast<std::size_t>(i) * cols;
    double mx = xr[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
      orow[j] = std::exp(xr[j] - mx);
      sum += orow[j];
    }
    for (int j = 0; j < cols; ++j) orow[j] /= sum;
  }
  return push(std::move(out), tracked(a), [a, rows, cols](Tape& t, VarId self) {
    if (!t.tracked(a)) return;
    const double* g = t.grad(self).data();
    const double* y = t.value(self).data();
    double* da = t.grad_buf(a).data();
    for (int i = 0; i < rows; ++i) {
      const double* grow = g + static_cast<std::size_t>(i) * cols;
      const double* yrow = y + static_cast<std::size_t>(i) * cols;
      double dot = 0.0;
      for (int j = 0; j < cols; ++j) dot += grow[j] * yrow[j];
      for (int j = 0; j < cols; ++j) {
        da[static_cast<std::size_t>(i) * cols + j] += (grow[j] - dot) * yrow[j];
      }
    }
  });
}

Tape::VarId Tape::straight_through_sample(VarId probs, Rng& rng) {
  const Tensor& tp = value(probs);
  require_2d(tp, "straight_through_sample");
  const int rows = tp.rows(), cols = tp.cols();
  Tensor out({rows, cols});
  for (int i = 0; i < rows; ++i) {
    const double* prow = tp.data() + static_cast<std::size_t>(i) * cols;
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) sum += prow[j];
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ContractViolation("straight_through_sample: row " + std::to_string(i) +
                              " not normalized (sum=" + std::to_string(sum) + ")");
    }
    const int pick = rng.categorical(std::span<const double>(prow, static_cast<std::size_t>(cols)));
    out.at(i, pick) = 1.0;
  }
  const std::size_t n = out.size();
  // Identity surrogate: the one-hot forward value is treated as the
  // distribution itself in the backward pass.
  return push(std::move(out), tracked(probs), [probs, n](Tape& t, VarId self) {
    t.accumulate(probs, t.grad(self).data(), n);
  });
}

Tape::VarId Tape::argmax_onehot(VarId probs) {
  const Tensor& tp = value(probs);
  require_2d(tp, "argmax_onehot");
  const int rows = tp.rows(), cols = tp.cols();
  Tensor out({rows, cols});
  for (int i = 0; i < rows; ++i) {
    const double* prow = tp.data() + static_cast<std::size_t>(i) * cols;
    int best = 0;
    for (int j = 1; j < cols; ++j) {
      if (prow[j] > prow[best]) best = j;  // ties resolve to the lowest index
    }
    out.at(i, best) = 1.0;
  }
  const std::size_t n = out.size();
  return push(std::move(out), tracked(probs), [probs, n](Tape& t, VarId self) {
    t.accumulate(probs, t.grad(self).data(), n);
  });
}

Tape::VarId Tape::sum(VarId a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) s += ta[i];
  const std::size_t n = ta.size();
  return push(Tensor::scalar(s), tracked(a), [a, n](Tape& t, VarId self) {
    if (!t.tracked(a)) return;
    const double g = t.grad(self)[0];
    double* da = t.grad_buf(a).data();
    for (std::size_t i = 0; i < n; ++i) da[i] += g;
  });
}

Tape::VarId Tape::mean(VarId a) {
  const std::size_t n = value(a).size();
  if (n == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Tape::VarId Tape::reshape(VarId a, std::vector<int> shape) {
  const Tensor& ta = value(a);
  if (shape_product(shape) != ta.size()) {
    throw DimensionError("reshape: size mismatch for " + ta.shape_str());
  }
  Tensor out(std::move(shape), ta.values());
  const std::size_t n = out.size();
  return push(std::move(out), tracked(a), [a, n](Tape& t, VarId self) {
    t.accumulate(a, t.grad(self).data(), n);
  });
}

Tape::VarId Tape::concat_cols(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_2d(ta, "concat_cols");
  require_2d(tb, "concat_cols");
  if (ta.rows() != tb.rows()) throw DimensionError("concat_cols: row count mismatch");
  const int rows = ta.rows(), ca = ta.cols(), cb = tb.cols();
  Tensor out({rows, ca + cb});
  for (int i = 0; i < rows; ++i) {
    double* orow = out.data() + static_cast<std::size_t>(i) * (ca + cb);
    const double* arow = ta.data() + static_cast<std::size_t>(i) * ca;
    const double* brow = tb.data() + static_cast<std::size_t>(i) * cb;
    std::copy(arow, arow + ca, orow);
    std::copy(brow, brow + cb, orow + ca);
  }
  return push(std::move(out), tracked(a) || tracked(b), [a, b, rows, ca, cb](Tape& t, VarId self) {
    const double* g = t.grad(self).data();
    if (t.tracked(a)) {
      double* da = t.grad_buf(a).data();
      for (int i = 0; i < rows; ++i) {
        const double* grow = g + static_cast<std::size_t>(i) * (ca + cb);
        for (int j = 0; j < ca; ++j) da[static_cast<std::size_t>(i) * ca + j] += grow[j];
      }
    }
    if (t.tracked(b)) {
      double* db = t.grad_buf(b).data();
      for (int i = 0; i < rows; ++i) {
        const double* grow = g + static_cast<std::size_t>(i) * (ca + cb);
        for (int j = 0; j < cb; ++j) db[static_cast<std::size_t>(i) * cb + j] += grow[ca + j];
      }
    }
  });
}

Tape::VarId Tape::gather_rows(VarId a, std::vector<int> index) {
  const Tensor& ta = value(a);
  require_2d(ta, "gather_rows");
  const int rows = ta.rows(), cols = ta.cols();
  if (static_cast<int>(index.size()) != rows) throw DimensionError("gather_rows: index size mismatch");
  Tensor out({rows});
  for (int i = 0; i < rows; ++i) {
    const int j = index[static_cast<std::size_t>(i)];
    if (j < 0 || j >= cols) throw DimensionError("gather_rows: index out of range");
    out[static_cast<std::size_t>(i)] = ta.at(i, j);
  }
  return push(std::move(out), tracked(a), [a, cols, rows, index = std::move(index)](Tape& t, VarId self) {
    if (!t.tracked(a)) return;
    const double* g = t.grad(self).data();
    double* da = t.grad_buf(a).data();
    for (int i = 0; i < rows; ++i) {
      da[static_cast<std::size_t>(i) * cols + index[static_cast<std::size_t>(i)]] += g[i];
    }
  });
}

Tape::VarId Tape::bce_with_logits(VarId logits, VarId targets) {
  const Tensor& tl = value(logits);
  const Tensor& tt = value(targets);
  require_2d(tl, "bce_with_logits");
  if (!tl.same_shape(tt)) throw DimensionError("bce_with_logits: shape mismatch");
  const int rows = tl.rows(), cols = tl.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < tl.size(); ++i) {
    const double l = tl[i], y = tt[i];
    total += std::max(l, 0.0) - l * y + std::log1p(std::exp(-std::abs(l)));
  }
  total /= rows;
  return push(Tensor::scalar(total), tracked(logits), [logits, targets, rows, cols](Tape& t, VarId self) {
    if (!t.tracked(logits)) return;
    const double g = t.grad(self)[0] / rows;
    const double* l = t.value(logits).data();
    const double* y = t.value(targets).data();
    double* dl = t.grad_buf(logits).data();
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    for (std::size_t i = 0; i < n; ++i) {
      dl[i] += g * (sigmoid_scalar(l[i]) - y[i]);
    }
  });
}

void Tape::backward(VarId root) {
  const Node& r = node(root);
  if (r.value.size() != 1) {
    throw ContractViolation("backward: root must be scalar, got " + r.value.shape_str());
  }
  grad_buf(root).fill(1.0);
  for (VarId id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.tracked || n.grad.size() == 0) continue;
    if (n.backprop) n.backprop(*this, id);
    if (n.bound != nullptr) {
      double* dst = n.bound->grad.data();
      const double* src = n.grad.data();
      for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += src[i];
    }
  }
}

}  // namespace backtrack

#include "triage/nn/kernels.hpp"

#include <cstdint>

#include "triage/error.hpp"

namespace triage::nn::kernels {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = 1 << 15;

void check_dense_shapes(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2 || x.rank() != 1 || b.rank() != 1 || w.dim(1) != x.dim(0) || w.dim(0) != b.dim(0)) {
    throw ShapeError("dense: weights " + shape_string(w.shape()) + ", input " + shape_string(x.shape()) +
                     ", bias " + shape_string(b.shape()) + " do not agree");
  }
}

inline double conv_at(const Tensor& x, const Tensor& f, std::size_t i, std::size_t m, std::size_t h,
                      std::size_t k) {
  const double* fm = &f[m * h * k];
  const double* xi = &x[i * k];
  double acc = 0.0;
  for (std::size_t t = 0; t < h * k; ++t) acc += xi[t] * fm[t];
  return acc;
}

}  // namespace

void check_conv_shapes(const Tensor& x, const Tensor& filters, const Tensor& bias) {
  if (x.rank() != 2 || filters.rank() != 3 || bias.rank() != 1) {
    throw ShapeError("conv1d expects x (n x k), filters (M x h x k) and bias (M)");
  }
  const std::size_t n = x.dim(0), k = x.dim(1), h = filters.dim(1);
  if (filters.dim(2) != k) {
    throw ShapeError("conv1d: filter width " + std::to_string(filters.dim(2)) + " != input width " + std::to_string(k));
  }
  if (bias.dim(0) != filters.dim(0)) throw ShapeError("conv1d: bias length != number of filters");
  if (h < 1 || h > n) {
    throw ShapeError("conv1d: filter height " + std::to_string(h) + " exceeds sequence length " + std::to_string(n));
  }
}

// Rows of x that a window starting at i covers are contiguous (i*k .. (i+h)*k),
// so each output is one dot product of length h*k.
Tensor conv1d_forward_serial(const Tensor& x, const Tensor& filters, const Tensor& bias) {
  check_conv_shapes(x, filters, bias);
  const std::size_t n = x.dim(0), k = x.dim(1), m_count = filters.dim(0), h = filters.dim(1);
  const std::size_t len = n - h + 1;
  Tensor out = Tensor::matrix(len, m_count);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t m = 0; m < m_count; ++m) out.at(i, m) = conv_at(x, filters, i, m, h, k) + bias[m];
  }
  return out;
}

Tensor conv1d_forward(const Tensor& x, const Tensor& filters, const Tensor& bias) {
  check_conv_shapes(x, filters, bias);
  const std::size_t n = x.dim(0), k = x.dim(1), m_count = filters.dim(0), h = filters.dim(1);
  const std::size_t len = n - h + 1;
  Tensor out = Tensor::matrix(len, m_count);
  const auto rows = static_cast<std::int64_t>(len);
#pragma omp parallel for schedule(static) if (len * m_count * h * k >= kParallelWork)
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    for (std::size_t m = 0; m < m_count; ++m) out.at(i, m) = conv_at(x, filters, i, m, h, k) + bias[m];
  }
  return out;
}

Tensor conv1d_backward_serial(const Tensor& x, const Tensor& filters, const Tensor& dy, Tensor& dfilters,
                              Tensor& dbias) {
  check_conv_shapes(x, filters, dbias);
  const std::size_t n = x.dim(0), k = x.dim(1), m_count = filters.dim(0), h = filters.dim(1);
  const std::size_t len = n - h + 1;
  if (dy.rank() != 2 || dy.dim(0) != len || dy.dim(1) != m_count || !dfilters.same_shape(filters)) {
    throw ShapeError("conv1d backward: gradient shape mismatch");
  }
  Tensor dx = Tensor::matrix(n, k);
  for (std::size_t m = 0; m < m_count; ++m) {
    double* df = &dfilters[m * h * k];
    for (std::size_t i = 0; i < len; ++i) {
      const double g = dy.at(i, m);
      dbias[m] += g;
      const double* xi = &x[i * k];
      for (std::size_t t = 0; t < h * k; ++t) df[t] += g * xi[t];
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < h; ++j) {
      if (r < j || r - j >= len) continue;
      const std::size_t i = r - j;
      for (std::size_t m = 0; m < m_count; ++m) {
        const double g = dy.at(i, m);
        const double* f = &filters[(m * h + j) * k];
        for (std::size_t c = 0; c < k; ++c) dx.at(r, c) += g * f[c];
      }
    }
  }
  return dx;
}

Tensor conv1d_backward(const Tensor& x, const Tensor& filters, const Tensor& dy, Tensor& dfilters,
                       Tensor& dbias) {
  check_conv_shapes(x, filters, dbias);
  const std::size_t n = x.dim(0), k = x.dim(1), m_count = filters.dim(0), h = filters.dim(1);
  const std::size_t len = n - h + 1;
  if (dy.rank() != 2 || dy.dim(0) != len || dy.dim(1) != m_count || !dfilters.same_shape(filters)) {
    throw ShapeError("conv1d backward: gradient shape mismatch");
  }
  Tensor dx = Tensor::matrix(n, k);
  const bool parallel = len * m_count * h * k >= kParallelWork;
  const auto filters_count = static_cast<std::int64_t>(m_count);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t mi = 0; mi < filters_count; ++mi) {
    const auto m = static_cast<std::size_t>(mi);
    double* df = &dfilters[m * h * k];
    for (std::size_t i = 0; i < len; ++i) {
      const double g = dy.at(i, m);
      dbias[m] += g;
      const double* xi = &x[i * k];
      for (std::size_t t = 0; t < h * k; ++t) df[t] += g * xi[t];
    }
  }
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t ri = 0; ri < rows; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    for (std::size_t j = 0; j < h; ++j) {
      if (r < j || r - j >= len) continue;
      const std::size_t i = r - j;
      for (std::size_t m = 0; m < m_count; ++m) {
        const double g = dy.at(i, m);
        const double* f = &filters[(m * h + j) * k];
        for (std::size_t c = 0; c < k; ++c) dx.at(r, c) += g * f[c];
      }
    }
  }
  return dx;
}

void conv1d_backward_params(const Tensor& x, const Tensor& dy, Tensor& dfilters, Tensor& dbias) {
  if (x.rank() != 2 || dy.rank() != 2 || dfilters.rank() != 3 || dfilters.dim(2) != x.dim(1) ||
      dy.dim(1) != dfilters.dim(0) || dbias.size() != dfilters.dim(0) ||
      dy.dim(0) + dfilters.dim(1) != x.dim(0) + 1) {
    throw ShapeError("conv1d backward: gradient shape mismatch");
  }
  const std::size_t k = x.dim(1), m_count = dfilters.dim(0), h = dfilters.dim(1), len = dy.dim(0);
  for (std::size_t i = 0; i < len; ++i) {
    const double* xi = &x[i * k];
    for (std::size_t m = 0; m < m_count; ++m) {
      const double g = dy.at(i, m);
      if (g == 0.0) continue;
      dbias[m] += g;
      double* df = &dfilters[m * h * k];
      for (std::size_t t = 0; t < h * k; ++t) df[t] += g * xi[t];
    }
  }
}

Tensor dense_forward_serial(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_dense_shapes(x, w, b);
  const std::size_t out_dim = w.dim(0), in_dim = w.dim(1);
  Tensor y = Tensor::vector(out_dim);
  for (std::size_t o = 0; o < out_dim; ++o) {
    double acc = 0.0;
    for (std::size_t i = 0; i < in_dim; ++i) acc += w.at(o, i) * x[i];
    y[o] = acc + b[o];
  }
  return y;
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_dense_shapes(x, w, b);
  const std::size_t out_dim = w.dim(0), in_dim = w.dim(1);
  Tensor y = Tensor::vector(out_dim);
  const auto rows = static_cast<std::int64_t>(out_dim);
#pragma omp parallel for schedule(static) if (out_dim * in_dim >= kParallelWork)
  for (std::int64_t oi = 0; oi < rows; ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    double acc = 0.0;
    for (std::size_t i = 0; i < in_dim; ++i) acc += w.at(o, i) * x[i];
    y[o] = acc + b[o];
  }
  return y;
}

Tensor dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dw, Tensor& db) {
  check_dense_shapes(x, w, db);
  const std::size_t out_dim = w.dim(0), in_dim = w.dim(1);
  if (dy.size() != out_dim || !dw.same_shape(w)) throw ShapeError("dense backward: gradient shape mismatch");
  Tensor dx = Tensor::vector(in_dim);
  for (std::size_t o = 0; o < out_dim; ++o) {
    const double g = dy[o];
    db[o] += g;
    for (std::size_t i = 0; i < in_dim; ++i) {
      dw.at(o, i) += g * x[i];
      dx[i] += g * w.at(o, i);
    }
  }
  return dx;
}

}  // namespace triage::nn::kernels

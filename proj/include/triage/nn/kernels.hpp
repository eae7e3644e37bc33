#pragma once

#include <span>

#include "triage/nn/tensor.hpp"

// Data-parallel inner loops. Each kernel has an OpenMP version and a plain
// serial reference; both visit every output element with the same
// arithmetic order, so results are bit-identical regardless of thread count.
namespace triage::nn::kernels {

// x: n x k, filters: M x h x k, bias: M. Returns (n - h + 1) x M with
// out(i, m) = sum_{j<h, c<k} x(i + j, c) * filters(m, j, c) + bias(m).
Tensor conv1d_forward(const Tensor& x, const Tensor& filters, const Tensor& bias);
Tensor conv1d_forward_serial(const Tensor& x, const Tensor& filters, const Tensor& bias);

// Accumulates into dfilters / dbias and returns dx (n x k).
Tensor conv1d_backward(const Tensor& x, const Tensor& filters, const Tensor& dy, Tensor& dfilters,
                       Tensor& dbias);
Tensor conv1d_backward_serial(const Tensor& x, const Tensor& filters, const Tensor& dy, Tensor& dfilters,
                              Tensor& dbias);

// Parameter gradients only; rows of dy that are entirely zero are skipped,
// which is the common case behind max-over-time pooling.
void conv1d_backward_params(const Tensor& x, const Tensor& dy, Tensor& dfilters, Tensor& dbias);

// w: out x in. y = w x + b.
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor dense_forward_serial(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dw, Tensor& db);

// Shape checks shared by both conv paths; throws ShapeError.
void check_conv_shapes(const Tensor& x, const Tensor& filters, const Tensor& bias);

}  // namespace triage::nn::kernels

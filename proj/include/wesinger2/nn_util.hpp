#pragma once

#include "wesinger2/dsp_features.hpp"

#include <torch/torch.h>

#include <cstdint>

namespace wesinger2 {

inline constexpr double kLeakySlope = 0.1;

inline torch::Tensor leaky(const torch::Tensor& x) { return torch::leaky_relu(x, kLeakySlope); }

/// Padding that keeps the length of a stride-1 convolution.
inline std::int64_t same_padding(std::int64_t kernel, std::int64_t dilation = 1) {
  return (kernel - 1) * dilation / 2;
}

/// Sinusoidal position table [length, channels].
torch::Tensor sinusoid_positions(std::int64_t length, std::int64_t channels, torch::TensorOptions options);

/// [frames, bands] tensor (float64) from a row-major Eigen matrix.
torch::Tensor to_tensor(const RowMatrix& m);
RowMatrix to_matrix(const torch::Tensor& t);

std::int64_t count_parameters(const torch::nn::Module& module);

/// Row-wise mean over valid positions. x: [B, T, C], mask: [B, T] bool.
torch::Tensor masked_mean_time(const torch::Tensor& x, const torch::Tensor& mask);

}  // namespace wesinger2

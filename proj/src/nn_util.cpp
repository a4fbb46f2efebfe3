#include "wesinger2/nn_util.hpp"

#include <cmath>

namespace wesinger2 {

torch::Tensor sinusoid_positions(std::int64_t length, std::int64_t channels, torch::TensorOptions options) {
  auto pos = torch::arange(length, options).unsqueeze(1);
  auto idx = torch::arange(channels, options);
  auto rates = torch::exp(-std::log(10000.0) * (2.0 * torch::floor(idx / 2.0)) / static_cast<double>(channels));
  auto angles = pos * rates.unsqueeze(0);
  auto even = (torch::fmod(idx, 2.0) == 0).unsqueeze(0);
  return torch::where(even, torch::sin(angles), torch::cos(angles));
}

torch::Tensor to_tensor(const RowMatrix& m) {
  return torch::from_blob(const_cast<double*>(m.data()), {m.rows(), m.cols()}, torch::kFloat64).clone();
}

RowMatrix to_matrix(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  RowMatrix m(c.size(0), c.size(1));
  std::copy(c.data_ptr<double>(), c.data_ptr<double>() + c.numel(), m.data());
  return m;
}

std::int64_t count_parameters(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

torch::Tensor masked_mean_time(const torch::Tensor& x, const torch::Tensor& mask) {
  auto m = mask.to(x.dtype()).unsqueeze(-1);
  return (x * m).sum(1) / m.sum(1).clamp_min(1.0);
}

}  // namespace wesinger2

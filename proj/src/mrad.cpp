#include "wesinger2/mrad.hpp"

#include "wesinger2/dsp_features.hpp"
#include "wesinger2/error.hpp"
#include "wesinger2/nn_util.hpp"

namespace wesinger2 {

RegionSpec sample_region(int critic, int frames, std::mt19937_64& rng, int n_bands) {
  if (critic < 0 || critic >= kNumRegionCritics) fail(ErrorCode::ShapeMismatch, "critic index out of range");
  const int h = kRegionHeights[static_cast<std::size_t>(critic)];
  const int w = kRegionWidths[static_cast<std::size_t>(critic)];
  if (n_bands < h) fail(ErrorCode::InsufficientFrames, "mel has fewer bands than the region height");
  if (frames < w)
    fail(ErrorCode::InsufficientFrames,
         "critic " + std::to_string(critic) + " needs " + std::to_string(w) + " frames, got " + std::to_string(frames));
  std::uniform_int_distribution<int> top(0, n_bands - h);
  std::uniform_int_distribution<int> left(0, frames - w);
  RegionSpec r;
  r.height = h;
  r.width = w;
  r.top = top(rng);
  r.left = left(rng);
  return r;
}

torch::Tensor extract_patch(const torch::Tensor& mel, const RegionSpec& r) {
  return mel.narrow(1, r.left, r.width).narrow(2, r.top, r.height).transpose(1, 2);
}

void MradConfig::validate() const {
  if (channels.back() != 1) fail(ErrorCode::InvalidConfig, "last MRAD conv layer must emit one channel");
  if (strided_layers < 0 || strided_layers > 6) fail(ErrorCode::InvalidConfig, "strided layer count out of range");
  if (n_singers < 1 || singer_embed < 1) fail(ErrorCode::InvalidConfig, "MRAD needs a singer table");
  if (lambda_adv < 0.0 || lambda_adv_finetune < 0.0 || lambda_l1 < 0.0) fail(ErrorCode::InvalidConfig, "loss weights must be non-negative");
  if (n_bands < kRegionHeights.back()) fail(ErrorCode::InvalidConfig, "too few mel bands for the region heights");
}

RegionCriticImpl::RegionCriticImpl(const MradConfig& cfg, int height, int width) : height_(height), width_(width) {
  convs_ = register_module("convs", torch::nn::ModuleList());
  int in = 1;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    const int stride = static_cast<int>(i) < cfg.strided_layers ? 2 : 1;
    convs_->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, cfg.channels[i], cfg.kernel).stride(stride).padding(cfg.kernel / 2)));
    in = cfg.channels[i];
  }
}

torch::Tensor RegionCriticImpl::forward(const torch::Tensor& patch, const torch::Tensor& singer_bias) {
  auto x = patch.unsqueeze(1);
  const auto n = convs_->size();
  for (std::size_t i = 0; i < n; ++i) {
    x = convs_[i]->as<torch::nn::Conv2d>()->forward(x);
    if (i == 0 && singer_bias.defined()) x = x + singer_bias.unsqueeze(-1).unsqueeze(-1);
    if (i + 1 < n) x = leaky(x);
  }
  return x.mean({1, 2, 3});
}

MradEnsembleImpl::MradEnsembleImpl(const MradConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  singer_emb_ = register_module("singer_emb", torch::nn::Embedding(cfg_.n_singers, cfg_.singer_embed));
  singer_proj_ = register_module("singer_proj", torch::nn::Linear(cfg_.singer_embed, cfg_.channels[0] * kNumRegionCritics));
  critics_ = register_module("critics", torch::nn::ModuleList());
  for (int i = 0; i < kNumRegionCritics; ++i)
    critics_->push_back(RegionCritic(cfg_, kRegionHeights[static_cast<std::size_t>(i)],
                                     kRegionWidths[static_cast<std::size_t>(i)]));
}

torch::Tensor MradEnsembleImpl::score(int critic, const torch::Tensor& patch, const torch::Tensor& singer) {
  if (critic < 0 || critic >= kNumRegionCritics) fail(ErrorCode::ShapeMismatch, "critic index out of range");
  auto net = critics_[static_cast<std::size_t>(critic)]->as<RegionCritic>();
  if (patch.dim() != 3 || patch.size(1) != net->height() || patch.size(2) != net->width())
    fail(ErrorCode::ShapeMismatch, "critic " + std::to_string(critic) + " expects [B, " +
                                       std::to_string(net->height()) + ", " + std::to_string(net->width()) + "] patches");
  torch::Tensor bias;
  if (cfg_.conditional) {
    if (singer.min().item<std::int64_t>() < 0 || singer.max().item<std::int64_t>() >= cfg_.n_singers)
      fail(ErrorCode::UnknownSinger, "singer index outside the MRAD table");
    const auto c0 = cfg_.channels[0];
    bias = singer_proj_(singer_emb_(singer)).narrow(1, static_cast<std::int64_t>(critic) * c0, c0);
  }
  return net->forward(patch, bias);
}

torch::Tensor masked_l1(const torch::Tensor& x, const torch::Tensor& y, const torch::Tensor& frame_mask) {
  if (x.sizes() != y.sizes()) fail(ErrorCode::ShapeMismatch, "L1 operands differ in shape");
  auto m = frame_mask.to(x.dtype()).unsqueeze(-1);
  return ((x - y).abs() * m).sum() / (m.sum() * x.size(2)).clamp_min(1.0);
}

torch::Tensor mrad_loss_d(PatchCritic& critics, const torch::Tensor& real, const torch::Tensor& fake,
                          const torch::Tensor& singer, int frames, std::mt19937_64& rng, MradScores* scores) {
  if (real.sizes() != fake.sizes()) fail(ErrorCode::ShapeMismatch, "real and fake mels differ in shape");
  const int bands = static_cast<int>(std::min<std::int64_t>(real.size(2), kMelBands));
  const auto real_mel = real.narrow(2, 0, bands);
  const auto fake_mel = fake.detach().narrow(2, 0, bands);
  torch::Tensor total = torch::zeros({}, real.options());
  bool any = false;
  for (int i = 0; i < kNumRegionCritics; ++i) {
    if (frames < kRegionWidths[static_cast<std::size_t>(i)]) continue;
    const auto region = sample_region(i, frames, rng, bands);
    auto d_real = critics.score(i, extract_patch(real_mel, region), singer);
    auto d_fake = critics.score(i, extract_patch(fake_mel, region), singer);
    total = total + (d_real - 1.0).pow(2).mean() + d_fake.pow(2).mean();
    any = true;
    if (scores) {
      scores->active[i] = true;
      scores->regions[i] = region;
      scores->real_mean[i] = d_real.mean().item<double>();
      scores->fake_mean[i] = d_fake.mean().item<double>();
    }
  }
  if (!any) fail(ErrorCode::InsufficientFrames, "segment shorter than every region width");
  return total;
}

GeneratorLossParts mrad_loss_g(PatchCritic& critics, const torch::Tensor& fake, const torch::Tensor& real,
                               const torch::Tensor& frame_mask, const torch::Tensor& singer, double lambda_adv,
                               double lambda_l1, int frames, std::mt19937_64& rng, MradScores* scores) {
  if (real.sizes() != fake.sizes()) fail(ErrorCode::ShapeMismatch, "real and fake mels differ in shape");
  const int bands = static_cast<int>(std::min<std::int64_t>(fake.size(2), kMelBands));
  GeneratorLossParts parts;
  parts.adversarial = torch::zeros({}, fake.options());
  bool any = false;
  for (int i = 0; i < kNumRegionCritics; ++i) {
    if (frames < kRegionWidths[static_cast<std::size_t>(i)]) continue;
    const auto region = sample_region(i, frames, rng, bands);
    auto d_fake = critics.score(i, extract_patch(fake.narrow(2, 0, bands), region), singer);
    parts.adversarial = parts.adversarial + (d_fake - 1.0).pow(2).mean();
    any = true;
    if (scores) {
      scores->active[i] = true;
      scores->regions[i] = region;
      scores->fake_mean[i] = d_fake.mean().item<double>();
    }
  }
  if (!any) fail(ErrorCode::InsufficientFrames, "segment shorter than every region width");
  parts.l1 = masked_l1(fake, real, frame_mask);
  parts.total = lambda_adv * parts.adversarial + lambda_l1 * parts.l1;
  return parts;
}

ProgressiveLosses progressive_loss_d(PatchCritic& critics, const std::vector<torch::Tensor>& blocks,
                                     const torch::Tensor& target, const torch::Tensor& singer, int frames,
                                     std::mt19937_64& rng) {
  if (blocks.empty()) fail(ErrorCode::EmptyInput, "no block outputs");
  ProgressiveLosses out;
  out.d_total = torch::zeros({}, target.options());
  for (const auto& block : blocks) {
    if (block.sizes() != target.sizes()) fail(ErrorCode::FrameMismatch, "block output and target differ in shape");
    MradScores s;
    out.d_total = out.d_total + mrad_loss_d(critics, target, block.detach(), singer, frames, rng, &s);
    out.scores.push_back(s);
  }
  return out;
}

ProgressiveLosses progressive_loss_g(PatchCritic& critics, const std::vector<torch::Tensor>& blocks,
                                     const torch::Tensor& target, const torch::Tensor& frame_mask,
                                     const torch::Tensor& singer, double lambda_adv, double lambda_l1, int frames,
                                     std::mt19937_64& rng) {
  if (blocks.empty()) fail(ErrorCode::EmptyInput, "no block outputs");
  ProgressiveLosses out;
  out.g_total = torch::zeros({}, target.options());
  out.l1_total = torch::zeros({}, target.options());
  out.adv_total = torch::zeros({}, target.options());
  for (const auto& block : blocks) {
    if (block.sizes() != target.sizes()) fail(ErrorCode::FrameMismatch, "block output and target differ in shape");
    MradScores s;
    auto parts = mrad_loss_g(critics, block, target, frame_mask, singer, lambda_adv, lambda_l1, frames, rng, &s);
    out.g_total = out.g_total + parts.total;
    out.l1_total = out.l1_total + parts.l1;
    out.adv_total = out.adv_total + parts.adversarial;
    out.scores.push_back(s);
  }
  return out;
}

ProgressiveLosses progressive_losses(PatchCritic& critics, const std::vector<torch::Tensor>& blocks,
                                     const torch::Tensor& target, const torch::Tensor& frame_mask,
                                     const torch::Tensor& singer, double lambda_adv, double lambda_l1, int frames,
                                     std::mt19937_64& rng) {
  auto d = progressive_loss_d(critics, blocks, target, singer, frames, rng);
  auto g = progressive_loss_g(critics, blocks, target, frame_mask, singer, lambda_adv, lambda_l1, frames, rng);
  g.d_total = d.d_total;
  return g;
}

}  // namespace wesinger2

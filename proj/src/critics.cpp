#include "wesinger2/critics.hpp"

#include "wesinger2/error.hpp"
#include "wesinger2/nn_util.hpp"

#include <cmath>

namespace wesinger2 {

namespace F = torch::nn::functional;

void CriticConfig::validate() const {
  if (!use_msd && !use_mpd && !use_mld) fail(ErrorCode::InvalidConfig, "at least one critic family is required");
  if (n_singers < 1 || singer_embed < 1) fail(ErrorCode::InvalidConfig, "singer table must be non-empty");
  if (sample_rate < 1 || min_seconds <= 0.0) fail(ErrorCode::InvalidConfig, "bad critic sample rate / minimum length");
  if (msd_scales < 1 || msd_channels.size() < 3) fail(ErrorCode::InvalidConfig, "scale critic needs >= 3 layers");
  if (mpd_periods.empty() || mpd_channels.size() < 3) fail(ErrorCode::InvalidConfig, "period critic needs >= 3 layers");
  if (mld_crop_seconds.empty() || mld_channels.size() < 3)
    fail(ErrorCode::InvalidConfig, "length critic needs >= 3 layers");
  const auto min_layers = std::min({msd_channels.size(), mpd_channels.size(), mld_channels.size()});
  if (injection_layer < 1 || injection_layer > static_cast<int>(min_layers))
    fail(ErrorCode::InvalidConfig, "injection layer outside the conv stack");
  for (int p : mpd_periods)
    if (p < 2) fail(ErrorCode::InvalidConfig, "periods must be >= 2");
  for (std::size_t i = 1; i + 1 < msd_channels.size(); ++i)
    if (msd_channels[i] % std::max(1, msd_channels[i - 1] / 4) != 0)
      fail(ErrorCode::InvalidConfig, "scale critic channels incompatible with grouped convolutions");
}

int CriticConfig::n_subcritics() const {
  int n = 0;
  if (use_msd) n += msd_scales;
  if (use_mpd) n += static_cast<int>(mpd_periods.size());
  if (use_mld) n += static_cast<int>(mld_crop_seconds.size());
  return n;
}

std::int64_t CriticConfig::min_samples() const { return std::llround(min_seconds * sample_rate); }

CriticConfig CriticConfig::full(int n_singers) {
  CriticConfig c;
  c.n_singers = n_singers;
  return c;
}

CriticConfig CriticConfig::desk(int n_singers) {
  CriticConfig c;
  c.n_singers = n_singers;
  c.singer_embed = 32;
  c.msd_channels = {16, 32, 64, 64, 64, 64};
  c.mpd_channels = {8, 16, 32, 32, 32};
  c.mld_channels = {16, 32, 32, 32, 32};
  return c;
}

CropPlan plan_crops(const CriticConfig& cfg, std::int64_t length, std::mt19937_64& rng) {
  CropPlan plan;
  for (double s : cfg.mld_crop_seconds) {
    const std::int64_t crop = std::min<std::int64_t>(length, std::llround(s * cfg.sample_rate));
    std::uniform_int_distribution<std::int64_t> pick(0, std::max<std::int64_t>(0, length - crop));
    plan.offsets.push_back(pick(rng));
    plan.lengths.push_back(crop);
  }
  return plan;
}

torch::Tensor period_grid(const torch::Tensor& wave, int period) {
  auto x = wave.dim() == 1 ? wave.unsqueeze(0) : wave;
  const auto len = x.size(1);
  const auto rem = len % period;
  if (rem != 0) {
    const auto pad = period - rem;
    x = F::pad(x.unsqueeze(1), F::PadFuncOptions({0, pad}).mode(torch::kReflect)).squeeze(1);
  }
  return x.view({x.size(0), 1, x.size(1) / period, period});
}

WaveConvCriticImpl::WaveConvCriticImpl(const std::vector<Layer>& layers, int injection_layer, int singer_embed,
                                       bool conditional)
    : injection_layer_(injection_layer) {
  convs_ = register_module("convs", torch::nn::ModuleList());
  int in = 1;
  for (const auto& l : layers) {
    convs_->push_back(torch::nn::Conv1d(torch::nn::Conv1dOptions(in, l.out, l.kernel)
                                            .stride(l.stride)
                                            .groups(l.groups)
                                            .dilation(l.dilation)
                                            .padding(same_padding(l.kernel, l.dilation))));
    in = l.out;
  }
  post_ = register_module("post", torch::nn::Conv1d(torch::nn::Conv1dOptions(in, 1, 3).padding(1)));
  if (conditional)
    cond_ = register_module("cond", torch::nn::Linear(singer_embed, layers[injection_layer - 1].out));
}

torch::Tensor WaveConvCriticImpl::forward(const torch::Tensor& x, const torch::Tensor& singer_emb) {
  auto h = x;
  for (std::size_t i = 0; i < convs_->size(); ++i) {
    h = convs_[i]->as<torch::nn::Conv1d>()->forward(h);
    if (static_cast<int>(i) + 1 == injection_layer_ && cond_) h = h + cond_(singer_emb).unsqueeze(-1);
    h = leaky(h);
  }
  return post_(h).mean({1, 2});
}

PeriodCriticImpl::PeriodCriticImpl(int period, const std::vector<int>& channels, int injection_layer,
                                   int singer_embed, bool conditional)
    : period_(period), injection_layer_(injection_layer) {
  convs_ = register_module("convs", torch::nn::ModuleList());
  int in = 1;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const int stride = i + 1 < channels.size() ? 3 : 1;
    convs_->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, channels[i], {5, 1}).stride({stride, 1}).padding({2, 0})));
    in = channels[i];
  }
  post_ = register_module("post", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, {3, 1}).padding({1, 0})));
  if (conditional) cond_ = register_module("cond", torch::nn::Linear(singer_embed, channels[injection_layer - 1]));
}

torch::Tensor PeriodCriticImpl::forward(const torch::Tensor& wave, const torch::Tensor& singer_emb) {
  auto h = period_grid(wave, period_);
  for (std::size_t i = 0; i < convs_->size(); ++i) {
    h = convs_[i]->as<torch::nn::Conv2d>()->forward(h);
    if (static_cast<int>(i) + 1 == injection_layer_ && cond_)
      h = h + cond_(singer_emb).unsqueeze(-1).unsqueeze(-1);
    h = leaky(h);
  }
  return post_(h).mean({1, 2, 3});
}

namespace {

std::vector<WaveConvCriticImpl::Layer> scale_layers(const std::vector<int>& ch) {
  std::vector<WaveConvCriticImpl::Layer> layers;
  layers.push_back({ch[0], 15, 1, 1, 1});
  for (std::size_t i = 1; i + 1 < ch.size(); ++i) layers.push_back({ch[i], 41, 4, std::max(1, ch[i - 1] / 4), 1});
  layers.push_back({ch.back(), 5, 1, 1, 1});
  return layers;
}

std::vector<WaveConvCriticImpl::Layer> length_layers(const std::vector<int>& ch) {
  std::vector<WaveConvCriticImpl::Layer> layers;
  for (std::size_t i = 0; i < ch.size(); ++i) {
    const int stride = i + 1 < ch.size() ? 2 : 1;
    layers.push_back({ch[i], 5, stride, 1, static_cast<int>(i) + 1});
  }
  return layers;
}

}  // namespace

CriticEnsembleImpl::CriticEnsembleImpl(const CriticConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  singer_emb_ = register_module("singer_emb", torch::nn::Embedding(cfg_.n_singers, cfg_.singer_embed));
  msd_ = register_module("msd", torch::nn::ModuleList());
  mpd_ = register_module("mpd", torch::nn::ModuleList());
  mld_ = register_module("mld", torch::nn::ModuleList());
  if (cfg_.use_msd)
    for (int s = 0; s < cfg_.msd_scales; ++s)
      msd_->push_back(WaveConvCritic(scale_layers(cfg_.msd_channels), cfg_.injection_layer, cfg_.singer_embed,
                                     cfg_.conditional));
  if (cfg_.use_mpd)
    for (int p : cfg_.mpd_periods)
      mpd_->push_back(
          PeriodCritic(p, cfg_.mpd_channels, cfg_.injection_layer, cfg_.singer_embed, cfg_.conditional));
  if (cfg_.use_mld)
    for (std::size_t i = 0; i < cfg_.mld_crop_seconds.size(); ++i)
      mld_->push_back(WaveConvCritic(length_layers(cfg_.mld_channels), cfg_.injection_layer, cfg_.singer_embed,
                                     cfg_.conditional));
}

std::vector<torch::Tensor> CriticEnsembleImpl::scores(const torch::Tensor& wave, const torch::Tensor& singer,
                                                      const CropPlan& plan) {
  auto x = wave.dim() == 1 ? wave.unsqueeze(0) : wave;
  if (x.size(1) < cfg_.min_samples())
    fail(ErrorCode::TooShort, "critics need at least " + std::to_string(cfg_.min_samples()) + " samples");
  if (singer.numel() > 0 &&
      (singer.min().item<std::int64_t>() < 0 || singer.max().item<std::int64_t>() >= cfg_.n_singers))
    fail(ErrorCode::UnknownSinger, "singer id outside the critic embedding table");
  auto emb = singer_emb_(singer).to(x.dtype());

  std::vector<torch::Tensor> out;
  auto scaled = x.unsqueeze(1);
  for (std::size_t s = 0; s < msd_->size(); ++s) {
    if (s > 0) scaled = F::avg_pool1d(scaled, F::AvgPool1dFuncOptions(4).stride(2).padding(1));
    out.push_back(msd_[s]->as<WaveConvCritic>()->forward(scaled, emb));
  }
  for (std::size_t p = 0; p < mpd_->size(); ++p) out.push_back(mpd_[p]->as<PeriodCritic>()->forward(x, emb));
  if (!mld_->is_empty() && plan.offsets.size() != mld_->size())
    fail(ErrorCode::ShapeMismatch, "crop plan does not match the length critics");
  for (std::size_t i = 0; i < mld_->size(); ++i) {
    auto crop = x.narrow(1, plan.offsets[i], plan.lengths[i]).unsqueeze(1);
    out.push_back(mld_[i]->as<WaveConvCritic>()->forward(crop, emb));
  }
  return out;
}

torch::Tensor voc_loss_d(WaveCritic& critic, const torch::Tensor& real, const torch::Tensor& fake,
                         const torch::Tensor& singer, const CropPlan& plan, WaveCriticScores* scores) {
  auto real_scores = critic.scores(real, singer, plan);
  auto fake_scores = critic.scores(fake.detach(), singer, plan);
  if (real_scores.size() != fake_scores.size()) fail(ErrorCode::ShapeMismatch, "critic count changed between passes");
  torch::Tensor total = torch::zeros({}, real.options());
  if (scores) *scores = {};
  for (std::size_t i = 0; i < real_scores.size(); ++i) {
    total = total + (real_scores[i] - 1.0).pow(2).mean() + fake_scores[i].pow(2).mean();
    if (scores) {
      scores->real_mean.push_back(real_scores[i].mean().item<double>());
      scores->fake_mean.push_back(fake_scores[i].mean().item<double>());
    }
  }
  return total;
}

VocoderLossParts voc_loss_g(WaveCritic& critic, const torch::Tensor& fake, const torch::Tensor& real,
                            const torch::Tensor& singer, const CropPlan& plan, const StftLossConfig& cfg,
                            WaveCriticScores* scores) {
  if (fake.sizes() != real.sizes()) fail(ErrorCode::LengthMismatch, "generated and reference audio differ in shape");
  VocoderLossParts parts;
  parts.adversarial = torch::zeros({}, fake.options());
  auto fake_scores = critic.scores(fake, singer, plan);
  if (scores) *scores = {};
  for (const auto& s : fake_scores) {
    parts.adversarial = parts.adversarial + (s - 1.0).pow(2).mean();
    if (scores) scores->fake_mean.push_back(s.mean().item<double>());
  }
  parts.stft = cfg.lambda_stft > 0.0 ? multires_stft_loss(fake, real, cfg.resolutions)
                                     : torch::zeros({}, fake.options());
  parts.mel = cfg.lambda_mel > 0.0
                  ? multires_mel_loss(fake, real, cfg.resolutions, cfg.mel_bands, cfg.sample_rate, cfg.mel_fmax)
                  : torch::zeros({}, fake.options());
  parts.total = parts.adversarial + cfg.lambda_stft * parts.stft + cfg.lambda_mel * parts.mel;
  return parts;
}

}  // namespace wesinger2

#pragma once

#include "wesinger2/spectral_loss.hpp"

#include <torch/torch.h>

#include <random>
#include <vector>

namespace wesinger2 {

struct CriticConfig {
  int n_singers = 1;
  int singer_embed = 64;
  /// When false no singer information reaches the critics.
  bool conditional = true;
  /// 1-based conv layer after which the projected singer embedding is added.
  int injection_layer = 3;
  int sample_rate = 24000;
  double min_seconds = 0.25;

  bool use_msd = true;
  bool use_mpd = true;
  bool use_mld = true;

  int msd_scales = 3;
  std::vector<int> msd_channels{16, 64, 256, 1024, 1024, 1024};
  std::vector<int> mpd_periods{2, 3, 5, 7, 11};
  std::vector<int> mpd_channels{32, 128, 512, 1024, 1024};
  std::vector<double> mld_crop_seconds{0.2, 0.4, 0.8};
  std::vector<int> mld_channels{32, 64, 128, 128, 128};

  void validate() const;
  int n_subcritics() const;
  std::int64_t min_samples() const;

  static CriticConfig full(int n_singers);
  static CriticConfig desk(int n_singers);
};

/// Crop offsets/lengths for the multi-length critics, drawn once per step and
/// shared by the real and fake passes.
struct CropPlan {
  std::vector<std::int64_t> offsets;
  std::vector<std::int64_t> lengths;
};

CropPlan plan_crops(const CriticConfig& cfg, std::int64_t length, std::mt19937_64& rng);

/// Reflect-pads [B, L] to a multiple of `period` and folds it to [B, 1, ceil(L/p), p].
torch::Tensor period_grid(const torch::Tensor& wave, int period);

/// Anything producing one [B] score tensor per sub-critic.
class WaveCritic {
 public:
  virtual ~WaveCritic() = default;
  virtual std::vector<torch::Tensor> scores(const torch::Tensor& wave, const torch::Tensor& singer,
                                            const CropPlan& plan) = 0;
};

/// Strided/dilated 1-D convolution stack with an optional singer bias.
class WaveConvCriticImpl : public torch::nn::Module {
 public:
  struct Layer {
    int out = 1, kernel = 3, stride = 1, groups = 1, dilation = 1;
  };
  WaveConvCriticImpl(const std::vector<Layer>& layers, int injection_layer, int singer_embed, bool conditional);
  /// x [B, 1, L], singer_emb [B, E] -> [B]
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& singer_emb);

 private:
  int injection_layer_;
  torch::nn::ModuleList convs_;
  torch::nn::Conv1d post_{nullptr};
  torch::nn::Linear cond_{nullptr};
};
TORCH_MODULE(WaveConvCritic);

/// 2-D critic over the period-folded waveform.
class PeriodCriticImpl : public torch::nn::Module {
 public:
  PeriodCriticImpl(int period, const std::vector<int>& channels, int injection_layer, int singer_embed,
                   bool conditional);
  torch::Tensor forward(const torch::Tensor& wave, const torch::Tensor& singer_emb);
  int period() const { return period_; }

 private:
  int period_, injection_layer_;
  torch::nn::ModuleList convs_;
  torch::nn::Conv2d post_{nullptr};
  torch::nn::Linear cond_{nullptr};
};
TORCH_MODULE(PeriodCritic);

/// Scale, period and length critics; scores come out in that order.
class CriticEnsembleImpl : public torch::nn::Module, public WaveCritic {
 public:
  explicit CriticEnsembleImpl(const CriticConfig& cfg);

  std::vector<torch::Tensor> scores(const torch::Tensor& wave, const torch::Tensor& singer,
                                    const CropPlan& plan) override;
  const CriticConfig& config() const { return cfg_; }

 private:
  CriticConfig cfg_;
  torch::nn::Embedding singer_emb_{nullptr};
  torch::nn::ModuleList msd_, mpd_, mld_;
};
TORCH_MODULE(CriticEnsemble);

struct WaveCriticScores {
  std::vector<double> real_mean;
  std::vector<double> fake_mean;
};

/// sum over sub-critics of mean (D(real) - 1)^2 + mean D(fake)^2. `fake` is detached here.
torch::Tensor voc_loss_d(WaveCritic& critic, const torch::Tensor& real, const torch::Tensor& fake,
                         const torch::Tensor& singer, const CropPlan& plan, WaveCriticScores* scores = nullptr);

struct VocoderLossParts {
  torch::Tensor total;
  torch::Tensor adversarial;
  torch::Tensor stft;
  torch::Tensor mel;
};

/// sum over sub-critics of mean (D(fake) - 1)^2 + lambda_s L_stft + lambda_m L_mel.
VocoderLossParts voc_loss_g(WaveCritic& critic, const torch::Tensor& fake, const torch::Tensor& real,
                            const torch::Tensor& singer, const CropPlan& plan, const StftLossConfig& cfg,
                            WaveCriticScores* scores = nullptr);

}  // namespace wesinger2

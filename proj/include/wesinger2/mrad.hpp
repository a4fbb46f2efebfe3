#pragma once

#include <torch/torch.h>

#include <array>
#include <optional>
#include <random>
#include <vector>

namespace wesinger2 {

inline constexpr int kNumRegionCritics = 4;
/// Region geometry per critic: band height x frame width, paired by index.
inline constexpr std::array<int, kNumRegionCritics> kRegionHeights{20, 30, 40, 50};
inline constexpr std::array<int, kNumRegionCritics> kRegionWidths{190, 160, 70, 30};

struct RegionSpec {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  bool operator==(const RegionSpec&) const = default;
};

/// Uniform placement of critic i's rectangle inside an n_bands x frames mel.
RegionSpec sample_region(int critic, int frames, std::mt19937_64& rng, int n_bands = 80);

/// [B, F, bands] -> [B, height, width] patch (bands on the height axis).
torch::Tensor extract_patch(const torch::Tensor& mel, const RegionSpec& region);

struct MradConfig {
  int n_bands = 80;
  std::array<int, 6> channels{32, 64, 128, 128, 128, 1};
  int kernel = 3;
  int strided_layers = 4;
  int singer_embed = 64;
  int n_singers = 1;
  /// When false the singer embedding is not injected (ablation).
  bool conditional = true;
  /// Adversarial weight while pre-training and while adapting to one singer.
  double lambda_adv = 1.0;
  double lambda_adv_finetune = 0.7;
  double lambda_l1 = 20.0;

  void validate() const;
};

/// Anything that scores a critic-i patch; lets losses run against stub critics.
class PatchCritic {
 public:
  virtual ~PatchCritic() = default;
  /// patch: [B, H, W], singer: [B] long -> [B] scores.
  virtual torch::Tensor score(int critic, const torch::Tensor& patch, const torch::Tensor& singer) = 0;
};

/// One 2-D convolutional critic over a fixed-size mel rectangle.
class RegionCriticImpl : public torch::nn::Module {
 public:
  RegionCriticImpl(const MradConfig& cfg, int height, int width);
  /// patch [B, H, W], singer_bias [B, C0] (or undefined) -> [B].
  torch::Tensor forward(const torch::Tensor& patch, const torch::Tensor& singer_bias);

  int height() const { return height_; }
  int width() const { return width_; }

 private:
  int height_, width_;
  torch::nn::ModuleList convs_;
};
TORCH_MODULE(RegionCritic);

/// The four conditional multi-random-area critics sharing one singer table.
class MradEnsembleImpl : public torch::nn::Module, public PatchCritic {
 public:
  explicit MradEnsembleImpl(const MradConfig& cfg);

  torch::Tensor score(int critic, const torch::Tensor& patch, const torch::Tensor& singer) override;
  const MradConfig& config() const { return cfg_; }

 private:
  MradConfig cfg_;
  torch::nn::Embedding singer_emb_{nullptr};
  torch::nn::Linear singer_proj_{nullptr};
  torch::nn::ModuleList critics_;
};
TORCH_MODULE(MradEnsemble);

/// Per-call diagnostics: mean real / fake score of every critic that ran.
struct MradScores {
  std::array<double, kNumRegionCritics> real_mean{};
  std::array<double, kNumRegionCritics> fake_mean{};
  std::array<bool, kNumRegionCritics> active{};
  std::array<RegionSpec, kNumRegionCritics> regions{};
};

/// Critic objective: sum_i (D_i(y) - 1)^2 + D_i(x)^2, averaged over the batch.
/// `real`/`fake` are [B, F, >=80]; only the first 80 channels are scored.
/// Critics whose width exceeds `frames` are skipped; throws
/// InsufficientFrames if none fits.
torch::Tensor mrad_loss_d(PatchCritic& critics, const torch::Tensor& real, const torch::Tensor& fake,
                          const torch::Tensor& singer, int frames, std::mt19937_64& rng,
                          MradScores* scores = nullptr);

struct GeneratorLossParts {
  torch::Tensor total;
  torch::Tensor adversarial;  // sum_i (D_i(x) - 1)^2
  torch::Tensor l1;           // masked mean |x - y|
};

/// Generator objective: lambda_adv * sum_i (D_i(x) - 1)^2 + lambda_l1 * mean|x - y|.
/// The L1 term covers every channel of x/y over the valid frames of `frame_mask`.
GeneratorLossParts mrad_loss_g(PatchCritic& critics, const torch::Tensor& fake, const torch::Tensor& real,
                               const torch::Tensor& frame_mask, const torch::Tensor& singer, double lambda_adv,
                               double lambda_l1, int frames, std::mt19937_64& rng, MradScores* scores = nullptr);

/// Masked L1 over [B, F, C] tensors.
torch::Tensor masked_l1(const torch::Tensor& x, const torch::Tensor& y, const torch::Tensor& frame_mask);

struct ProgressiveLosses {
  torch::Tensor g_total;
  torch::Tensor d_total;
  torch::Tensor l1_total;
  torch::Tensor adv_total;
  std::vector<MradScores> scores;  // one per block (critic pass)
};

/// Sums the per-block generator objective over all decoder-block outputs and
/// the post-net output, using the same shared critics for every block.
ProgressiveLosses progressive_loss_g(PatchCritic& critics, const std::vector<torch::Tensor>& blocks,
                                     const torch::Tensor& target, const torch::Tensor& frame_mask,
                                     const torch::Tensor& singer, double lambda_adv, double lambda_l1, int frames,
                                     std::mt19937_64& rng);

/// Critic objective summed over blocks; block outputs are detached.
ProgressiveLosses progressive_loss_d(PatchCritic& critics, const std::vector<torch::Tensor>& blocks,
                                     const torch::Tensor& target, const torch::Tensor& singer, int frames,
                                     std::mt19937_64& rng);

/// Both sums in one call (critic pass first).
ProgressiveLosses progressive_losses(PatchCritic& critics, const std::vector<torch::Tensor>& blocks,
                                     const torch::Tensor& target, const torch::Tensor& frame_mask,
                                     const torch::Tensor& singer, double lambda_adv, double lambda_l1, int frames,
                                     std::mt19937_64& rng);

}  // namespace wesinger2

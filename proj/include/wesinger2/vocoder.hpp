#pragma once

#include "wesinger2/dsp_features.hpp"

#include <torch/torch.h>

#include <vector>

namespace wesinger2 {

struct VocoderConfig {
  int n_mels = kMelBands;
  int key_embed = 16;
  int hidden = 256;
  std::vector<int> upsample_factors{8, 6, 5};
  std::vector<int> resblock_kernels{3, 7, 11};
  std::vector<int> resblock_dilations{1, 3, 5};
  /// When false the piano-key path is dropped and only the mel drives the generator (ablation).
  bool use_pitch = true;

  int hop_size() const;
  void validate(int expected_hop = 240) const;

  static VocoderConfig full();
  static VocoderConfig desk();
};

/// Trainable 88 x d key table followed by a fully-connected layer and softplus.
class KeyEmbeddingImpl : public torch::nn::Module {
 public:
  explicit KeyEmbeddingImpl(int dim);
  /// keys [B, T] long in [1, 88] -> [B, T, d], strictly positive.
  torch::Tensor forward(const torch::Tensor& keys);

  torch::nn::Embedding& table() { return table_; }

 private:
  torch::nn::Embedding table_{nullptr};
  torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(KeyEmbedding);

/// Residual stack of dilated convolutions with one kernel size.
class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int channels, int kernel, const std::vector<int>& dilations);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::ModuleList dilated_, plain_;
};
TORCH_MODULE(ResBlock);

class VocoderGeneratorImpl : public torch::nn::Module {
 public:
  explicit VocoderGeneratorImpl(const VocoderConfig& cfg);

  const VocoderConfig& config() const { return cfg_; }

  torch::Tensor embed_keys(const torch::Tensor& keys);
  /// linear(mel) + linear(key embedding); mel [B, T, 80], key_emb [B, T, d] -> [B, T, hidden].
  torch::Tensor fuse(const torch::Tensor& mel, const torch::Tensor& key_emb);
  /// mel [B, T, 80] (singer-normalized), keys [B, T] -> waveform [B, T * hop] in [-1, 1].
  torch::Tensor forward(const torch::Tensor& mel, const torch::Tensor& keys);

  torch::nn::Linear& mel_projection() { return mel_proj_; }

 private:
  VocoderConfig cfg_;
  KeyEmbedding keys_{nullptr};
  torch::nn::Linear mel_proj_{nullptr}, key_proj_{nullptr};
  torch::nn::Conv1d conv_pre_{nullptr}, conv_post_{nullptr};
  torch::nn::ModuleList ups_, resblocks_;
};
TORCH_MODULE(VocoderGenerator);

/// Convenience wrapper on plain containers: one clip, eval mode, no grad.
Waveform vocode(VocoderGenerator& generator, const MelSpectrogram& normalized_mel, const KeySequence& keys,
                int sample_rate = 24000);

}  // namespace wesinger2

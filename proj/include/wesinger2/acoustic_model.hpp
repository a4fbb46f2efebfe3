#pragma once

#include "wesinger2/dsp_features.hpp"
#include "wesinger2/score.hpp"

#include <torch/torch.h>

#include <array>
#include <string>
#include <vector>

namespace wesinger2 {

/// 80 normalized mel bands plus one normalized log-F0 channel.
inline constexpr int kAcousticChannels = kMelBands + 1;

struct PostnetConfig {
  /// "mrf" (multi-receptive-field residual stack) or "cnn" (plain deep CNN, ablation).
  std::string kind = "mrf";
  std::array<int, 3> kernel_sizes{3, 7, 11};
  std::array<int, 3> dilations{1, 3, 5};
  int channels = 256;
};

struct AcousticConfig {
  int n_phonemes = 0;
  int n_singers = 1;
  int hidden = 384;
  int n_encoder_blocks = 6;
  int n_decoder_blocks = 6;
  int n_heads = 2;
  int conv_kernel = 9;
  int ffn_hidden = 1024;
  double dropout = 0.1;
  int duration_filter = 256;
  double grl_scale = 0.05;
  PostnetConfig postnet;
  int out_channels = kAcousticChannels;

  void validate() const;
  int n_block_outputs() const { return n_decoder_blocks + 1; }

  /// Full-size configuration.
  static AcousticConfig full(int n_phonemes, int n_singers);
  /// Desk-scale preset: 2+2 blocks, hidden 128.
  static AcousticConfig desk(int n_phonemes, int n_singers);
};

/// Padded integer encodings of a batch of token sequences.
struct TokenBatch {
  torch::Tensor phoneme;    // [B, T] long
  torch::Tensor pitch;      // [B, T] long
  torch::Tensor bucket;     // [B, T] long, duration bucket of the score length
  torch::Tensor durations;  // [B, T] long, frames per token (0 on padding)
  torch::Tensor mask;       // [B, T] bool, true on real tokens
  torch::Tensor singer;     // [B] long

  std::int64_t batch_size() const { return phoneme.size(0); }
};

TokenBatch make_token_batch(const std::vector<std::vector<ScoreToken>>& sequences);

struct RegulatedFrames {
  torch::Tensor hidden;  // [B, F, H]
  torch::Tensor mask;    // [B, F] bool
};

/// Repeats token i durations[i] times. durations: [B, T] long (>= 1 on valid tokens).
RegulatedFrames length_regulate(const torch::Tensor& hidden, const torch::Tensor& durations,
                                const torch::Tensor& token_mask);

/// Round-half-up of exp(log_duration), at least one frame; zero on padding.
torch::Tensor durations_from_log(const torch::Tensor& log_durations, const torch::Tensor& token_mask);

/// Masked MSE between predicted log-durations and log(target frames).
torch::Tensor duration_loss(const torch::Tensor& pred_log, const torch::Tensor& target_frames,
                            const torch::Tensor& token_mask);

/// Identity in the forward pass; multiplies the incoming gradient by -scale.
torch::Tensor grad_reverse(const torch::Tensor& x, double scale);

class MultiHeadSelfAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadSelfAttentionImpl(int hidden, int heads, double dropout);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask);

 private:
  int heads_;
  double dropout_;
  torch::nn::Linear qkv_{nullptr}, out_{nullptr};
};
TORCH_MODULE(MultiHeadSelfAttention);

/// Feed-forward transformer block: self-attention and a convolutional
/// feed-forward network, each with residual + layer norm.
class FFTBlockImpl : public torch::nn::Module {
 public:
  FFTBlockImpl(int hidden, int heads, int ffn_hidden, int kernel, double dropout);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask);

 private:
  double dropout_;
  MultiHeadSelfAttention attn_{nullptr};
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Conv1d conv1_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(FFTBlock);

class DurationPredictorImpl : public torch::nn::Module {
 public:
  DurationPredictorImpl(int hidden, int filter, double dropout);
  /// [B, T, H] -> [B, T] log-durations (zero on padding).
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask);

 private:
  double dropout_;
  torch::nn::Conv1d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Linear proj_{nullptr};
};
TORCH_MODULE(DurationPredictor);

/// Residual post-net over [B, F, C]. The output projection starts at zero so
/// the module is the identity map at initialisation.
class PostnetImpl : public torch::nn::Module {
 public:
  PostnetImpl(int io_channels, const PostnetConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& frame_mask);
  torch::Tensor forward(const torch::Tensor& x);

  /// Frames of context seen by one output frame (1 + sum of (kernel-1)*dilation).
  int receptive_field() const;
  torch::nn::Conv1d& output_projection() { return out_proj_; }

 private:
  PostnetConfig cfg_;
  int io_channels_;
  torch::nn::Conv1d in_proj_{nullptr}, out_proj_{nullptr};
  torch::nn::ModuleList layers_;
};
TORCH_MODULE(Postnet);

struct AcousticOutputs {
  torch::Tensor log_durations;       // [B, T]
  torch::Tensor encoder_hidden;      // [B, T, H]
  std::vector<torch::Tensor> blocks; // n_decoder_blocks + 1 tensors of [B, F, 81]; last is post-net
  torch::Tensor frame_mask;          // [B, F]
};

class AcousticModelImpl : public torch::nn::Module {
 public:
  explicit AcousticModelImpl(const AcousticConfig& cfg);

  const AcousticConfig& config() const { return cfg_; }

  torch::Tensor encode(const TokenBatch& batch);
  torch::Tensor predict_durations(const torch::Tensor& encoder_hidden, const torch::Tensor& token_mask);
  /// Per-block 81-channel predictions for length-regulated frames.
  std::vector<torch::Tensor> decode(const torch::Tensor& frame_hidden, const torch::Tensor& frame_mask,
                                    const torch::Tensor& singer);

  /// Full generator pass. `durations` drives the length regulator (ground
  /// truth during training); when undefined, predicted durations are used.
  AcousticOutputs forward(const TokenBatch& batch, torch::Tensor durations = {});

  /// Cross-entropy of the singer classifier on mean-pooled encoder output,
  /// with the gradient into the encoder reversed when `reverse` is set.
  torch::Tensor singer_adversarial_loss(const torch::Tensor& encoder_hidden, const torch::Tensor& token_mask,
                                        const torch::Tensor& singer, bool reverse = true);

  Postnet& postnet() { return postnet_; }
  torch::nn::Linear& singer_classifier() { return classifier_; }
  torch::nn::Linear& output_head() { return head_; }

 private:
  void check_singers(const torch::Tensor& singer) const;

  AcousticConfig cfg_;
  torch::nn::Embedding phoneme_emb_{nullptr}, pitch_emb_{nullptr}, bucket_emb_{nullptr}, singer_emb_{nullptr};
  torch::nn::ModuleList encoder_, decoder_;
  DurationPredictor duration_{nullptr};
  torch::nn::Linear head_{nullptr};
  Postnet postnet_{nullptr};
  torch::nn::Linear classifier_{nullptr};
};
TORCH_MODULE(AcousticModel);

}  // namespace wesinger2

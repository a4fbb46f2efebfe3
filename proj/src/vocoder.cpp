#include "wesinger2/vocoder.hpp"

#include "wesinger2/error.hpp"
#include "wesinger2/nn_util.hpp"

#include <numeric>

namespace wesinger2 {

namespace F = torch::nn::functional;

int VocoderConfig::hop_size() const {
  return std::accumulate(upsample_factors.begin(), upsample_factors.end(), 1, std::multiplies<>());
}

void VocoderConfig::validate(int expected_hop) const {
  if (upsample_factors.empty() || hop_size() != expected_hop)
    fail(ErrorCode::InvalidConfig, "upsample factors must multiply to the hop size " + std::to_string(expected_hop));
  if (key_embed < 1 || hidden < 2) fail(ErrorCode::InvalidConfig, "vocoder widths must be positive");
  if (hidden >> upsample_factors.size() < 1) fail(ErrorCode::InvalidConfig, "hidden too small for the upsample stack");
  for (int k : resblock_kernels)
    if (k % 2 == 0) fail(ErrorCode::InvalidConfig, "residual kernels must be odd");
}

VocoderConfig VocoderConfig::full() { return {}; }

VocoderConfig VocoderConfig::desk() {
  VocoderConfig c;
  c.hidden = 64;
  return c;
}

KeyEmbeddingImpl::KeyEmbeddingImpl(int dim) {
  table_ = register_module("table", torch::nn::Embedding(kNumPianoKeys, dim));
  fc_ = register_module("fc", torch::nn::Linear(dim, dim));
}

torch::Tensor KeyEmbeddingImpl::forward(const torch::Tensor& keys) {
  if (keys.numel() > 0 && (keys.min().item<std::int64_t>() < 1 || keys.max().item<std::int64_t>() > kNumPianoKeys))
    fail(ErrorCode::KeyOutOfRange, "piano keys must lie in [1, 88]");
  return F::softplus(fc_(table_(keys.to(torch::kLong) - 1)));
}

ResBlockImpl::ResBlockImpl(int channels, int kernel, const std::vector<int>& dilations) {
  dilated_ = register_module("dilated", torch::nn::ModuleList());
  plain_ = register_module("plain", torch::nn::ModuleList());
  for (int d : dilations) {
    dilated_->push_back(torch::nn::Conv1d(
        torch::nn::Conv1dOptions(channels, channels, kernel).dilation(d).padding(same_padding(kernel, d))));
    plain_->push_back(
        torch::nn::Conv1d(torch::nn::Conv1dOptions(channels, channels, kernel).padding(same_padding(kernel))));
  }
}

torch::Tensor ResBlockImpl::forward(torch::Tensor x) {
  for (std::size_t i = 0; i < dilated_->size(); ++i) {
    auto y = dilated_[i]->as<torch::nn::Conv1d>()->forward(leaky(x));
    y = plain_[i]->as<torch::nn::Conv1d>()->forward(leaky(y));
    x = x + y;
  }
  return x;
}

VocoderGeneratorImpl::VocoderGeneratorImpl(const VocoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate(cfg_.hop_size());
  keys_ = register_module("keys", KeyEmbedding(cfg_.key_embed));
  mel_proj_ = register_module("mel_proj", torch::nn::Linear(cfg_.n_mels, cfg_.hidden));
  if (cfg_.use_pitch) key_proj_ = register_module("key_proj", torch::nn::Linear(cfg_.key_embed, cfg_.hidden));
  conv_pre_ = register_module(
      "conv_pre", torch::nn::Conv1d(torch::nn::Conv1dOptions(cfg_.hidden, cfg_.hidden, 7).padding(3)));
  ups_ = register_module("ups", torch::nn::ModuleList());
  resblocks_ = register_module("resblocks", torch::nn::ModuleList());
  int ch = cfg_.hidden;
  for (int u : cfg_.upsample_factors) {
    // Kernel/padding chosen so every stage multiplies the length exactly by u.
    const int kernel = u % 2 == 0 ? 2 * u : 2 * u + 1;
    const int pad = (kernel - u) / 2;
    ups_->push_back(torch::nn::ConvTranspose1d(
        torch::nn::ConvTranspose1dOptions(ch, ch / 2, kernel).stride(u).padding(pad)));
    ch /= 2;
    for (int k : cfg_.resblock_kernels) resblocks_->push_back(ResBlock(ch, k, cfg_.resblock_dilations));
  }
  conv_post_ = register_module("conv_post", torch::nn::Conv1d(torch::nn::Conv1dOptions(ch, 1, 7).padding(3)));
}

torch::Tensor VocoderGeneratorImpl::embed_keys(const torch::Tensor& keys) { return keys_(keys); }

torch::Tensor VocoderGeneratorImpl::fuse(const torch::Tensor& mel, const torch::Tensor& key_emb) {
  if (mel.dim() != 3 || mel.size(2) != cfg_.n_mels) fail(ErrorCode::ChannelMismatch, "vocoder expects [B, T, 80] mels");
  auto x = mel_proj_(mel);
  if (!cfg_.use_pitch) return x;
  if (key_emb.size(0) != mel.size(0) || key_emb.size(1) != mel.size(1))
    fail(ErrorCode::FrameMismatch, "key embedding and mel differ in frame count");
  return x + key_proj_(key_emb);
}

torch::Tensor VocoderGeneratorImpl::forward(const torch::Tensor& mel, const torch::Tensor& keys) {
  if (mel.dim() != 3) fail(ErrorCode::ShapeMismatch, "vocoder expects [B, T, 80] mels");
  torch::Tensor key_emb;
  if (cfg_.use_pitch) {
    if (keys.dim() != 2 || keys.size(0) != mel.size(0) || keys.size(1) != mel.size(1))
      fail(ErrorCode::FrameMismatch, "keys must align with mel frames");
    key_emb = embed_keys(keys).to(mel.dtype());
  }
  auto x = conv_pre_(fuse(mel, key_emb).transpose(1, 2));
  const auto n_kernels = cfg_.resblock_kernels.size();
  for (std::size_t s = 0; s < ups_->size(); ++s) {
    x = ups_[s]->as<torch::nn::ConvTranspose1d>()->forward(leaky(x));
    torch::Tensor acc;
    for (std::size_t j = 0; j < n_kernels; ++j) {
      auto y = resblocks_[s * n_kernels + j]->as<ResBlock>()->forward(x);
      acc = acc.defined() ? acc + y : y;
    }
    x = acc / static_cast<double>(n_kernels);
  }
  x = conv_post_(leaky(x));
  return torch::tanh(x).squeeze(1);
}

Waveform vocode(VocoderGenerator& generator, const MelSpectrogram& normalized_mel, const KeySequence& keys,
                int sample_rate) {
  if (static_cast<int>(keys.keys.size()) != normalized_mel.frames())
    fail(ErrorCode::FrameMismatch, "key sequence and mel differ in length");
  torch::NoGradGuard guard;
  generator->eval();
  const auto dtype = generator->parameters().front().scalar_type();
  auto mel = to_tensor(normalized_mel.values).to(dtype).unsqueeze(0);
  auto k = torch::tensor(std::vector<std::int64_t>(keys.keys.begin(), keys.keys.end()), torch::kLong).unsqueeze(0);
  auto audio = generator->forward(mel, k).squeeze(0).to(torch::kFloat64).contiguous();
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(audio.data_ptr<double>(), audio.data_ptr<double>() + audio.numel());
  return w;
}

}  // namespace wesinger2

#include "wesinger2/acoustic_model.hpp"

#include "wesinger2/error.hpp"
#include "wesinger2/nn_util.hpp"

#include <cmath>

namespace wesinger2 {

namespace F = torch::nn::functional;

void AcousticConfig::validate() const {
  if (n_phonemes <= 0 || n_singers <= 0) fail(ErrorCode::InvalidConfig, "acoustic model needs phonemes and singers");
  if (hidden <= 0 || n_heads <= 0 || hidden % n_heads != 0)
    fail(ErrorCode::InvalidConfig, "hidden size must be divisible by the head count");
  if (n_encoder_blocks < 1 || n_decoder_blocks < 1) fail(ErrorCode::InvalidConfig, "need at least one FFT block");
  if (conv_kernel % 2 == 0) fail(ErrorCode::InvalidConfig, "FFT conv kernel must be odd");
  for (int k : postnet.kernel_sizes)
    if (k % 2 == 0 || k < 1) fail(ErrorCode::InvalidConfig, "post-net kernel sizes must be odd");
  for (int d : postnet.dilations)
    if (d < 1) fail(ErrorCode::InvalidConfig, "post-net dilations must be positive");
  if (postnet.kind != "mrf" && postnet.kind != "cnn") fail(ErrorCode::InvalidConfig, "post-net kind must be mrf or cnn");
  if (out_channels != kAcousticChannels) fail(ErrorCode::InvalidConfig, "acoustic output must have 81 channels");
  if (dropout < 0.0 || dropout >= 1.0) fail(ErrorCode::InvalidConfig, "dropout must lie in [0, 1)");
}

AcousticConfig AcousticConfig::full(int n_phonemes, int n_singers) {
  AcousticConfig c;
  c.n_phonemes = n_phonemes;
  c.n_singers = n_singers;
  return c;
}

AcousticConfig AcousticConfig::desk(int n_phonemes, int n_singers) {
  AcousticConfig c = full(n_phonemes, n_singers);
  c.hidden = 128;
  c.n_encoder_blocks = 2;
  c.n_decoder_blocks = 2;
  c.ffn_hidden = 256;
  c.duration_filter = 128;
  c.postnet.channels = 128;
  return c;
}

TokenBatch make_token_batch(const std::vector<std::vector<ScoreToken>>& sequences) {
  if (sequences.empty()) fail(ErrorCode::EmptyInput, "empty batch");
  std::int64_t max_len = 0;
  for (const auto& s : sequences) {
    if (s.empty()) fail(ErrorCode::EmptyInput, "empty token sequence in batch");
    max_len = std::max<std::int64_t>(max_len, static_cast<std::int64_t>(s.size()));
  }
  const auto b = static_cast<std::int64_t>(sequences.size());
  TokenBatch batch;
  batch.phoneme = torch::zeros({b, max_len}, torch::kLong);
  batch.pitch = torch::full({b, max_len}, kRestPitchId, torch::kLong);
  batch.bucket = torch::zeros({b, max_len}, torch::kLong);
  batch.durations = torch::zeros({b, max_len}, torch::kLong);
  batch.mask = torch::zeros({b, max_len}, torch::kBool);
  batch.singer = torch::zeros({b}, torch::kLong);
  auto ph = batch.phoneme.accessor<std::int64_t, 2>();
  auto pi = batch.pitch.accessor<std::int64_t, 2>();
  auto bu = batch.bucket.accessor<std::int64_t, 2>();
  auto du = batch.durations.accessor<std::int64_t, 2>();
  auto ma = batch.mask.accessor<bool, 2>();
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& seq = sequences[static_cast<std::size_t>(i)];
    batch.singer[i] = seq.front().singer_id;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const auto& tok = seq[t];
      if (tok.duration_frames < 1) fail(ErrorCode::NonPositiveDuration, "token with non-positive duration");
      ph[i][t] = tok.phoneme_id;
      pi[i][t] = tok.pitch_id;
      bu[i][t] = duration_bucket(tok.duration_frames);
      du[i][t] = tok.duration_frames;
      ma[i][t] = true;
    }
  }
  return batch;
}

RegulatedFrames length_regulate(const torch::Tensor& hidden, const torch::Tensor& durations,
                                const torch::Tensor& token_mask) {
  const auto b = hidden.size(0);
  auto dur = durations.to(torch::kLong).masked_fill(token_mask.logical_not(), 0);
  if ((dur.masked_select(token_mask) < 1).any().item<bool>())
    fail(ErrorCode::NonPositiveDuration, "length regulator needs durations >= 1 on every token");
  const auto totals = dur.sum(1);
  const auto max_frames = totals.max().item<std::int64_t>();

  std::vector<torch::Tensor> rows;
  rows.reserve(static_cast<std::size_t>(b));
  for (std::int64_t i = 0; i < b; ++i) {
    auto idx = torch::repeat_interleave(torch::arange(hidden.size(1), torch::kLong), dur[i]);
    auto expanded = hidden[i].index_select(0, idx);
    const auto pad = max_frames - expanded.size(0);
    if (pad > 0) expanded = F::pad(expanded, F::PadFuncOptions({0, 0, 0, pad}));
    rows.push_back(expanded);
  }
  RegulatedFrames out;
  out.hidden = torch::stack(rows);
  out.mask = torch::arange(max_frames, torch::kLong).unsqueeze(0) < totals.unsqueeze(1);
  return out;
}

torch::Tensor durations_from_log(const torch::Tensor& log_durations, const torch::Tensor& token_mask) {
  auto frames = torch::floor(torch::exp(log_durations.detach().to(torch::kFloat64)) + 0.5).clamp_min(1.0);
  return frames.to(torch::kLong).masked_fill(token_mask.logical_not(), 0);
}

torch::Tensor duration_loss(const torch::Tensor& pred_log, const torch::Tensor& target_frames,
                            const torch::Tensor& token_mask) {
  if (pred_log.sizes() != target_frames.sizes() || pred_log.sizes() != token_mask.sizes())
    fail(ErrorCode::LengthMismatch, "duration prediction and target differ in shape");
  auto m = token_mask.to(pred_log.dtype());
  auto target = torch::log(target_frames.to(pred_log.dtype()).clamp_min(1.0));
  auto sq = (pred_log - target).pow(2) * m;
  return sq.sum() / m.sum().clamp_min(1.0);
}

namespace {

struct GradReverseFn : public torch::autograd::Function<GradReverseFn> {
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& x, double scale) {
    ctx->saved_data["scale"] = scale;
    return x.clone();
  }
  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grads) {
    const double scale = ctx->saved_data["scale"].toDouble();
    return {grads[0] * (-scale), torch::Tensor()};
  }
};

torch::Tensor apply_mask(const torch::Tensor& x, const torch::Tensor& mask) {
  return x * mask.to(x.dtype()).unsqueeze(-1);
}

}  // namespace

torch::Tensor grad_reverse(const torch::Tensor& x, double scale) { return GradReverseFn::apply(x, scale); }

MultiHeadSelfAttentionImpl::MultiHeadSelfAttentionImpl(int hidden, int heads, double dropout)
    : heads_(heads), dropout_(dropout) {
  qkv_ = register_module("qkv", torch::nn::Linear(hidden, 3 * hidden));
  out_ = register_module("out", torch::nn::Linear(hidden, hidden));
}

torch::Tensor MultiHeadSelfAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& mask) {
  const auto b = x.size(0), t = x.size(1), h = x.size(2);
  const auto dk = h / heads_;
  auto qkv = qkv_(x).view({b, t, 3, heads_, dk}).permute({2, 0, 3, 1, 4});
  auto q = qkv[0], k = qkv[1], v = qkv[2];
  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(dk));
  scores = scores.masked_fill(mask.logical_not().view({b, 1, 1, t}), -std::numeric_limits<double>::infinity());
  auto weights = torch::dropout(torch::softmax(scores, -1), dropout_, is_training());
  auto ctx = torch::matmul(weights, v).permute({0, 2, 1, 3}).reshape({b, t, h});
  return out_(ctx);
}

FFTBlockImpl::FFTBlockImpl(int hidden, int heads, int ffn_hidden, int kernel, double dropout) : dropout_(dropout) {
  attn_ = register_module("attn", MultiHeadSelfAttention(hidden, heads, dropout));
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({hidden})));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({hidden})));
  conv1_ = register_module(
      "conv1", torch::nn::Conv1d(torch::nn::Conv1dOptions(hidden, ffn_hidden, kernel).padding(same_padding(kernel))));
  conv2_ = register_module("conv2", torch::nn::Conv1d(torch::nn::Conv1dOptions(ffn_hidden, hidden, 1)));
}

torch::Tensor FFTBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& mask) {
  auto y = norm1_(x + torch::dropout(attn_(x, mask), dropout_, is_training()));
  y = apply_mask(y, mask);
  auto h = torch::relu(conv1_(y.transpose(1, 2)));
  h = h * mask.to(h.dtype()).unsqueeze(1);
  h = conv2_(h).transpose(1, 2);
  y = norm2_(y + torch::dropout(h, dropout_, is_training()));
  return apply_mask(y, mask);
}

DurationPredictorImpl::DurationPredictorImpl(int hidden, int filter, double dropout) : dropout_(dropout) {
  conv1_ = register_module("conv1", torch::nn::Conv1d(torch::nn::Conv1dOptions(hidden, filter, 3).padding(1)));
  conv2_ = register_module("conv2", torch::nn::Conv1d(torch::nn::Conv1dOptions(filter, filter, 3).padding(1)));
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({filter})));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({filter})));
  proj_ = register_module("proj", torch::nn::Linear(filter, 1));
}

torch::Tensor DurationPredictorImpl::forward(const torch::Tensor& x, const torch::Tensor& mask) {
  auto h = apply_mask(x, mask).transpose(1, 2);
  h = torch::relu(conv1_(h)).transpose(1, 2);
  h = apply_mask(torch::dropout(norm1_(h), dropout_, is_training()), mask);
  h = torch::relu(conv2_(h.transpose(1, 2))).transpose(1, 2);
  h = apply_mask(torch::dropout(norm2_(h), dropout_, is_training()), mask);
  return proj_(h).squeeze(-1) * mask.to(h.dtype());
}

PostnetImpl::PostnetImpl(int io_channels, const PostnetConfig& cfg) : cfg_(cfg), io_channels_(io_channels) {
  const int c = cfg.channels;
  in_proj_ = register_module("in_proj", torch::nn::Conv1d(torch::nn::Conv1dOptions(io_channels, c, 1)));
  layers_ = register_module("layers", torch::nn::ModuleList());
  if (cfg.kind == "mrf") {
    for (int k : cfg.kernel_sizes)
      for (int d : cfg.dilations)
        layers_->push_back(torch::nn::Conv1d(torch::nn::Conv1dOptions(c, c, k).dilation(d).padding(same_padding(k, d))));
  } else {
    for (int i = 0; i < 5; ++i) layers_->push_back(torch::nn::Conv1d(torch::nn::Conv1dOptions(c, c, 5).padding(2)));
  }
  out_proj_ = register_module("out_proj", torch::nn::Conv1d(torch::nn::Conv1dOptions(c, io_channels, 1)));
  torch::NoGradGuard guard;
  out_proj_->weight.zero_();
  out_proj_->bias.zero_();
}

int PostnetImpl::receptive_field() const {
  int rf = 1;
  if (cfg_.kind == "mrf") {
    for (int k : cfg_.kernel_sizes)
      for (int d : cfg_.dilations) rf += (k - 1) * d;
  } else {
    rf += 5 * 4;
  }
  return rf;
}

torch::Tensor PostnetImpl::forward(const torch::Tensor& x) {
  return forward(x, torch::ones({x.size(0), x.size(1)}, torch::kBool));
}

torch::Tensor PostnetImpl::forward(const torch::Tensor& x, const torch::Tensor& frame_mask) {
  if (x.dim() != 3 || x.size(2) != io_channels_)
    fail(ErrorCode::ChannelMismatch, "post-net expects [B, F, " + std::to_string(io_channels_) + "]");
  auto m = frame_mask.to(x.dtype()).unsqueeze(1);
  auto h = in_proj_(x.transpose(1, 2)) * m;
  // Residual around every layer; within an MRF block the chained residuals
  // also connect the block input to its output.
  for (const auto& layer : *layers_) {
    auto conv = layer->as<torch::nn::Conv1d>();
    auto y = conv->forward(h);
    y = cfg_.kind == "mrf" ? leaky(y) : torch::tanh(y);
    h = (h + y) * m;
  }
  return x + out_proj_(h).transpose(1, 2) * frame_mask.to(x.dtype()).unsqueeze(-1);
}

AcousticModelImpl::AcousticModelImpl(const AcousticConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int h = cfg_.hidden;
  phoneme_emb_ = register_module("phoneme_emb", torch::nn::Embedding(cfg_.n_phonemes, h));
  pitch_emb_ = register_module("pitch_emb", torch::nn::Embedding(kNumPitchIds, h));
  bucket_emb_ = register_module("bucket_emb", torch::nn::Embedding(kNumDurationBuckets, h));
  singer_emb_ = register_module("singer_emb", torch::nn::Embedding(cfg_.n_singers, h));
  encoder_ = register_module("encoder", torch::nn::ModuleList());
  decoder_ = register_module("decoder", torch::nn::ModuleList());
  for (int i = 0; i < cfg_.n_encoder_blocks; ++i)
    encoder_->push_back(FFTBlock(h, cfg_.n_heads, cfg_.ffn_hidden, cfg_.conv_kernel, cfg_.dropout));
  for (int i = 0; i < cfg_.n_decoder_blocks; ++i)
    decoder_->push_back(FFTBlock(h, cfg_.n_heads, cfg_.ffn_hidden, cfg_.conv_kernel, cfg_.dropout));
  duration_ = register_module("duration", DurationPredictor(h, cfg_.duration_filter, cfg_.dropout));
  head_ = register_module("head", torch::nn::Linear(h, cfg_.out_channels));
  postnet_ = register_module("postnet", Postnet(cfg_.out_channels, cfg_.postnet));
  classifier_ = register_module("singer_classifier", torch::nn::Linear(h, cfg_.n_singers));
}

void AcousticModelImpl::check_singers(const torch::Tensor& singer) const {
  if (singer.numel() == 0) return;
  if (singer.min().item<std::int64_t>() < 0 || singer.max().item<std::int64_t>() >= cfg_.n_singers)
    fail(ErrorCode::UnknownSinger, "singer index outside [0, " + std::to_string(cfg_.n_singers) + ")");
}

torch::Tensor AcousticModelImpl::encode(const TokenBatch& batch) {
  if (batch.phoneme.numel() == 0) fail(ErrorCode::EmptyInput, "no tokens to encode");
  if (batch.phoneme.max().item<std::int64_t>() >= cfg_.n_phonemes)
    fail(ErrorCode::UnknownPhoneme, "phoneme id outside the model vocabulary");
  auto x = phoneme_emb_(batch.phoneme) + pitch_emb_(batch.pitch) + bucket_emb_(batch.bucket);
  x = x + sinusoid_positions(x.size(1), x.size(2), x.options()).unsqueeze(0);
  x = apply_mask(torch::dropout(x, cfg_.dropout, is_training()), batch.mask);
  for (const auto& block : *encoder_) x = block->as<FFTBlock>()->forward(x, batch.mask);
  return x;
}

torch::Tensor AcousticModelImpl::predict_durations(const torch::Tensor& encoder_hidden,
                                                   const torch::Tensor& token_mask) {
  return duration_(encoder_hidden, token_mask);
}

std::vector<torch::Tensor> AcousticModelImpl::decode(const torch::Tensor& frame_hidden, const torch::Tensor& frame_mask,
                                                     const torch::Tensor& singer) {
  check_singers(singer);
  auto x = frame_hidden + singer_emb_(singer).unsqueeze(1);
  x = x + sinusoid_positions(x.size(1), x.size(2), x.options()).unsqueeze(0);
  x = apply_mask(x, frame_mask);
  std::vector<torch::Tensor> outputs;
  outputs.reserve(static_cast<std::size_t>(cfg_.n_block_outputs()));
  for (const auto& block : *decoder_) {
    x = block->as<FFTBlock>()->forward(x, frame_mask);
    outputs.push_back(apply_mask(head_(x), frame_mask));
  }
  outputs.push_back(postnet_->forward(outputs.back(), frame_mask));
  return outputs;
}

AcousticOutputs AcousticModelImpl::forward(const TokenBatch& batch, torch::Tensor durations) {
  check_singers(batch.singer);
  AcousticOutputs out;
  out.encoder_hidden = encode(batch);
  out.log_durations = predict_durations(out.encoder_hidden, batch.mask);
  if (!durations.defined()) durations = durations_from_log(out.log_durations, batch.mask);
  auto frames = length_regulate(out.encoder_hidden, durations, batch.mask);
  out.frame_mask = frames.mask;
  out.blocks = decode(frames.hidden, frames.mask, batch.singer);
  return out;
}

torch::Tensor AcousticModelImpl::singer_adversarial_loss(const torch::Tensor& encoder_hidden,
                                                         const torch::Tensor& token_mask, const torch::Tensor& singer,
                                                         bool reverse) {
  check_singers(singer);
  auto h = reverse ? grad_reverse(encoder_hidden, cfg_.grl_scale) : encoder_hidden;
  auto logits = classifier_(masked_mean_time(h, token_mask));
  return F::cross_entropy(logits, singer);
}

}  // namespace wesinger2

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace wesinger2 {

enum class Phase { Pretrain, Finetune };
enum class DecayShape { Linear, Exponential };

Phase phase_from_string(const std::string& s);
std::string to_string(Phase p);

struct LrSchedule {
  Phase phase = Phase::Pretrain;
  long total_steps = 1'200'000;
  long warmup_steps = 150'000;
  double lr_init = 8e-4;
  double lr_final = 1e-4;
  DecayShape decay = DecayShape::Linear;

  void validate() const;
};

/// Pretrain: linear warm-up 0 -> lr_init, then decay to lr_final at
/// total_steps. Finetune: constant lr_final.
double lr_at(long step, const LrSchedule& schedule);

/// Fine-tuning data sampler: with probability p_target draws uniformly among
/// the target singer's clips, otherwise uniformly among everyone else's.
class AdaptationSampler {
 public:
  /// `clip_singers[i]` is the singer of clip i. Throws NoTargetClips when the
  /// target has no clip; with no other clips it warns and samples the target only.
  AdaptationSampler(const std::vector<std::string>& clip_singers, const std::string& target_singer, double p_target);

  std::size_t draw(std::mt19937_64& rng) const;
  std::vector<std::size_t> draw_many(std::size_t n, std::mt19937_64& rng) const;

  bool target_only() const { return others_.empty(); }
  const std::vector<std::size_t>& target_clips() const { return target_; }
  const std::vector<std::size_t>& other_clips() const { return others_; }

 private:
  std::vector<std::size_t> target_;
  std::vector<std::size_t> others_;
  double p_target_;
};

}  // namespace wesinger2

#include "wesinger2/schedule.hpp"

#include "wesinger2/error.hpp"

#include <cmath>
#include <iostream>

namespace wesinger2 {

Phase phase_from_string(const std::string& s) {
  if (s == "pretrain") return Phase::Pretrain;
  if (s == "finetune") return Phase::Finetune;
  fail(ErrorCode::InvalidConfig, "phase must be 'pretrain' or 'finetune', got '" + s + "'");
}

std::string to_string(Phase p) { return p == Phase::Pretrain ? "pretrain" : "finetune"; }

void LrSchedule::validate() const {
  if (!(lr_final > 0.0 && lr_final <= lr_init)) fail(ErrorCode::InvalidConfig, "need 0 < lr_final <= lr_init");
  if (total_steps <= 0) fail(ErrorCode::InvalidConfig, "total_steps must be positive");
  if (phase == Phase::Pretrain && !(warmup_steps >= 0 && warmup_steps < total_steps))
    fail(ErrorCode::InvalidConfig, "need 0 <= warmup_steps < total_steps");
}

double lr_at(long step, const LrSchedule& s) {
  s.validate();
  if (step < 0 || step > s.total_steps)
    fail(ErrorCode::StepOutOfRange, "step " + std::to_string(step) + " outside [0, " + std::to_string(s.total_steps) + "]");
  if (s.phase == Phase::Finetune) return s.lr_final;
  if (step < s.warmup_steps) return s.lr_init * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  const double frac = static_cast<double>(step - s.warmup_steps) / static_cast<double>(s.total_steps - s.warmup_steps);
  if (s.decay == DecayShape::Exponential) return s.lr_init * std::pow(s.lr_final / s.lr_init, frac);
  return s.lr_init + (s.lr_final - s.lr_init) * frac;
}

AdaptationSampler::AdaptationSampler(const std::vector<std::string>& clip_singers, const std::string& target_singer,
                                     double p_target)
    : p_target_(p_target) {
  if (!(p_target >= 0.0 && p_target <= 1.0)) fail(ErrorCode::InvalidConfig, "p_target must lie in [0, 1]");
  for (std::size_t i = 0; i < clip_singers.size(); ++i)
    (clip_singers[i] == target_singer ? target_ : others_).push_back(i);
  if (target_.empty()) fail(ErrorCode::NoTargetClips, "no clips for target singer " + target_singer);
  if (others_.empty())
    std::cerr << "warning: " << to_string(ErrorCode::NoOtherClips) << ": only target singer " << target_singer
              << " present; sampling target clips only\n";
}

std::size_t AdaptationSampler::draw(std::mt19937_64& rng) const {
  // Always consume the Bernoulli draw so the stream layout does not depend on the data.
  std::bernoulli_distribution pick_target(p_target_);
  const bool take_target = pick_target(rng) || others_.empty();
  const auto& pool = take_target ? target_ : others_;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

std::vector<std::size_t> AdaptationSampler::draw_many(std::size_t n, std::mt19937_64& rng) const {
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw(rng));
  return out;
}

}  // namespace wesinger2

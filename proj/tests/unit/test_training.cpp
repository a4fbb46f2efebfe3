#include "support/toy_data.hpp"
#include "wesinger2/checkpoint.hpp"
#include "wesinger2/error.hpp"
#include "wesinger2/nn_util.hpp"
#include "wesinger2/schedule.hpp"
#include "wesinger2/trainer.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace wesinger2;
namespace fs = std::filesystem;

namespace {

const TrainingSet& toy_set() {
  static const TrainingSet set = load_training_set(toy::prepared_cache("train_set", 2, 2, 2.0), true);
  return set;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Io;
}

bool same_parameters(torch::nn::Module& a, torch::nn::Module& b) {
  auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!pa[i].equal(pb[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  LrSchedule s;
  CHECK(lr_at(150'000, s) == doctest::Approx(8e-4));
  CHECK(lr_at(1'200'000, s) == doctest::Approx(1e-4));
  CHECK(lr_at(675'000, s) == doctest::Approx(4.5e-4));
  CHECK(lr_at(75'000, s) == doctest::Approx(4e-4));
  CHECK(lr_at(0, s) == 0.0);
  CHECK(code_of([&] { lr_at(1'200'001, s); }) == ErrorCode::StepOutOfRange);
  s.decay = DecayShape::Exponential;
  CHECK(lr_at(1'200'000, s) == doctest::Approx(1e-4));
  CHECK(lr_at(675'000, s) == doctest::Approx(std::sqrt(8e-4 * 1e-4)));
  s.phase = Phase::Finetune;
  CHECK(lr_at(1, s) == 1e-4);
  CHECK(lr_at(5000, s) == 1e-4);
}

TEST_CASE("adaptation sampler") {
  std::vector<std::string> singers(20, "other");
  for (int i = 0; i < 5; ++i) singers[static_cast<std::size_t>(i * 3)] = "target";
  AdaptationSampler s(singers, "target", 0.7);
  std::mt19937_64 rng(1);
  int target = 0;
  for (int i = 0; i < 10000; ++i) target += singers[s.draw(rng)] == "target";
  CHECK(target / 10000.0 >= 0.68);
  CHECK(target / 10000.0 <= 0.72);

  AdaptationSampler only(singers, "target", 1.0);
  for (int i = 0; i < 500; ++i) CHECK(singers[only.draw(rng)] == "target");

  std::mt19937_64 a(9), b(9);
  CHECK(s.draw_many(100, a) == s.draw_many(100, b));
  CHECK(code_of([&] { AdaptationSampler(singers, "nobody", 0.7); }) == ErrorCode::NoTargetClips);
  AdaptationSampler alone(std::vector<std::string>(3, "target"), "target", 0.7);
  CHECK(alone.target_only());
}

TEST_CASE("experiment config files") {
  const auto c = parse_experiment_toml(R"(
[train]
preset = "desk"
tag = "no_cond"
phase = "finetune"
target_singer = "alto"
total_steps = 200
warmup_steps = 0

[mrad]
conditional = false

[vocoder]
use_pitch = false
)");
  CHECK(c.train.tag == "no_cond");
  CHECK(c.acoustic.hidden == 128);
  CHECK(!c.mrad.conditional);
  CHECK(!c.vocoder.use_pitch);
  CHECK(c.lambda_adv() == doctest::Approx(0.7));
  CHECK(ExperimentConfig::preset("full").lambda_adv() == doctest::Approx(1.0));

  CHECK(code_of([] { parse_experiment_toml("[train]\nbogus = 1\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_experiment_toml("[nonsense]\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_experiment_toml("[train]\nbatch_size = \"x\"\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_experiment_toml("[train]\nphase = \"finetune\"\n"); }) == ErrorCode::InvalidConfig);

  const auto j = to_json(c);
  CHECK(to_json(experiment_from_json(j)) == j);
  CHECK(config_hash(j) == config_hash(to_json(experiment_from_json(j))));
  CHECK(config_hash(j) != config_hash(to_json(ExperimentConfig::preset("desk"))));
  CHECK(hash_hex(0xabcULL).size() == 16);
}

TEST_CASE("checkpoint round trip and format check") {
  const auto dir = oracle::temp_dir("ckpt");
  AcousticModel model(tiny::acoustic());
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(1e-3));
  CheckpointMeta meta;
  meta.format = kAcousticFormat;
  meta.step = 17;
  meta.tag = "t";
  meta.singers = {"a", "b"};
  meta.metrics = {{"g_total", 1.5}};
  std::mt19937_64 rng(3);
  rng();
  meta.data_rng = rng_state(rng);
  save_checkpoint(dir / "a.pt", meta, {model.ptr().get(), nullptr, &opt, nullptr});

  const auto back = read_checkpoint_meta(dir / "a.pt");
  CHECK(back.step == 17);
  CHECK(back.singers == meta.singers);
  CHECK(back.metrics == meta.metrics);
  std::mt19937_64 restored;
  restore_rng(restored, back.data_rng);
  CHECK(restored == rng);

  AcousticModel fresh(tiny::acoustic());
  CHECK(!same_parameters(*model, *fresh));
  load_checkpoint(dir / "a.pt", kAcousticFormat, {fresh.ptr().get(), nullptr, nullptr, nullptr});
  CHECK(same_parameters(*model, *fresh));
  CHECK(code_of([&] { load_checkpoint(dir / "a.pt", kVocoderFormat, {fresh.ptr().get(), nullptr, nullptr, nullptr}); }) ==
        ErrorCode::IncompatibleCheckpoints);
  MradEnsemble critic(tiny::mrad());
  CHECK(code_of([&] { load_checkpoint(dir / "a.pt", kAcousticFormat, {nullptr, critic.ptr().get(), nullptr, nullptr}); }) ==
        ErrorCode::IncompatibleCheckpoints);
  fs::remove_all(dir);
}

TEST_CASE("training batches") {
  const auto& data = toy_set();
  REQUIRE(data.clips.size() == 4);
  CHECK(data.singers.size() == 2);
  for (const auto& clip : data.clips) {
    CHECK(clip.target.size(1) == 81);
    CHECK(clip.audio.size(0) == clip.frames() * 240);
    int total = 0;
    for (const auto& t : clip.tokens) total += t.duration_frames;
    CHECK(total == clip.frames());
  }
  std::mt19937_64 rng(1);
  auto ab = make_acoustic_batch(data, {0, 3}, 80, rng);
  CHECK(ab.target.size(0) == 2);
  CHECK(ab.target.size(1) <= 80);
  CHECK(ab.tokens.durations.sum(1).equal(ab.frame_mask.sum(1)));

  auto vb = make_vocoder_batch(data, {1, 2}, 80, rng);
  CHECK(vb.mel.sizes() == torch::IntArrayRef({2, 80, 80}));
  CHECK(vb.keys.sizes() == torch::IntArrayRef({2, 80}));
  CHECK(vb.audio.sizes() == torch::IntArrayRef({2, 19200}));
  CHECK(code_of([&] { make_vocoder_batch(data, {0}, 100000, rng); }) == ErrorCode::DataIncomplete);
}

TEST_CASE("acoustic training is deterministic and resumes bit-identically") {
  const auto& data = toy_set();
  const auto dir = oracle::temp_dir("am_resume");
  auto cfg = toy::micro_config(dir / "a", "resume");
  TrainHooks hooks;
  hooks.stop_after = 6;
  hooks.checkpoint_steps = {3};
  const auto full = train_acoustic(cfg, data, hooks);
  REQUIRE(full.history.size() == 6);
  CHECK(fs::exists(checkpoint_path(dir / "a", "am", 3)));
  CHECK(fs::exists(checkpoint_path(dir / "a", "am", 6)));

  auto again = cfg;
  again.train.out_dir = (dir / "b").string();
  train_acoustic(again, data, hooks);
  CHECK(slurp(dir / "a" / "metrics_am.csv") == slurp(dir / "b" / "metrics_am.csv"));

  auto resumed = cfg;
  resumed.train.out_dir = (dir / "c").string();
  resumed.train.resume = checkpoint_path(dir / "a", "am", 3).string();
  const auto tail = train_acoustic(resumed, data, hooks);
  REQUIRE(tail.history.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(tail.history[i] == full.history[i + 3]);

  AcousticModel x(bind_to_data(cfg, data).acoustic), y(bind_to_data(cfg, data).acoustic);
  load_checkpoint(full.checkpoint, kAcousticFormat, {x.ptr().get(), nullptr, nullptr, nullptr});
  load_checkpoint(tail.checkpoint, kAcousticFormat, {y.ptr().get(), nullptr, nullptr, nullptr});
  CHECK(same_parameters(*x, *y));

  for (const auto& row : full.history) {
    CHECK(std::isfinite(metric(row, "score_gap")));
    CHECK(metric(row, "d_total") > 0.0);
  }
  fs::remove_all(dir);
}

TEST_CASE("zero adversarial weight matches reconstruction-only training") {
  const auto& data = toy_set();
  const auto dir = oracle::temp_dir("am_l1");
  auto with = toy::micro_config(dir / "adv0", "adv0");
  with.train.lambda_adv = 0.0;
  auto without = toy::micro_config(dir / "noadv", "noadv");
  without.train.adversarial = false;
  TrainHooks hooks;
  hooks.stop_after = 4;
  const auto a = train_acoustic(with, data, hooks);
  const auto b = train_acoustic(without, data, hooks);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(metric(a.history[i], "l1_total") == metric(b.history[i], "l1_total"));
    CHECK(metric(a.history[i], "g_total") == metric(b.history[i], "g_total"));
    CHECK(metric(b.history[i], "d_total") == 0.0);
  }
  CHECK(read_checkpoint_meta(b.checkpoint).critic_format.empty());
  fs::remove_all(dir);
}

TEST_CASE("vocoder training, resume and fine-tuning") {
  const auto& data = toy_set();
  const auto dir = oracle::temp_dir("voc");
  auto cfg = toy::micro_config(dir / "v", "voc");
  TrainHooks hooks;
  hooks.stop_after = 4;
  hooks.checkpoint_steps = {2};
  const auto run = train_vocoder(cfg, data, hooks);
  REQUIRE(run.history.size() == 4);
  for (int i = 0; i < 11; ++i) CHECK(std::isfinite(metric(run.history[0], "real_" + std::to_string(i))));
  CHECK(metric(run.history[0], "stft") > 0.0);

  auto resumed = cfg;
  resumed.train.out_dir = (dir / "r").string();
  resumed.train.resume = checkpoint_path(dir / "v", "voc", 2).string();
  const auto tail = train_vocoder(resumed, data, hooks);
  REQUIRE(tail.history.size() == 2);
  CHECK(tail.history[1] == run.history[3]);

  auto ft = cfg;
  ft.train.out_dir = (dir / "ft").string();
  ft.train.phase = Phase::Finetune;
  ft.train.target_singer = data.singers[1];
  ft.train.init_checkpoint = run.checkpoint.string();
  hooks.stop_after = 2;
  const auto tuned = train_vocoder(ft, data, hooks);
  CHECK(metric(tuned.history[0], "lr") == ft.train.lr_final);
  CHECK(read_checkpoint_meta(tuned.checkpoint).phase == Phase::Finetune);

  auto wrong = ft;
  wrong.train.target_singer = "nobody";
  CHECK(code_of([&] { train_vocoder(wrong, data, hooks); }) == ErrorCode::UnknownSinger);
  fs::remove_all(dir);
}

TEST_CASE("non-finite losses abort with a dump") {
  const auto& data = toy_set();
  const auto dir = oracle::temp_dir("nonfinite");
  auto cfg = toy::micro_config(dir / "n", "nan");
  cfg.train.adversarial = false;
  cfg.train.lr_init = cfg.train.lr_final = 1e30;
  cfg.train.warmup_steps = 0;
  TrainHooks hooks;
  hooks.stop_after = 20;
  CHECK(code_of([&] { train_acoustic(cfg, data, hooks); }) == ErrorCode::NonFiniteLoss);
  CHECK(fs::exists(dir / "n" / "nonfinite.json"));
  fs::remove_all(dir);
}

TEST_CASE("shipped configs parse") {
  for (const auto& name : {"desk.toml", "full.toml", "finetune.toml"}) {
    CAPTURE(name);
    const auto cfg = load_experiment_config(fs::path(WS2_CONFIG_DIR) / name);
    CHECK_NOTHROW(cfg.train.validate());
  }
  CHECK(load_experiment_config(fs::path(WS2_CONFIG_DIR) / "finetune.toml").train.phase == Phase::Finetune);
}

// Python bindings for the C++ core.

#include "wesinger2/audio_io.hpp"
#include "wesinger2/dsp_features.hpp"
#include "wesinger2/error.hpp"
#include "wesinger2/experiment_config.hpp"
#include "wesinger2/feature_cache.hpp"
#include "wesinger2/metrics.hpp"
#include "wesinger2/schedule.hpp"
#include "wesinger2/score.hpp"
#include "wesinger2/synthesis.hpp"
#include "wesinger2/toy_corpus.hpp"
#include "wesinger2/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace wesinger2;

namespace {

using Samples = py::array_t<double, py::array::c_style | py::array::forcecast>;

Waveform to_wave(const Samples& x, int sample_rate) {
  if (x.ndim() != 1) throw py::value_error("expected a 1-D array of samples");
  return Waveform{std::vector<double>(x.data(), x.data() + x.size()), sample_rate};
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

}  // namespace

PYBIND11_MODULE(_wesinger2, m) {
  m.doc() = "C++ core of the wesinger2 package";

  // Leaked on purpose: the type must outlive interpreter shutdown.
  static auto* error_type = new py::exception<Error>(m, "WeSingerError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::handle(*error_type)(e.what());
      err.attr("code") = to_string(e.code());
      PyErr_SetObject(error_type->ptr(), err.ptr());
    }
  });

  py::class_<FeatureConfig>(m, "FeatureConfig")
      .def(py::init<>())
      .def_readwrite("sample_rate", &FeatureConfig::sample_rate)
      .def_readwrite("hop_size", &FeatureConfig::hop_size)
      .def_readwrite("win_size", &FeatureConfig::win_size)
      .def_readwrite("n_fft", &FeatureConfig::n_fft)
      .def_readwrite("n_mels", &FeatureConfig::n_mels)
      .def_readwrite("mel_fmin", &FeatureConfig::mel_fmin)
      .def_readwrite("mel_fmax", &FeatureConfig::mel_fmax)
      .def_readwrite("log_floor", &FeatureConfig::log_floor)
      .def_readwrite("f0_min", &FeatureConfig::f0_min)
      .def_readwrite("f0_max", &FeatureConfig::f0_max)
      .def_readwrite("yin_threshold", &FeatureConfig::yin_threshold)
      .def_readwrite("yin_window", &FeatureConfig::yin_window);

  m.def(
      "compute_mel",
      [](const Samples& x, const FeatureConfig& cfg) { return RowMatrix(compute_mel(to_wave(x, cfg.sample_rate), cfg).values); },
      py::arg("samples"), py::arg("config") = FeatureConfig{}, "frames x n_mels natural-log mel spectrogram");

  m.def(
      "estimate_f0",
      [](const Samples& x, const FeatureConfig& cfg) {
        const auto c = estimate_f0_yin(to_wave(x, cfg.sample_rate), cfg);
        std::vector<bool> voiced(c.voiced.begin(), c.voiced.end());
        return py::make_tuple(to_array(c.f0_hz), voiced);
      },
      py::arg("samples"), py::arg("config") = FeatureConfig{}, "YIN F0 in Hz and a voiced flag per frame");

  m.def(
      "interpolate_f0",
      [](const std::vector<double>& f0, const std::vector<bool>& voiced) {
        if (f0.size() != voiced.size()) throw py::value_error("f0 and voiced differ in length");
        F0Contour c{f0, std::vector<std::uint8_t>(voiced.begin(), voiced.end())};
        return to_array(linear_interpolate_f0(c).f0_hz);
      },
      py::arg("f0"), py::arg("voiced"), "fills unvoiced gaps by linear interpolation");

  m.def("hz_to_piano_key", &hz_to_piano_key, py::arg("hz"));
  m.def("piano_key_to_hz", &piano_key_to_hz, py::arg("key"));
  m.def(
      "quantize_to_piano_keys", [](const std::vector<double>& f0) { return quantize_to_piano_keys(LIF0{f0}).keys; },
      py::arg("f0"));

  m.def(
      "parse_score",
      [](const std::string& text) {
        py::list out;
        for (const auto& n : parse_score_text(text)) {
          py::object pitch = n.midi_pitch ? py::object(py::int_(*n.midi_pitch)) : py::object(py::none());
          out.append(py::make_tuple(n.phoneme, pitch, n.onset_ms, n.offset_ms));
        }
        return out;
      },
      py::arg("text"), "notes as (phoneme, midi pitch or None, onset ms, offset ms)");
  m.def("note_frames", &note_frames, py::arg("length_ms"), py::arg("hop_ms"));

  m.def(
      "lr_at",
      [](long step, const std::string& phase, long total, long warmup, double lr_init, double lr_final) {
        LrSchedule s;
        s.phase = phase_from_string(phase);
        s.total_steps = total;
        s.warmup_steps = warmup;
        s.lr_init = lr_init;
        s.lr_final = lr_final;
        return lr_at(step, s);
      },
      py::arg("step"), py::arg("phase") = "pretrain", py::arg("total_steps") = 1'200'000,
      py::arg("warmup_steps") = 150'000, py::arg("lr_init") = 8e-4, py::arg("lr_final") = 1e-4);

  m.def(
      "mel_distortion",
      [](const Samples& gen, const Samples& ref, const FeatureConfig& cfg) {
        return mel_distortion(to_wave(gen, cfg.sample_rate), to_wave(ref, cfg.sample_rate), cfg);
      },
      py::arg("generated"), py::arg("reference"), py::arg("config") = FeatureConfig{});
  m.def(
      "f0_rmse",
      [](const Samples& gen, const Samples& ref, const FeatureConfig& cfg) {
        return f0_rmse(to_wave(gen, cfg.sample_rate), to_wave(ref, cfg.sample_rate), cfg);
      },
      py::arg("generated"), py::arg("reference"), py::arg("config") = FeatureConfig{});

  m.def(
      "make_toy_corpus",
      [](const std::filesystem::path& dir, int singers, int clips, double seconds, std::uint64_t seed) {
        return make_toy_corpus(dir, singers, clips, seconds, seed).size();
      },
      py::arg("out_dir"), py::arg("singers") = 2, py::arg("clips") = 3, py::arg("seconds") = 4.0, py::arg("seed") = 7,
      "renders a synthetic corpus and its manifest.jsonl; returns the clip count");
  m.def(
      "prepare_cache",
      [](const std::filesystem::path& manifest, const std::filesystem::path& out_dir, const FeatureConfig& cfg) {
        return prepare_cache(read_manifest(manifest), out_dir, cfg).clip_ids.size();
      },
      py::arg("manifest"), py::arg("out_dir"), py::arg("config") = FeatureConfig{});

  m.def(
      "train",
      [](const std::filesystem::path& config, const std::filesystem::path& cache, const std::filesystem::path& out,
         bool vocoder, long steps) {
        py::gil_scoped_release release;
        auto cfg = load_experiment_config(config);
        cfg.train.cache_dir = cache.string();
        cfg.train.out_dir = out.string();
        const auto data = load_training_set(cache, vocoder);
        TrainHooks hooks;
        hooks.stop_after = steps;
        const auto s = vocoder ? train_vocoder(cfg, data, hooks) : train_acoustic(cfg, data, hooks);
        py::gil_scoped_acquire acquire;
        return py::dict(py::arg("last_step") = s.last_step, py::arg("checkpoint") = s.checkpoint.string(),
                        py::arg("metrics_csv") = s.metrics_csv.string());
      },
      py::arg("config"), py::arg("cache"), py::arg("out_dir"), py::arg("vocoder") = false, py::arg("steps") = 0,
      "trains the acoustic model (or the vocoder) and returns the run summary");

  m.def(
      "synthesize",
      [](const std::filesystem::path& am_path, const std::filesystem::path& voc_path, const std::string& score,
         const std::string& singer, bool predicted_durations) {
        SynthesisResult r;
        {
          py::gil_scoped_release release;
          auto am = load_acoustic(am_path);
          auto voc = load_vocoder(voc_path);
          SynthesisOptions opts;
          opts.use_gt_duration = !predicted_durations;
          r = synthesize(am, voc, parse_score_text(score), singer, opts);
        }
        return py::make_tuple(to_array(r.audio.samples), r.audio.sample_rate);
      },
      py::arg("acoustic_checkpoint"), py::arg("vocoder_checkpoint"), py::arg("score"), py::arg("singer"),
      py::arg("predicted_durations") = false, "returns (audio, sample_rate)");
}

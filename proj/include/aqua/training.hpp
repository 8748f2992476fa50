#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aqua/backbone.hpp"
#include "aqua/checkpoint.hpp"
#include "aqua/dataset.hpp"
#include "aqua/image.hpp"
#include "aqua/metrics.hpp"

namespace aqua {

enum class Ablation { kBase, kBaseFreq, kBaseIllum, kFull };

inline const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kBase:
      return "base";
    case Ablation::kBaseFreq:
      return "base+freq";
    case Ablation::kBaseIllum:
      return "base+illum";
    case Ablation::kFull:
      return "full";
  }
  return "full";
}

inline std::optional<Ablation> parse_ablation(const std::string& s) {
  if (s == "base") return Ablation::kBase;
  if (s == "base+freq") return Ablation::kBaseFreq;
  if (s == "base+illum") return Ablation::kBaseIllum;
  if (s == "full") return Ablation::kFull;
  return std::nullopt;
}

struct TrainConfig {
  double lr = 0.001;
  int batch = 8;
  int epochs = 100;
  int input_size = 128;
  std::uint64_t seed = 1;
  std::string loss = "l1";
  Ablation ablation = Ablation::kFull;
  int base_channels = 19;
  int checkpoint_every = 10;  // epochs; final state is always written

  AquaNetConfig model_config() const {
    AquaNetConfig cfg;
    cfg.base_channels = base_channels;
    cfg.input_size = input_size;
    cfg.enable_frequency = ablation == Ablation::kBaseFreq || ablation == Ablation::kFull;
    cfg.enable_illumination = ablation == Ablation::kBaseIllum || ablation == Ablation::kFull;
    return cfg;
  }
};

struct TrainStep {
  std::int64_t step;
  int epoch;
  double loss;
  double seconds;  // elapsed wall time at the end of the step
};

struct TrainLog {
  std::vector<TrainStep> steps;
  std::vector<double> epoch_mean_loss;

  std::string to_csv() const {
    std::ostringstream os;
    os << "step,epoch,loss,seconds\n";
    for (const auto& s : steps) {
      os << s.step << "," << s.epoch << "," << s.loss << "," << s.seconds << "\n";
    }
    return os.str();
  }

  void write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot create '" + path + "'");
    f << to_csv();
  }
};

// ---------------------------------------------------------------------------

/// Mean absolute deviation over all elements.
template <typename T>
T l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  return ops::mean_abs_diff(pred, target);
}

/// Plain SGD: w <- w - lr * g, then gradients are cleared. No momentum, no
/// weight decay. A non-finite gradient aborts before any update is applied.
template <typename T>
void sgd_step(const std::vector<Param<T>*>& params, T lr) {
  for (Param<T>* p : params) {
    if (!ops::all_finite(p->grad)) {
      throw InternalError("sgd: non-finite gradient in parameter '" + p->name + "'");
    }
  }
  for (Param<T>* p : params) {
    for (std::int64_t i = 0; i < p->value.numel(); ++i) p->value[i] -= lr * p->grad[i];
    p->zero_grad();
  }
}

namespace train_detail {

/// Seeded Fisher-Yates; stable across platforms.
inline std::vector<int> shuffled_indices(int n, std::uint64_t seed, int epoch) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  CounterRng rng(seed, "shuffle");
  for (int i = n - 1; i > 0; --i) {
    const std::uint64_t counter =
        (static_cast<std::uint64_t>(epoch) << 24) + static_cast<std::uint64_t>(i);
    const int j = static_cast<int>(rng.below(counter, static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

inline Tensor<float> stack_batch(const std::vector<Tensor<float>>& images,
                                 const std::vector<int>& order, std::size_t begin,
                                 std::size_t end) {
  const Shape one = images[static_cast<std::size_t>(order[begin])].shape();
  Tensor<float> batch(Shape{static_cast<int>(end - begin), one.c, one.h, one.w});
  const std::int64_t chw = static_cast<std::int64_t>(one.c) * one.h * one.w;
  for (std::size_t b = begin; b < end; ++b) {
    const Tensor<float>& src = images[static_cast<std::size_t>(order[b])];
    float* dst = batch.data() + static_cast<std::int64_t>(b - begin) * chw;
    for (std::int64_t i = 0; i < chw; ++i) dst[i] = src[i];
  }
  return batch;
}

}  // namespace train_detail

struct TrainResult {
  AquaNetParams<float> params;
  TrainLog log;
};

/// Deterministic SGD training over the paired manifest. Images are resized to
/// the configured square size; the per-epoch shuffle, batch composition and
/// every kernel are reproducible, so identical (seed, data, config) yield
/// bitwise-identical parameters. When out_dir is set, checkpoints are written
/// every `checkpoint_every` epochs plus a final one, with the step log as CSV.
inline TrainResult train(const TrainConfig& cfg, const DatasetManifest& data,
                         const std::string& out_dir = "") {
  if (cfg.loss != "l1") throw ConfigError("train: unsupported loss '" + cfg.loss + "'");
  if (data.pairs.empty()) throw ManifestError("train: dataset has no image pairs");
  for (const auto& pair : data.pairs) {
    if (!pair.has_reference()) {
      throw ManifestError("train: raw image '" + pair.name + "' lacks a reference");
    }
  }
  namespace fs = std::filesystem;
  if (!out_dir.empty()) fs::create_directories(out_dir);

  std::vector<Tensor<float>> inputs, targets;
  inputs.reserve(data.pairs.size());
  targets.reserve(data.pairs.size());
  for (const auto& pair : data.pairs) {
    inputs.push_back(to_model_range(load_png(pair.raw_path), cfg.input_size));
    targets.push_back(to_model_range(load_png(pair.reference_path), cfg.input_size));
  }

  TrainResult result{init_params<float>(cfg.model_config(), cfg.seed), {}};
  auto params = result.params.all();
  const int n = static_cast<int>(inputs.size());
  const auto t0 = std::chrono::steady_clock::now();
  std::int64_t step = 0;

  auto maybe_checkpoint = [&](int epoch_done) {
    if (out_dir.empty()) return;
    if (cfg.checkpoint_every > 0 && epoch_done > 0 && epoch_done % cfg.checkpoint_every == 0) {
      std::ostringstream name;
      name << out_dir << "/epoch_" << epoch_done << ".aqnt";
      save_checkpoint(result.params, name.str());
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = train_detail::shuffled_indices(n, cfg.seed, epoch);
    double epoch_loss = 0.0;
    int epoch_batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch));
      Tensor<float> x = train_detail::stack_batch(inputs, order, begin, end);
      Tensor<float> y = train_detail::stack_batch(targets, order, begin, end);
      Tape<float> tape;
      auto out = aquanet_fwd(tape, tape.constant(std::move(x), "input"), result.params);
      Var loss = ad::l1_loss(tape, out.enhanced, tape.constant(std::move(y), "target"));
      const double loss_value = tape.val(loss)[0];
      tape.backward(loss);
      sgd_step(params, static_cast<float>(cfg.lr));
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.log.steps.push_back(TrainStep{step++, epoch, loss_value, elapsed});
      epoch_loss += loss_value;
      ++epoch_batches;
    }
    result.log.epoch_mean_loss.push_back(epoch_loss / std::max(1, epoch_batches));
    maybe_checkpoint(epoch + 1);
  }

  if (!out_dir.empty()) {
    save_checkpoint(result.params, out_dir + "/final.aqnt");
    result.log.write_csv(out_dir + "/train_log.csv");
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inference and evaluation.

/// Enhances one image at its native size. Inputs whose dimensions are not
/// multiples of 8 are reflect-padded for the forward pass and cropped back.
inline RgbImage8 enhance_image(AquaNetParams<float>& params, const RgbImage8& img) {
  Tensor<float> t = image_to_tensor<float>(img);
  const int oh = img.h, ow = img.w;
  t = pad_reflect_to_multiple(t, 8);
  auto out = aquanet_apply(t, params);
  Tensor<float> restored = crop_top_left(out.enhanced, oh, ow);
  return from_model_range(restored);
}

struct EvalRow {
  std::string image;
  double psnr = 0.0;
  double ssim = 0.0;
  double uiqm = 0.0;
  double uciqe = 0.0;
};

struct EvalTable {
  bool with_reference = false;
  std::vector<EvalRow> rows;
  std::vector<std::string> skipped;  // unreadable or mismatched images
  EvalRow mean;                      // arithmetic mean over rows (image = "mean")

  std::string to_csv() const {
    std::ostringstream os;
    auto put = [&](const EvalRow& r) {
      os << r.image;
      if (with_reference) {
        os << ",";
        if (std::isinf(r.psnr)) {
          os << "inf";
        } else {
          os << r.psnr;
        }
        os << "," << r.ssim;
      }
      os << "," << r.uiqm << "," << r.uciqe << "\n";
    };
    os << (with_reference ? "image,psnr,ssim,uiqm,uciqe" : "image,uiqm,uciqe") << "\n";
    for (const auto& r : rows) put(r);
    if (!rows.empty()) put(mean);
    return os.str();
  }
};

/// Per-image metrics for every readable pair. PSNR/SSIM are produced only
/// when the manifest carries references; the mean row is the arithmetic mean
/// (an identical pair makes the PSNR mean +inf by propagation).
inline EvalTable evaluate(AquaNetParams<float>& params, const DatasetManifest& data) {
  EvalTable table;
  table.with_reference = data.has_references;
  double acc_psnr = 0, acc_ssim = 0, acc_uiqm = 0, acc_uciqe = 0;
  for (const auto& pair : data.pairs) {
    RgbImage8 raw, ref;
    try {
      raw = load_png(pair.raw_path);
      if (pair.has_reference()) ref = load_png(pair.reference_path);
    } catch (const std::exception&) {
      table.skipped.push_back(pair.name);
      continue;
    }
    if (pair.has_reference() && (ref.h != raw.h || ref.w != raw.w)) {
      table.skipped.push_back(pair.name);
      continue;
    }
    const RgbImage8 enhanced = enhance_image(params, raw);
    EvalRow row;
    row.image = pair.name;
    row.uiqm = uiqm(enhanced);
    row.uciqe = uciqe(enhanced);
    if (table.with_reference) {
      row.psnr = psnr(enhanced, ref);
      row.ssim = ssim(enhanced, ref);
    }
    acc_psnr += row.psnr;
    acc_ssim += row.ssim;
    acc_uiqm += row.uiqm;
    acc_uciqe += row.uciqe;
    table.rows.push_back(std::move(row));
  }
  if (!table.rows.empty()) {
    const double n = static_cast<double>(table.rows.size());
    table.mean = EvalRow{"mean", acc_psnr / n, acc_ssim / n, acc_uiqm / n, acc_uciqe / n};
  }
  return table;
}

}  // namespace aqua

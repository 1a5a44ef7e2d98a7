/*
 * Copyright 2026 The mvfusion Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Multi-view dataset schema, its on-disk format, preprocessing and a
// synthetic generator.
//
// On-disk layout (one directory):
//   manifest.json   {"name", "num_samples", "timesteps",
//                    "views": [{"name", "channels", "static", "file"}...],
//                    "labels_file", "splits": {"train", "val", "test"}}
//   <view file>     raw float32 little-endian, row-major [N,T,C], or [N,C]
//                   for static views; no header
//   <labels file>   one unsigned byte (0 or 1) per sample

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvfusion/errors.hpp"
#include "mvfusion/io.hpp"
#include "mvfusion/rng.hpp"

namespace mvfusion {

struct ViewSpec {
  std::string name;
  std::size_t channels = 1;
  std::size_t timesteps = 0;  // 0 for static views
  bool is_static = false;
  std::string file;

  // Elements per sample.
  std::size_t sample_size() const {
    return is_static ? channels : channels * timesteps;
  }
};

struct ViewData {
  ViewSpec spec;
  std::vector<float> values;  // [N,T,C] or [N,C]
};

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  bool operator==(const Splits&) const = default;
};

// Immutable after construction; the constructor enforces every invariant.
class MultiViewDataset {
 public:
  MultiViewDataset() = default;
  MultiViewDataset(std::string name, std::size_t timesteps,
                   std::vector<ViewData> views,
                   std::vector<std::uint8_t> labels, Splits splits)
      : name_(std::move(name)),
        timesteps_(timesteps),
        views_(std::move(views)),
        labels_(std::move(labels)),
        splits_(std::move(splits)) {
    validate();
  }

  const std::string& name() const { return name_; }
  std::size_t num_samples() const { return labels_.size(); }
  std::size_t timesteps() const { return timesteps_; }
  std::size_t num_views() const { return views_.size(); }
  const std::vector<ViewData>& views() const { return views_; }
  const ViewData& view(std::size_t i) const { return views_.at(i); }
  const std::vector<std::uint8_t>& labels() const { return labels_; }
  const Splits& splits() const { return splits_; }

  std::vector<ViewSpec> view_specs() const {
    std::vector<ViewSpec> out;
    for (const auto& v : views_) out.push_back(v.spec);
    return out;
  }

  std::size_t view_index(const std::string& view_name) const {
    for (std::size_t i = 0; i < views_.size(); ++i)
      if (views_[i].spec.name == view_name) return i;
    throw ConfigError("unknown view '" + view_name + "'");
  }

  MultiViewDataset with_splits(Splits splits) const {
    return MultiViewDataset(name_, timesteps_, views_, labels_, std::move(splits));
  }

  bool operator==(const MultiViewDataset& o) const {
    if (name_ != o.name_ || timesteps_ != o.timesteps_ || labels_ != o.labels_ ||
        !(splits_ == o.splits_) || views_.size() != o.views_.size())
      return false;
    for (std::size_t i = 0; i < views_.size(); ++i) {
      const auto& a = views_[i];
      const auto& b = o.views_[i];
      if (a.spec.name != b.spec.name || a.spec.channels != b.spec.channels ||
          a.spec.is_static != b.spec.is_static ||
          a.spec.timesteps != b.spec.timesteps)
        return false;
      // Bitwise comparison, so NaN payloads and signed zeros count.
      if (io::encode_f32(a.values) != io::encode_f32(b.values)) return false;
    }
    return true;
  }

 private:
  std::string name_;
  std::size_t timesteps_ = 0;
  std::vector<ViewData> views_;
  std::vector<std::uint8_t> labels_;
  Splits splits_;

  void validate() const {
    const std::size_t n = labels_.size();
    if (views_.empty()) throw SchemaError("dataset has no views");
    std::set<std::string> names;
    for (const auto& v : views_) {
      const ViewSpec& s = v.spec;
      if (s.name.empty()) throw SchemaError("view with empty name");
      if (!names.insert(s.name).second)
        throw SchemaError("duplicate view name '" + s.name + "'");
      if (s.channels < 1) throw SchemaError("view '" + s.name + "' has no channels");
      if (s.is_static != (s.timesteps == 0))
        throw SchemaError("view '" + s.name + "': static iff timesteps == 0");
      if (!s.is_static && s.timesteps != timesteps_)
        throw SchemaError("view '" + s.name + "' timesteps differ from dataset");
      if (v.values.size() != n * s.sample_size())
        throw CorruptionError("view '" + s.name + "' holds " +
                              std::to_string(v.values.size()) + " values, expected " +
                              std::to_string(n * s.sample_size()));
    }
    for (std::uint8_t y : labels_)
      if (y > 1) throw CorruptionError("label outside {0,1}");
    std::vector<char> seen(n, 0);
    for (const auto* list : {&splits_.train, &splits_.val, &splits_.test})
      for (std::size_t i : *list) {
        if (i >= n)
          throw RangeError("split index " + std::to_string(i) + " out of range [0," +
                           std::to_string(n) + ")");
        if (seen[i]) throw SchemaError("split lists overlap at index " + std::to_string(i));
        seen[i] = 1;
      }
  }
};

namespace detail {

inline std::string view_file_name(const ViewSpec& s) {
  return s.file.empty() ? s.name + ".f32" : s.file;
}

inline std::vector<std::size_t> read_index_list(const nlohmann::json& j,
                                                const char* key) {
  if (!j.contains(key)) return {};
  const auto& arr = j.at(key);
  if (!arr.is_array()) throw SchemaError(std::string("split '") + key + "' is not a list");
  std::vector<std::size_t> out;
  for (const auto& e : arr) {
    if (!e.is_number_integer()) throw SchemaError("split entries must be integers");
    if (e.get<long long>() < 0) throw RangeError("negative split index");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

}  // namespace detail

inline nlohmann::json manifest_json(const MultiViewDataset& d,
                                    const std::string& labels_file = "labels.u8") {
  nlohmann::json views = nlohmann::json::array();
  for (const auto& v : d.views())
    views.push_back({{"name", v.spec.name},
                     {"channels", v.spec.channels},
                     {"static", v.spec.is_static},
                     {"file", detail::view_file_name(v.spec)}});
  return {{"name", d.name()},
          {"num_samples", d.num_samples()},
          {"timesteps", d.timesteps()},
          {"views", views},
          {"labels_file", labels_file},
          {"splits",
           {{"train", d.splits().train}, {"val", d.splits().val}, {"test", d.splits().test}}}};
}

// Writes manifest.json plus one binary per view and the labels file into
// `dir`; returns the manifest path.
inline std::filesystem::path write_dataset(const MultiViewDataset& d,
                                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& v : d.views())
    io::atomic_write(dir / detail::view_file_name(v.spec), io::encode_f32(v.values));
  std::string labels(d.labels().begin(), d.labels().end());
  io::atomic_write(dir / "labels.u8", labels);
  const auto manifest = dir / "manifest.json";
  io::atomic_write(manifest, manifest_json(d).dump(2) + "\n");
  return manifest;
}

inline MultiViewDataset load_dataset(const std::filesystem::path& manifest_path) {
  if (!std::filesystem::exists(manifest_path))
    throw IoError("manifest not found: " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("manifest is not valid JSON: ") + e.what());
  }
  const auto dir = manifest_path.parent_path();
  try {
    const auto n = j.at("num_samples").get<std::size_t>();
    const auto timesteps = j.at("timesteps").get<std::size_t>();
    if (!j.at("views").is_array()) throw SchemaError("'views' must be a list");
    std::vector<ViewData> views;
    for (const auto& jv : j.at("views")) {
      ViewSpec s;
      s.name = jv.at("name").get<std::string>();
      s.channels = jv.at("channels").get<std::size_t>();
      s.is_static = jv.at("static").get<bool>();
      s.timesteps = s.is_static ? 0 : timesteps;
      s.file = jv.at("file").get<std::string>();
      if (s.channels < 1) throw SchemaError("view '" + s.name + "' has no channels");
      for (const auto& prev : views)
        if (prev.spec.name == s.name)
          throw SchemaError("duplicate view name '" + s.name + "'");
      const auto path = dir / s.file;
      if (!std::filesystem::exists(path)) throw IoError("missing view file " + path.string());
      const std::size_t expected = n * s.sample_size() * 4;
      const auto actual = std::filesystem::file_size(path);
      if (actual != expected)
        throw CorruptionError("view file " + path.string() + " has " +
                              std::to_string(actual) + " bytes, expected " +
                              std::to_string(expected));
      views.push_back({s, io::decode_f32(io::read_file(path))});
    }
    const auto labels_path = dir / j.at("labels_file").get<std::string>();
    if (!std::filesystem::exists(labels_path))
      throw IoError("missing labels file " + labels_path.string());
    const std::string raw = io::read_file(labels_path);
    if (raw.size() != n)
      throw CorruptionError("labels file has " + std::to_string(raw.size()) +
                            " bytes, expected " + std::to_string(n));
    std::vector<std::uint8_t> labels(raw.begin(), raw.end());
    Splits splits;
    if (j.contains("splits")) {
      const auto& js = j.at("splits");
      if (!js.is_object()) throw SchemaError("'splits' must be an object");
      splits.train = detail::read_index_list(js, "train");
      splits.val = detail::read_index_list(js, "val");
      splits.test = detail::read_index_list(js, "test");
    }
    return MultiViewDataset(j.value("name", std::string("dataset")), timesteps,
                            std::move(views), std::move(labels), std::move(splits));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed manifest: ") + e.what());
  }
}

// Averages raw [N, T_raw, C] series into target bins; bin t covers raw steps
// [edges[t], edges[t+1]).
inline std::vector<float> temporal_average(std::span<const float> raw,
                                           std::size_t n, std::size_t t_raw,
                                           std::size_t channels,
                                           std::span<const std::size_t> edges) {
  if (raw.size() != n * t_raw * channels)
    throw ShapeError("temporal_average: raw array size does not match [N,T,C]");
  if (edges.size() < 2) throw PartitionError("need at least one bin");
  if (edges.front() != 0 || edges.back() != t_raw)
    throw PartitionError("bin edges must span [0, T_raw]");
  for (std::size_t b = 0; b + 1 < edges.size(); ++b)
    if (edges[b + 1] <= edges[b]) throw PartitionError("empty or reversed bin " + std::to_string(b));
  const std::size_t target = edges.size() - 1;
  std::vector<float> out(n * target * channels);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < target; ++b)
      for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (std::size_t t = edges[b]; t < edges[b + 1]; ++t)
          sum += raw[(i * t_raw + t) * channels + c];
        out[(i * target + b) * channels + c] =
            static_cast<float>(sum / static_cast<double>(edges[b + 1] - edges[b]));
      }
  return out;
}

struct ChannelStats {
  double mean = 0.0;
  double std = 1.0;
  bool constant = false;
};

// Per-view, per-channel train-split statistics.
struct Standardization {
  std::vector<std::vector<ChannelStats>> views;

  MultiViewDataset apply(const MultiViewDataset& d) const {
    if (views.size() != d.num_views())
      throw ConfigError("standardization has wrong number of views");
    std::vector<ViewData> out = d.views();
    for (std::size_t v = 0; v < out.size(); ++v) {
      const std::size_t c = out[v].spec.channels;
      if (views[v].size() != c) throw ConfigError("standardization channel mismatch");
      for (std::size_t k = 0; k < out[v].values.size(); ++k) {
        const ChannelStats& s = views[v][k % c];
        float& x = out[v].values[k];
        x = s.constant ? 0.0f
                       : static_cast<float>((static_cast<double>(x) - s.mean) / s.std);
      }
    }
    return MultiViewDataset(d.name(), d.timesteps(), std::move(out), d.labels(),
                            d.splits());
  }
};

// Population statistics over train samples (and timesteps). Channels with
// zero spread are flagged constant and mapped to 0.
inline Standardization fit_standardization(const MultiViewDataset& d) {
  const auto& train = d.splits().train;
  if (train.empty()) throw ConfigError("standardize: empty train split");
  Standardization st;
  for (const auto& v : d.views()) {
    const std::size_t c = v.spec.channels;
    const std::size_t per = v.spec.sample_size();
    std::vector<double> sum(c, 0.0), sq(c, 0.0);
    std::size_t count = 0;
    for (std::size_t i : train)
      for (std::size_t k = 0; k < per; ++k) sum[k % c] += v.values[i * per + k];
    count = train.size() * (per / c);
    std::vector<ChannelStats> stats(c);
    for (std::size_t ch = 0; ch < c; ++ch) stats[ch].mean = sum[ch] / double(count);
    for (std::size_t i : train)
      for (std::size_t k = 0; k < per; ++k) {
        const double dlt = v.values[i * per + k] - stats[k % c].mean;
        sq[k % c] += dlt * dlt;
      }
    for (std::size_t ch = 0; ch < c; ++ch) {
      stats[ch].std = std::sqrt(sq[ch] / double(count));
      stats[ch].constant =
          stats[ch].std <= 1e-12 * std::max(1.0, std::abs(stats[ch].mean));
      if (stats[ch].constant) stats[ch].std = 1.0;
    }
    st.views.push_back(std::move(stats));
  }
  return st;
}

inline std::pair<MultiViewDataset, Standardization> standardize(
    const MultiViewDataset& d) {
  Standardization st = fit_standardization(d);
  return {st.apply(d), st};
}

// Random disjoint split of `indices`; |val| = round(fraction * |indices|),
// clamped to [1, |indices| - 1]. Both outputs are sorted.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    std::span<const std::size_t> indices, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ConfigError("validation fraction must lie in (0,1)");
  if (indices.size() < 2) throw ConfigError("need at least two samples to split");
  std::vector<std::size_t> shuffled(indices.begin(), indices.end());
  Rng rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto k = static_cast<std::size_t>(std::llround(val_fraction * double(indices.size())));
  k = std::clamp<std::size_t>(k, 1, indices.size() - 1);
  std::vector<std::size_t> val(shuffled.begin(), shuffled.begin() + std::ptrdiff_t(k));
  std::vector<std::size_t> train(shuffled.begin() + std::ptrdiff_t(k), shuffled.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(val)};
}

struct SynthViewConfig {
  std::string name;
  std::size_t channels = 1;
  bool is_static = false;
  double informativeness = 1.0;
  double noise_scale = 1.0;
};

struct SynthConfig {
  std::string name = "synthetic";
  std::size_t num_samples = 2000;
  std::size_t timesteps = 12;
  std::vector<SynthViewConfig> views;
  double positive_fraction = 0.5;
  double test_fraction = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_samples < 1) throw ConfigError("num_samples must be positive");
    if (timesteps < 1) throw ConfigError("timesteps must be positive");
    if (views.empty()) throw ConfigError("at least one view is required");
    if (!(positive_fraction > 0.0 && positive_fraction < 1.0))
      throw ConfigError("positive_fraction must lie in (0,1)");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
      throw ConfigError("test_fraction must lie in [0,1)");
    std::set<std::string> names;
    for (const auto& v : views) {
      if (v.name.empty() || !names.insert(v.name).second)
        throw ConfigError("view names must be unique and non-empty");
      if (v.channels < 1) throw ConfigError("view '" + v.name + "' needs channels >= 1");
      if (!(v.informativeness >= 0.0 && v.informativeness <= 1.0))
        throw ConfigError("informativeness of '" + v.name + "' must lie in [0,1]");
      if (!(v.noise_scale > 0.0))
        throw ConfigError("noise_scale of '" + v.name + "' must be positive");
    }
  }
};

// Mahalanobis distance between the two class means of a view at
// informativeness 1 and unit noise.
inline constexpr double kSynthSeparation = 3.0;

// Class-conditional mean of one synthetic view, flattened [T,C] or [C], at
// informativeness 1 and before noise. Temporal views follow a seasonal
// sinusoid whose amplitude and phase depend on the class; static views are
// shifted by a class-dependent offset.
inline std::vector<double> synth_class_template(const SynthViewConfig& v,
                                                std::size_t timesteps, int label) {
  constexpr double kPi = std::numbers::pi;
  std::vector<double> mu[2];
  for (int y = 0; y < 2; ++y) {
    if (v.is_static) {
      for (std::size_t c = 0; c < v.channels; ++c)
        mu[y].push_back((y ? 0.5 : -0.5) * std::cos(1.3 * double(c) + 0.4));
    } else {
      const double amplitude = y ? 1.5 : 1.0;
      const double phase = y ? kPi / 3.0 : 0.0;
      for (std::size_t t = 0; t < timesteps; ++t)
        for (std::size_t c = 0; c < v.channels; ++c)
          mu[y].push_back(amplitude * std::sin(2.0 * kPi * double(t) / double(timesteps) +
                                               phase + 0.6 * double(c)));
    }
  }
  double norm = 0.0;
  for (std::size_t k = 0; k < mu[0].size(); ++k)
    norm += (mu[1][k] - mu[0][k]) * (mu[1][k] - mu[0][k]);
  norm = std::sqrt(norm);
  std::vector<double> out = mu[label ? 1 : 0];
  for (double& x : out) x *= kSynthSeparation / norm;
  return out;
}

inline MultiViewDataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.num_samples;
  Rng label_rng(derive_seed(cfg.seed, 0));
  std::bernoulli_distribution coin(cfg.positive_fraction);
  std::vector<std::uint8_t> labels(n);
  for (auto& y : labels) y = coin(label_rng) ? 1 : 0;

  std::vector<ViewData> views;
  for (std::size_t v = 0; v < cfg.views.size(); ++v) {
    const SynthViewConfig& vc = cfg.views[v];
    ViewSpec spec{vc.name, vc.channels, vc.is_static ? 0 : cfg.timesteps,
                  vc.is_static, vc.name + ".f32"};
    const std::vector<double> mu[2] = {synth_class_template(vc, cfg.timesteps, 0),
                                       synth_class_template(vc, cfg.timesteps, 1)};
    const std::size_t per = spec.sample_size();
    Rng rng(derive_seed(cfg.seed, 1 + v));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<float> values(n * per);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < per; ++k)
        values[i * per + k] = static_cast<float>(
            vc.informativeness * mu[labels[i]][k] + vc.noise_scale * noise(rng));
    views.push_back({std::move(spec), std::move(values)});
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng split_rng(derive_seed(cfg.seed, 1000));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * double(n)));
  Splits splits;
  splits.test.assign(order.begin(), order.begin() + std::ptrdiff_t(n_test));
  splits.train.assign(order.begin() + std::ptrdiff_t(n_test), order.end());
  std::sort(splits.test.begin(), splits.test.end());
  std::sort(splits.train.begin(), splits.train.end());
  return MultiViewDataset(cfg.name, cfg.timesteps, std::move(views), std::move(labels),
                          std::move(splits));
}

}  // namespace mvfusion

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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "mvfusion/datamodel.hpp"
#include "mvfusion/io.hpp"
#include "mvfusion/metrics.hpp"
#include "test_util.hpp"

namespace mvfusion {
namespace {

namespace fs = std::filesystem;
using testing::random_dataset;
using testing::TempDir;

MultiViewDataset tiny_dataset(Splits sp = {{0}, {}, {2}}) {
  ViewSpec a{"a", 2, 3, false, ""};
  ViewSpec s{"s", 1, 0, true, ""};
  std::vector<float> av(3 * 3 * 2);
  std::iota(av.begin(), av.end(), 0.0f);
  return MultiViewDataset("tiny", 3, {{a, av}, {s, {1.0f, 2.0f, 3.0f}}}, {1, 0, 1},
                          std::move(sp));
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary).write(bytes.data(), std::streamsize(bytes.size()));
}

// ---- schema invariants

TEST(Schema, RejectsInvalidDatasets) {
  const ViewSpec a{"a", 1, 2, false, ""};
  EXPECT_THROW(MultiViewDataset("d", 2, {{a, {0, 0}}, {a, {0, 0}}}, {0}, {}), SchemaError);
  EXPECT_THROW(MultiViewDataset("d", 2, {{ViewSpec{"b", 1, 0, false, ""}, {0}}}, {0}, {}),
               SchemaError);
  EXPECT_THROW(MultiViewDataset("d", 2, {{a, {0, 0, 0}}}, {0}, {}), CorruptionError);
  EXPECT_THROW(MultiViewDataset("d", 2, {{a, {0, 0}}}, {2}, {}), CorruptionError);
  EXPECT_THROW(MultiViewDataset("d", 2, {{a, {0, 0}}}, {0}, {{1}, {}, {}}), RangeError);
  EXPECT_THROW(MultiViewDataset("d", 2, {{a, {0, 0, 0, 0}}}, {0, 1}, {{0}, {}, {0}}),
               SchemaError);
  EXPECT_THROW(MultiViewDataset("d", 3, {{a, {0, 0}}}, {0}, {}), SchemaError);
}

TEST(Schema, ViewIndexLookup) {
  const auto d = tiny_dataset();
  EXPECT_EQ(d.view_index("s"), 1u);
  EXPECT_THROW(d.view_index("nope"), ConfigError);
}

// ---- format

TEST(Format, RoundTripIsIdentity) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = random_dataset(rng);
    TempDir dir;
    const auto manifest = write_dataset(d, dir.path());
    EXPECT_EQ(load_dataset(manifest), d) << "trial " << trial;
  }
}

TEST(Format, LabelsFileBytes) {
  TempDir dir;
  write_dataset(tiny_dataset(), dir.path());
  EXPECT_EQ(io::read_file(dir.path() / "labels.u8"), std::string("\x01\x00\x01", 3));
}

TEST(Format, EmptySplitListSurvives) {
  TempDir dir;
  const auto d = tiny_dataset({{0, 1}, {}, {}});
  const auto loaded = load_dataset(write_dataset(d, dir.path()));
  EXPECT_TRUE(loaded.splits().val.empty());
  EXPECT_TRUE(loaded.splits().test.empty());
  EXPECT_EQ(loaded, d);
}

// Hand-written files: N=2, T=3, C=2 temporal view (48 bytes) plus a static
// view with C=1 (8 bytes). Element [n,t,c] sits at byte ((n*T + t)*C + c)*4.
TEST(Format, HandComputedByteOffsets) {
  TempDir dir;
  std::string temporal(48, '\0');
  temporal.replace(8, 4, std::string("\x00\x00\x00\x40", 4));   // [0,1,0] = 2.0
  temporal.replace(44, 4, std::string("\x00\x00\x80\x3f", 4));  // [1,2,1] = 1.0
  std::string stat(8, '\0');
  stat.replace(4, 4, std::string("\x00\x00\x80\xbf", 4));  // [1,0] = -1.0
  write_bytes(dir.path() / "t.f32", temporal);
  write_bytes(dir.path() / "s.f32", stat);
  write_bytes(dir.path() / "y.u8", std::string("\x00\x01", 2));
  write_bytes(dir.path() / "manifest.json", R"({
    "name": "fixture", "num_samples": 2, "timesteps": 3,
    "views": [{"name": "t", "channels": 2, "static": false, "file": "t.f32"},
              {"name": "s", "channels": 1, "static": true, "file": "s.f32"}],
    "labels_file": "y.u8",
    "splits": {"train": [0], "val": [], "test": [1]}})");
  const auto d = load_dataset(dir.path() / "manifest.json");
  ASSERT_EQ(d.num_samples(), 2u);
  const auto& t = d.view(0).values;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const float expected = i == 2 ? 2.0f : i == 11 ? 1.0f : 0.0f;
    EXPECT_EQ(t[i], expected) << "element " << i;
  }
  EXPECT_EQ(d.view(1).values, (std::vector<float>{0.0f, -1.0f}));
  EXPECT_EQ(d.labels(), (std::vector<std::uint8_t>{0, 1}));
  EXPECT_TRUE(d.view(1).spec.is_static);

  write_bytes(dir.path() / "t.f32", temporal.substr(0, 47));
  EXPECT_THROW(load_dataset(dir.path() / "manifest.json"), CorruptionError);
}

TEST(Format, ManifestErrors) {
  TempDir dir;
  const auto manifest = write_dataset(tiny_dataset(), dir.path());
  EXPECT_THROW(load_dataset(dir.path() / "missing.json"), IoError);

  auto j = nlohmann::json::parse(io::read_file(manifest));
  auto rewrite = [&](const nlohmann::json& m) { write_bytes(manifest, m.dump()); };

  auto dup = j;
  dup["views"][1] = dup["views"][0];
  rewrite(dup);
  EXPECT_THROW(load_dataset(manifest), SchemaError);

  auto bad_index = j;
  bad_index["splits"]["test"] = {7};
  rewrite(bad_index);
  EXPECT_THROW(load_dataset(manifest), RangeError);

  auto negative = j;
  negative["splits"]["test"] = {-1};
  rewrite(negative);
  EXPECT_THROW(load_dataset(manifest), RangeError);

  auto missing_field = j;
  missing_field.erase("num_samples");
  rewrite(missing_field);
  EXPECT_THROW(load_dataset(manifest), SchemaError);

  write_bytes(manifest, "{ not json");
  EXPECT_THROW(load_dataset(manifest), SchemaError);
}

// ---- temporal averaging

TEST(TemporalAverage, Examples) {
  const std::vector<float> raw{1, 2, 3, 4};
  const std::vector<std::size_t> identity{0, 1, 2, 3, 4};
  EXPECT_EQ(temporal_average(raw, 1, 4, 1, identity), raw);
  const std::vector<std::size_t> one{0, 2};
  EXPECT_EQ(temporal_average(std::vector<float>{1, 3}, 1, 2, 1, one),
            (std::vector<float>{2}));
  const std::vector<std::size_t> uneven{0, 1, 4, 5};
  const std::vector<float> constant(2 * 5 * 3, 4.25f);
  for (float v : temporal_average(constant, 2, 5, 3, uneven)) EXPECT_EQ(v, 4.25f);
}

TEST(TemporalAverage, RejectsBadPartitions) {
  const std::vector<float> raw(4);
  const std::vector<std::size_t> empty_bin{0, 2, 2, 4};
  const std::vector<std::size_t> short_cover{0, 2, 3};
  EXPECT_THROW(temporal_average(raw, 1, 4, 1, empty_bin), PartitionError);
  EXPECT_THROW(temporal_average(raw, 1, 4, 1, short_cover), PartitionError);
}

TEST(TemporalAverage, EqualBinsPreserveSeriesMean) {
  Rng rng(5);
  std::normal_distribution<float> normal(0.0f, 3.0f);
  const std::size_t n = 7, t_raw = 12, c = 3;
  std::vector<float> raw(n * t_raw * c);
  for (float& x : raw) x = normal(rng);
  const std::vector<std::size_t> edges{0, 3, 6, 9, 12};
  const auto out = temporal_average(raw, n, t_raw, c, edges);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      double in_mean = 0, out_mean = 0;
      for (std::size_t t = 0; t < t_raw; ++t) in_mean += raw[(i * t_raw + t) * c + ch];
      for (std::size_t t = 0; t < 4; ++t) out_mean += out[(i * 4 + t) * c + ch];
      EXPECT_NEAR(in_mean / 12.0, out_mean / 4.0, 1e-6);
    }
}

// ---- standardization

TEST(Standardize, TwoValueChannel) {
  const ViewSpec s{"s", 1, 0, true, ""};
  const MultiViewDataset d("d", 1, {{s, {1.0f, 3.0f, 100.0f}}}, {0, 1, 0}, {{0, 1}, {}, {2}});
  const auto [z, stats] = standardize(d);
  EXPECT_EQ(z.view(0).values[0], -1.0f);
  EXPECT_EQ(z.view(0).values[1], 1.0f);
  EXPECT_DOUBLE_EQ(stats.views[0][0].mean, 2.0);
  EXPECT_DOUBLE_EQ(stats.views[0][0].std, 1.0);
}

TEST(Standardize, ConstantChannelMapsToZero) {
  const ViewSpec s{"s", 2, 0, true, ""};
  const MultiViewDataset d("d", 1, {{s, {5, 1, 5, 2, 5, 3}}}, {0, 1, 0}, {{0, 1, 2}, {}, {}});
  const auto [z, stats] = standardize(d);
  EXPECT_TRUE(stats.views[0][0].constant);
  EXPECT_FALSE(stats.views[0][1].constant);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(z.view(0).values[i * 2], 0.0f);
}

TEST(Standardize, TrainStatisticsAreStandard) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto d = random_dataset(rng);
    if (d.splits().train.size() < 2) continue;
    const auto [z, stats] = standardize(d);
    const auto again = fit_standardization(z);
    for (std::size_t v = 0; v < again.views.size(); ++v)
      for (const auto& ch : again.views[v]) {
        if (ch.constant) continue;
        EXPECT_LT(std::abs(ch.mean), 1e-6);
        EXPECT_NEAR(ch.std, 1.0, 1e-6);
      }
  }
}

TEST(Standardize, EmptyTrainSplitIsAConfigError) {
  EXPECT_THROW(standardize(tiny_dataset({{}, {}, {0}})), ConfigError);
}

// ---- train/val split

TEST(SplitTrainVal, TenPercentOfHundred) {
  std::vector<std::size_t> idx(100);
  std::iota(idx.begin(), idx.end(), 0);
  const auto [train, val] = split_train_val(idx, 0.1, 42);
  EXPECT_EQ(train.size(), 90u);
  EXPECT_EQ(val.size(), 10u);
  std::set<std::size_t> all(train.begin(), train.end());
  all.insert(val.begin(), val.end());
  EXPECT_EQ(all.size(), 100u);
  const auto again = split_train_val(idx, 0.1, 42);
  EXPECT_EQ(again.first, train);
  EXPECT_EQ(again.second, val);
}

TEST(SplitTrainVal, MinimalAndDegenerate) {
  const std::vector<std::size_t> two{3, 8};
  const auto [train, val] = split_train_val(two, 0.5, 1);
  EXPECT_EQ(train.size(), 1u);
  EXPECT_EQ(val.size(), 1u);
  EXPECT_EQ(split_train_val(two, 0.01, 1).second.size(), 1u);
  EXPECT_THROW(split_train_val(std::vector<std::size_t>{1}, 0.5, 1), ConfigError);
  EXPECT_THROW(split_train_val(two, 0.0, 1), ConfigError);
  EXPECT_THROW(split_train_val(two, 1.0, 1), ConfigError);
}

// ---- synthetic generator

SynthConfig synth_config() {
  SynthConfig c;
  c.num_samples = 2000;
  c.timesteps = 12;
  c.seed = 9;
  c.views = {{"signal", 3, false, 1.0, 1.0}, {"noise", 2, false, 0.0, 1.0},
             {"dem", 2, true, 0.0, 1.0}};
  return c;
}

TEST(Synth, DeterministicGivenSeed) {
  const auto c = synth_config();
  EXPECT_EQ(synth_generate(c), synth_generate(c));
  auto other = c;
  other.seed = 10;
  EXPECT_FALSE(synth_generate(c) == synth_generate(other));
}

TEST(Synth, ShapesSplitsAndClassBalance) {
  auto c = synth_config();
  c.positive_fraction = 0.378;
  const auto d = synth_generate(c);
  EXPECT_EQ(d.num_samples(), 2000u);
  EXPECT_EQ(d.view(0).values.size(), 2000u * 12 * 3);
  EXPECT_EQ(d.view(2).values.size(), 2000u * 2);
  EXPECT_EQ(d.splits().test.size(), 600u);
  EXPECT_EQ(d.splits().train.size(), 1400u);
  const double pos = std::accumulate(d.labels().begin(), d.labels().end(), 0.0) / 2000.0;
  EXPECT_NEAR(pos, 0.378, 0.02);
}

// AUC of the linear score x . (mu1 - mu0), the Bayes-optimal direction for
// a view with isotropic Gaussian noise.
double projection_auc(const MultiViewDataset& d, const SynthViewConfig& vc, std::size_t v) {
  const auto mu0 = synth_class_template(vc, d.timesteps(), 0);
  const auto mu1 = synth_class_template(vc, d.timesteps(), 1);
  const std::size_t per = mu0.size();
  std::vector<double> score(d.num_samples(), 0.0);
  for (std::size_t i = 0; i < d.num_samples(); ++i)
    for (std::size_t k = 0; k < per; ++k)
      score[i] += double(d.view(v).values[i * per + k]) * (mu1[k] - mu0[k]);
  return auc(std::span<const double>(score), std::span<const std::uint8_t>(d.labels()));
}

TEST(Synth, InformativenessControlsSeparability) {
  const auto c = synth_config();
  const auto d = synth_generate(c);
  // Expected AUC is Phi(inf * separation / (noise * sqrt 2)): 98.3 at
  // informativeness 1, 50 at informativeness 0.
  const double expected = 100.0 * 0.5 * std::erfc(-kSynthSeparation / 2.0);
  EXPECT_NEAR(projection_auc(d, c.views[0], 0), expected, 1.0);
  EXPECT_NEAR(projection_auc(d, c.views[1], 1), 50.0, 3.0);
  EXPECT_NEAR(projection_auc(d, c.views[2], 2), 50.0, 3.0);
}

TEST(Synth, ClassTemplatesDiffer) {
  for (const auto& vc : synth_config().views) {
    const auto t0 = synth_class_template(vc, 12, 0);
    const auto t1 = synth_class_template(vc, 12, 1);
    double dist = 0;
    for (std::size_t k = 0; k < t0.size(); ++k) dist += (t1[k] - t0[k]) * (t1[k] - t0[k]);
    EXPECT_NEAR(std::sqrt(dist), kSynthSeparation, 1e-12);
  }
}

TEST(Synth, RejectsInvalidConfig) {
  auto c = synth_config();
  c.positive_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = synth_config();
  c.views[0].informativeness = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = synth_config();
  c.views[1].name = c.views[0].name;
  EXPECT_THROW(c.validate(), ConfigError);
  c = synth_config();
  c.views[0].noise_scale = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace mvfusion

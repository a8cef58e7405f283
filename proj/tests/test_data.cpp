// SPDX-License-Identifier: Apache-2.0

#include "pig/data.hpp"

#include <cstdio>
#include <set>

#include "doctest.h"
#include "pig/objectives.hpp"

using namespace pig;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.n_pairs = 24;
  s.z_dim = 4;
  s.d_in = 6;
  s.m = 3;
  s.n = 5;
  s.p_info = 2;
  s.text_len = 3;
  s.seed = 9;
  return s;
}

}  // namespace

TEST_CASE("same spec and seed regenerate the identical dataset") {
  auto a = generate_dataset(small_spec());
  auto b = generate_dataset(small_spec());
  REQUIRE(a.size() == b.size());
  for (uint64_t i = 0; i < a.size(); ++i) {
    CHECK(a.videos[i].patches == b.videos[i].patches);
    CHECK(a.texts[i].tokens == b.texts[i].tokens);
    CHECK(a.signal_patches[i] == b.signal_patches[i]);
  }

  auto c_spec = small_spec();
  c_spec.seed = 10;
  auto c = generate_dataset(c_spec);
  CHECK(a.videos[0].patches != c.videos[0].patches);
}

TEST_CASE("splits are disjoint and cover the dataset") {
  auto ds = generate_dataset(small_spec());
  auto train = ds.indices_of(Split::train);
  auto val = ds.indices_of(Split::val);
  auto test = ds.indices_of(Split::test);
  CHECK(train.size() + val.size() + test.size() == ds.size());
  std::set<uint64_t> all;
  for (auto v : train) all.insert(v);
  for (auto v : val) all.insert(v);
  for (auto v : test) all.insert(v);
  CHECK(all.size() == ds.size());
  CHECK(!test.empty());
}

TEST_CASE("noiseless tied-projection data is separable by raw feature match") {
  SyntheticSpec spec = small_spec();
  spec.n_pairs = 30;
  spec.sigma_video = 0.0;
  spec.sigma_text = 0.0;
  spec.sigma_patch = 0.0;
  spec.tie_projections = true;
  auto ds = generate_dataset(spec);

  // Raw nearest-latent retrieval: frame-0 carries z undrifted, so the first
  // signal patch equals the text token of the matching pair exactly.
  size_t hits = 0;
  for (uint64_t q = 0; q < ds.size(); ++q) {
    std::vector<double> query(ds.texts[q].token(0), ds.texts[q].token(0) + spec.d_in);
    double best = -2.0;
    uint64_t best_id = 0;
    for (uint64_t v = 0; v < ds.size(); ++v) {
      const uint64_t patch_idx = ds.signal_patches[v][0];  // frame 0, first planted patch
      const double* p = ds.videos[v].patches.data() + patch_idx * spec.d_in;
      const double cos = cosine_sim_value(query, std::vector<double>(p, p + spec.d_in));
      if (cos > best || (cos == best && ds.ids[v] < best_id)) {
        best = cos;
        best_id = ds.ids[v];
      }
    }
    if (best_id == ds.ids[q]) ++hits;
  }
  CHECK(hits == ds.size());  // R@1 = 100
}

TEST_CASE("signal patches are planted per frame with the configured count") {
  auto spec = small_spec();
  auto ds = generate_dataset(spec);
  for (uint64_t i = 0; i < ds.size(); ++i) {
    REQUIRE(ds.signal_patches[i].size() == spec.m * spec.p_info);
    std::set<uint64_t> uniq(ds.signal_patches[i].begin(), ds.signal_patches[i].end());
    CHECK(uniq.size() == spec.m * spec.p_info);
    for (uint64_t f = 0; f < spec.m; ++f) {
      size_t in_frame = 0;
      for (uint64_t idx : ds.signal_patches[i]) {
        if (idx / spec.n == f) ++in_frame;
      }
      CHECK(in_frame == spec.p_info);
    }
  }
}

TEST_CASE("dataset round-trips through its binary format byte-identically") {
  auto ds = generate_dataset(small_spec());
  const std::string path1 = "/tmp/pig_test_ds1.bin";
  const std::string path2 = "/tmp/pig_test_ds2.bin";
  ds.save(path1);
  auto loaded = PairedDataset::load(path1);
  loaded.save(path2);

  auto slurp = [](const std::string& p) {
    FILE* f = fopen(p.c_str(), "rb");
    REQUIRE(f != nullptr);
    std::string bytes;
    char buf[4096];
    size_t got;
    while ((got = fread(buf, 1, sizeof buf, f)) > 0) bytes.append(buf, got);
    fclose(f);
    return bytes;
  };
  CHECK(slurp(path1) == slurp(path2));
  CHECK(loaded.videos[3].patches == ds.videos[3].patches);
  std::remove(path1.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("access counters attribute reads to splits") {
  auto ds = generate_dataset(small_spec());
  auto test_idx = ds.indices_of(Split::test);
  REQUIRE(!test_idx.empty());
  const auto before = ds.access_counts();
  ds.video(0);                 // train split
  ds.text(test_idx.front());   // test split
  const auto after = ds.access_counts();
  CHECK(after[0] == before[0] + 1);
  CHECK(after[2] == before[2] + 1);
}

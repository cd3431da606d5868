#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "semcom/data.hpp"
#include "semcom/error.hpp"
#include "support.hpp"

using namespace semcom;
using semcom::test::to_vector;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("semcom_test_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

std::string error_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

std::vector<AnnotatedFrame> numbered_frames(std::size_t n) {
  std::vector<AnnotatedFrame> frames(n);
  for (std::size_t i = 0; i < n; ++i) frames[i].frame_id = std::to_string(1000 + i);
  return frames;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("annotation parsing") {
    const fs::path dir = scratch("parse");
    write_text(dir / "empty.txt", "");
    CHECK(parse_annotations(dir / "empty.txt").empty());

    write_text(dir / "three.txt", "1 2\n30 4\n5 60\n");
    const auto dots = parse_annotations(dir / "three.txt");
    REQUIRE(dots.size() == 3);
    CHECK(dots[1].x == 30);
    CHECK(dots[1].y == 4);

    write_text(dir / "blank.txt", "\n1 2\n   \n3 4\n\n");
    CHECK(parse_annotations(dir / "blank.txt").size() == 2);

    write_text(dir / "bad.txt", "1 2\n3 4\n5 x\n");
    const std::string msg = error_of([&] { parse_annotations(dir / "bad.txt"); });
    CHECK(msg.find("bad.txt:3") != std::string::npos);

    write_text(dir / "extra.txt", "1 2 3\n");
    CHECK_THROWS_AS(parse_annotations(dir / "extra.txt"), DatasetError);
    CHECK_THROWS_AS(parse_annotations(dir / "absent.txt"), DatasetError);
    fs::remove_all(dir);
  }

  TEST_CASE("ground truth of no dots is all zero") {
    for (real v : make_gt_density({}, 16, 16, 4.0).values) CHECK(v == 0.0);
  }

  TEST_CASE("centred dot on 64x64 carries unit mass shaped as a Gaussian") {
    const DensityMap map = make_gt_density({{32, 32}}, 64, 64, 4.0);
    CHECK(count_from_map(map) == doctest::Approx(1.0).epsilon(1e-3));
    // Independent discrete normalisation over the 3-sigma window.
    real z = 0;
    for (int dy = -12; dy <= 12; ++dy) {
      for (int dx = -12; dx <= 12; ++dx) z += std::exp(-(dx * dx + dy * dy) / 32.0);
    }
    CHECK(map.at(32, 32) == doctest::Approx(1.0 / z).epsilon(1e-12));
    CHECK(map.at(32, 35) == doctest::Approx(std::exp(-9.0 / 32.0) / z).epsilon(1e-12));
    CHECK(map.at(32, 45) == 0.0);
    // The untruncated Gaussian integrates to 2 pi sigma^2, which the window nearly reaches.
    CHECK(z == doctest::Approx(2 * M_PI * 16.0).epsilon(0.01));
  }

  TEST_CASE("corner dots keep unit mass after truncation") {
    for (const Dot d : {Dot{0, 0}, Dot{63, 0}, Dot{0, 63}, Dot{63, 63}}) {
      CHECK(count_from_map(make_gt_density({d}, 64, 64, 4.0)) ==
            doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("density mass equals the dot count over 1000 random sets") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t h = 4 + rng() % 40, w = 4 + rng() % 40;
      const real sigma = std::uniform_real_distribution<real>(0.3, 6.0)(rng);
      std::vector<Dot> dots;
      const std::size_t n = rng() % 12;
      for (std::size_t i = 0; i < n; ++i) {
        switch (rng() % 4) {
          case 0: dots.push_back({0, static_cast<real>(rng() % h)}); break;
          case 1: dots.push_back({static_cast<real>(w - 1), static_cast<real>(h - 1)}); break;
          default:
            dots.push_back({std::uniform_real_distribution<real>(0, w - 1)(rng),
                            std::uniform_real_distribution<real>(0, h - 1)(rng)});
        }
      }
      CHECK(std::abs(count_from_map(make_gt_density(dots, h, w, sigma)) - n) <= 1e-3);
    }
  }

  TEST_CASE("ground truth rejects bad dots and sigma") {
    CHECK_THROWS_AS(make_gt_density({{16, 3}}, 16, 16, 4.0), DomainError);
    CHECK_THROWS_AS(make_gt_density({{-0.5, 3}}, 16, 16, 4.0), DomainError);
    CHECK_THROWS_AS(make_gt_density({{1, 1}}, 16, 16, 0.0), DomainError);
  }

  TEST_CASE("synthetic corpora are deterministic") {
    SyntheticConfig cfg;
    cfg.seed = 7;
    cfg.frames = 5;
    const auto a = synth_generate(cfg);
    const auto b = synth_generate(cfg);
    REQUIRE(a.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(to_vector(a[i].image) == to_vector(b[i].image));
      REQUIRE(a[i].dots.size() == b[i].dots.size());
      for (std::size_t k = 0; k < a[i].dots.size(); ++k) {
        CHECK(a[i].dots[k].x == b[i].dots[k].x);
        CHECK(a[i].dots[k].y == b[i].dots[k].y);
      }
      CHECK(a[i].frame_id == b[i].frame_id);
    }
    cfg.seed = 8;
    CHECK(to_vector(synth_generate(cfg)[0].image) != to_vector(a[0].image));
  }

  TEST_CASE("empty count range draws no vehicles") {
    SyntheticConfig cfg;
    cfg.count_min = cfg.count_max = 0;
    cfg.frames = 4;
    for (const auto& f : synth_generate(cfg)) {
      CHECK(f.dots.empty());
      for (real v : f.image.data()) CHECK(v <= 0.1 + cfg.background_noise + 1e-12);
    }
  }

  TEST_CASE("each vehicle is a bright rectangle on its dot") {
    SyntheticConfig cfg;
    cfg.count_min = cfg.count_max = 5;
    cfg.frames = 10;
    for (const auto& f : synth_generate(cfg)) {
      CHECK(f.count() == 5);
      for (const auto& d : f.dots) {
        CHECK(d.x >= 0);
        CHECK(d.x < 64);
        CHECK(f.image.at(static_cast<std::size_t>(d.y) * 64 + static_cast<std::size_t>(d.x)) >=
              0.75);
      }
    }
    cfg.count_min = 3;
    cfg.count_max = 2;
    CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
  }

  TEST_CASE("split sizes") {
    const SplitSizes full = resolve_split(1244);
    CHECK(full.train == 658);
    CHECK(full.validation == 165);
    CHECK(full.test == 421);
    CHECK(static_cast<real>(full.train) / full.validation == doctest::Approx(4.0).epsilon(0.01));

    const SplitSizes small = resolve_split(10, {std::nullopt, std::nullopt, 2});
    CHECK(small.train == 6);
    CHECK(small.validation == 2);
    CHECK(small.test == 2);

    CHECK_THROWS_AS(resolve_split(10, {5, 4, 3}), ConfigError);
    CHECK_THROWS_AS(resolve_split(10, {std::nullopt, std::nullopt, 11}), ConfigError);
    CHECK_THROWS_AS(resolve_split(10, {5, std::nullopt, std::nullopt}), ConfigError);
  }

  TEST_CASE("splits are a contiguous ordered partition of a prefix") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng() % 60;
      const auto frames = numbered_frames(n);
      SplitSpec spec;
      if (trial % 2) {
        const std::size_t test = rng() % (n + 1);
        const std::size_t train = rng() % (n - test + 1);
        const std::size_t val = rng() % (n - test - train + 1);
        spec = {train, val, test};
      }
      const DatasetSplits s = split(frames, spec);
      std::vector<std::string> joined;
      for (const auto* part : {&s.train, &s.validation, &s.test}) {
        for (const auto& f : *part) joined.push_back(f.frame_id);
      }
      REQUIRE(joined.size() <= n);
      for (std::size_t i = 0; i < joined.size(); ++i) CHECK(joined[i] == frames[i].frame_id);
    }
  }

  TEST_CASE("write then load round-trips the corpus") {
    const fs::path dir = scratch("roundtrip");
    SyntheticConfig cfg;
    cfg.frames = 3;
    cfg.image_height = 16;
    cfg.image_width = 24;
    const auto frames = synth_generate(cfg);
    write_dataset(frames, dir);
    const auto loaded = load_dataset(dir);
    REQUIRE(loaded.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(loaded[i].frame_id == frames[i].frame_id);
      CHECK(loaded[i].height() == 16);
      CHECK(loaded[i].width() == 24);
      REQUIRE(loaded[i].count() == frames[i].count());
      for (std::size_t k = 0; k < frames[i].count(); ++k) {
        CHECK(loaded[i].dots[k].x == frames[i].dots[k].x);
      }
      // 8-bit quantisation
      for (std::size_t p = 0; p < frames[i].image.numel(); ++p) {
        CHECK(std::abs(loaded[i].image.at(p) - frames[i].image.at(p)) <= 0.5 / 255 + 1e-12);
      }
      CHECK(fs::exists(loaded[i].image_path));
    }

    const auto resized = load_dataset(dir, {8, 12, 1});
    CHECK(resized[0].height() == 8);
    CHECK(resized[0].width() == 12);
    for (std::size_t k = 0; k < frames[0].count(); ++k) {
      CHECK(resized[0].dots[k].x == doctest::Approx(frames[0].dots[k].x / 2));
    }
    const auto rgb = load_dataset(dir, {0, 0, 3});
    CHECK(rgb[0].image.dim(0) == 3);
    fs::remove_all(dir);
  }

  TEST_CASE("ingestion errors are located") {
    const fs::path dir = scratch("errors");
    SyntheticConfig cfg;
    cfg.frames = 2;
    cfg.image_height = cfg.image_width = 8;
    write_dataset(synth_generate(cfg), dir);

    write_text(dir / "annotations" / "synth_00001.txt", "1 1\n8 2\n");
    CHECK(error_of([&] { load_dataset(dir); }).find("synth_00001.txt:2") != std::string::npos);

    fs::remove(dir / "annotations" / "synth_00001.txt");
    CHECK(error_of([&] { load_dataset(dir); }).find("missing annotation") != std::string::npos);

    CHECK_THROWS_AS(load_dataset(dir / "nowhere"), DatasetError);
    fs::remove_all(dir);
  }

  TEST_CASE("frame sets stack images, maps and counts") {
    SyntheticConfig cfg;
    cfg.frames = 4;
    cfg.image_height = cfg.image_width = 16;
    cfg.blob_sigma = 2.0;
    const auto frames = synth_generate(cfg);
    const FrameSet set = to_frame_set(frames, cfg.blob_sigma);
    CHECK(set.size() == 4);
    CHECK(set.images.shape() == Shape{4, 1, 16, 16});
    CHECK(set.densities.shape() == Shape{4, 1, 16, 16});
    const auto mass = counts_from_batch(set.densities);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(set.counts.at(i) == static_cast<real>(frames[i].count()));
      CHECK(mass[i] == doctest::Approx(frames[i].count()).epsilon(1e-9));
    }
    const FrameSet tail = set.slice(2, 4);
    CHECK(tail.size() == 2);
    CHECK(tail.counts.at(0) == set.counts.at(2));
    CHECK_THROWS_AS(to_frame_set({}, 1.0), DatasetError);
  }
}

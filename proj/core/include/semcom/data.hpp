#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semcom/encoder.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

/// Vehicle annotation point in pixel coordinates (x = column, y = row).
struct Dot {
  real x = 0;
  real y = 0;
};

struct AnnotatedFrame {
  Tensor image;  // [C, H, W], intensities in [0, 1]
  std::vector<Dot> dots;
  std::string frame_id;  // frames are ordered by id
  std::filesystem::path image_path;

  std::size_t height() const { return image.dim(1); }
  std::size_t width() const { return image.dim(2); }
  std::size_t count() const { return dots.size(); }
};

// ---- ingestion --------------------------------------------------------------

struct LoadOptions {
  /// Target size; 0 keeps the native image size. Dots are rescaled with the image.
  std::size_t height = 0;
  std::size_t width = 0;
  /// 1 = intensity, 3 = RGB.
  std::size_t channels = 1;
};

/// Parses one annotation file: one "x y" integer pair per line, blank lines
/// ignored. Throws DatasetError naming the file and line on malformed input.
std::vector<Dot> parse_annotations(const std::filesystem::path& path);

/// Reads `<root>/images/*.{png,jpg,jpeg}` with `<root>/annotations/<stem>.txt`
/// sidecars, sorted by file name.
std::vector<AnnotatedFrame> load_dataset(const std::filesystem::path& root,
                                         const LoadOptions& options = {});

/// Writes frames in the layout `load_dataset` reads (8-bit PNG + txt).
void write_dataset(const std::vector<AnnotatedFrame>& frames, const std::filesystem::path& root);

// ---- ground truth -----------------------------------------------------------

/// Sum of isotropic Gaussians (truncated at 3 sigma and at the image border),
/// each renormalised to unit mass, so the map sums to |dots|.
DensityMap make_gt_density(const std::vector<Dot>& dots, std::size_t height, std::size_t width,
                           real blob_sigma);

// ---- synthetic scenes -------------------------------------------------------

struct SyntheticConfig {
  std::size_t count_min = 1;
  std::size_t count_max = 8;
  real blob_sigma = 4.0;
  std::size_t image_height = 64;
  std::size_t image_width = 64;
  real background_noise = 0.05;
  std::uint64_t seed = 7;
  std::size_t frames = 64;
  std::size_t channels = 1;
};

/// Dark noisy background with light rectangular vehicles centred on uniformly
/// drawn integer dots. Same config -> identical corpus.
std::vector<AnnotatedFrame> synth_generate(const SyntheticConfig& cfg);

// ---- splits -----------------------------------------------------------------

struct SplitSpec {
  std::optional<std::size_t> train;
  std::optional<std::size_t> validation;
  std::optional<std::size_t> test;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// Resolves split sizes: explicit counts when all three are given; otherwise
/// 658/165/421 for a 1244-frame corpus, else a 4:1 train:validation division
/// of whatever the test split leaves (test defaults to 421/1244 of the corpus).
SplitSizes resolve_split(std::size_t corpus_size, const SplitSpec& spec = {});

struct DatasetSplits {
  std::vector<AnnotatedFrame> train;
  std::vector<AnnotatedFrame> validation;
  std::vector<AnnotatedFrame> test;
};

/// Contiguous, order-preserving train / validation / test partition.
DatasetSplits split(const std::vector<AnnotatedFrame>& frames, const SplitSpec& spec = {});

// ---- tensors for training ---------------------------------------------------

/// Stacked frames ready for the model.
struct FrameSet {
  Tensor images;     // [F, C, H, W]
  Tensor densities;  // [F, 1, H, W]
  Tensor counts;     // [F]  integer dot counts

  std::size_t size() const { return images.defined() ? images.dim(0) : 0; }
  FrameSet slice(std::size_t begin, std::size_t end) const;
};

FrameSet to_frame_set(const std::vector<AnnotatedFrame>& frames, real blob_sigma);

}  // namespace semcom

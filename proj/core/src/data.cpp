#include "semcom/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <random>
#include <sstream>

#include "semcom/error.hpp"
#include "semcom/ops.hpp"

namespace semcom {

namespace fs = std::filesystem;

namespace {

const char* kModule = "data";

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

Tensor image_to_tensor(const cv::Mat& mat) {
  const std::size_t h = static_cast<std::size_t>(mat.rows);
  const std::size_t w = static_cast<std::size_t>(mat.cols);
  const std::size_t c = static_cast<std::size_t>(mat.channels());
  std::vector<real> data(c * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    const auto* px = mat.ptr<unsigned char>(static_cast<int>(y));
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        // OpenCV stores BGR; emit RGB planes.
        const std::size_t src = c == 3 ? 2 - ch : ch;
        data[(ch * h + y) * w + x] = px[x * c + src] / 255.0;
      }
    }
  }
  return Tensor::from_data({c, h, w}, std::move(data));
}

cv::Mat tensor_to_image(const Tensor& image) {
  const int c = static_cast<int>(image.dim(0));
  const int h = static_cast<int>(image.dim(1));
  const int w = static_cast<int>(image.dim(2));
  cv::Mat mat(h, w, c == 3 ? CV_8UC3 : CV_8UC1);
  const auto d = image.data();
  for (int y = 0; y < h; ++y) {
    auto* px = mat.ptr<unsigned char>(y);
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        const int dst = c == 3 ? 2 - ch : ch;
        const real v = std::clamp(d[(static_cast<std::size_t>(ch) * h + y) * w + x], 0.0, 1.0);
        px[x * c + dst] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  return mat;
}

}  // namespace

std::vector<Dot> parse_annotations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(kModule, "missing annotation file " + path.string());
  std::vector<Dot> dots;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    long long x = 0, y = 0;
    std::string rest;
    if (!(fields >> x >> y) || (fields >> rest)) {
      throw DatasetError(kModule, path.string() + ":" + std::to_string(line_no) +
                                      ": expected \"x y\" integer pair, got \"" + line + "\"");
    }
    dots.push_back({static_cast<real>(x), static_cast<real>(y)});
  }
  return dots;
}

std::vector<AnnotatedFrame> load_dataset(const fs::path& root, const LoadOptions& options) {
  const fs::path image_dir = root / "images";
  const fs::path note_dir = root / "annotations";
  if (!fs::is_directory(image_dir)) {
    throw DatasetError(kModule, "no images/ directory under " + root.string());
  }
  if (options.channels != 1 && options.channels != 3) {
    throw ConfigError(kModule, "channels must be 1 or 3");
  }
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(image_dir)) {
    if (entry.is_regular_file() && is_image(entry.path())) images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  std::vector<AnnotatedFrame> frames;
  frames.reserve(images.size());
  for (const auto& image_path : images) {
    const fs::path note = note_dir / (image_path.stem().string() + ".txt");
    if (!fs::exists(note)) {
      throw DatasetError(kModule, "missing annotation " + note.string() + " for " +
                                      image_path.filename().string());
    }
    cv::Mat mat = cv::imread(image_path.string(),
                             options.channels == 3 ? cv::IMREAD_COLOR : cv::IMREAD_GRAYSCALE);
    if (mat.empty()) throw DatasetError(kModule, "cannot decode image " + image_path.string());

    AnnotatedFrame frame;
    frame.frame_id = image_path.stem().string();
    frame.image_path = image_path;
    frame.dots = parse_annotations(note);
    const real native_w = static_cast<real>(mat.cols);
    const real native_h = static_cast<real>(mat.rows);
    for (std::size_t i = 0; i < frame.dots.size(); ++i) {
      const Dot& d = frame.dots[i];
      if (d.x < 0 || d.y < 0 || d.x >= native_w || d.y >= native_h) {
        throw DatasetError(kModule, note.string() + ":" + std::to_string(i + 1) + ": dot (" +
                                        std::to_string(d.x) + ", " + std::to_string(d.y) +
                                        ") outside " + std::to_string(mat.cols) + "x" +
                                        std::to_string(mat.rows) + " image");
      }
    }
    const int target_h = options.height ? static_cast<int>(options.height) : mat.rows;
    const int target_w = options.width ? static_cast<int>(options.width) : mat.cols;
    if (target_h != mat.rows || target_w != mat.cols) {
      cv::Mat resized;
      cv::resize(mat, resized, cv::Size(target_w, target_h), 0, 0, cv::INTER_AREA);
      mat = resized;
      const real sx = target_w / native_w;
      const real sy = target_h / native_h;
      for (auto& d : frame.dots) {
        d.x *= sx;
        d.y *= sy;
      }
    }
    frame.image = image_to_tensor(mat);
    frames.push_back(std::move(frame));
  }
  return frames;
}

void write_dataset(const std::vector<AnnotatedFrame>& frames, const fs::path& root) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "annotations");
  for (const auto& frame : frames) {
    const fs::path image_path = root / "images" / (frame.frame_id + ".png");
    if (!cv::imwrite(image_path.string(), tensor_to_image(frame.image))) {
      throw DatasetError(kModule, "cannot write " + image_path.string());
    }
    std::ofstream out(root / "annotations" / (frame.frame_id + ".txt"));
    for (const auto& d : frame.dots) {
      out << std::llround(d.x) << ' ' << std::llround(d.y) << '\n';
    }
    if (!out) throw DatasetError(kModule, "cannot write annotations for " + frame.frame_id);
  }
}

DensityMap make_gt_density(const std::vector<Dot>& dots, std::size_t height, std::size_t width,
                           real blob_sigma) {
  if (!(blob_sigma > 0)) throw DomainError(kModule, "blob_sigma must be positive");
  DensityMap map = DensityMap::zeros(height, width);
  const long radius = static_cast<long>(std::ceil(3.0 * blob_sigma));
  const real inv_two_var = 1.0 / (2.0 * blob_sigma * blob_sigma);
  std::vector<real> kernel;
  for (const auto& d : dots) {
    if (!(d.x >= 0 && d.y >= 0 && d.x < static_cast<real>(width) &&
          d.y < static_cast<real>(height))) {
      throw DomainError(kModule, "dot (" + std::to_string(d.x) + ", " + std::to_string(d.y) +
                                     ") outside " + std::to_string(width) + "x" +
                                     std::to_string(height) + " map");
    }
    const long cx = std::lround(d.x);
    const long cy = std::lround(d.y);
    const long y0 = std::max(0L, cy - radius);
    const long y1 = std::min(static_cast<long>(height) - 1, cy + radius);
    const long x0 = std::max(0L, cx - radius);
    const long x1 = std::min(static_cast<long>(width) - 1, cx + radius);
    kernel.assign(static_cast<std::size_t>((y1 - y0 + 1) * (x1 - x0 + 1)), 0.0);
    real mass = 0;
    std::size_t k = 0;
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x, ++k) {
        const real dx = static_cast<real>(x) - d.x;
        const real dy = static_cast<real>(y) - d.y;
        kernel[k] = std::exp(-(dx * dx + dy * dy) * inv_two_var);
        mass += kernel[k];
      }
    }
    if (mass == 0.0) {
      // sigma far below the pixel pitch: all mass on the nearest pixel
      const auto ny = static_cast<std::size_t>(std::clamp(cy, 0L, static_cast<long>(height) - 1));
      const auto nx = static_cast<std::size_t>(std::clamp(cx, 0L, static_cast<long>(width) - 1));
      map.at(ny, nx) += 1.0;
      continue;
    }
    k = 0;
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x, ++k) {
        map.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) += kernel[k] / mass;
      }
    }
  }
  return map;
}

std::vector<AnnotatedFrame> synth_generate(const SyntheticConfig& cfg) {
  if (cfg.count_max < cfg.count_min) {
    throw ConfigError(kModule, "synthetic count_max < count_min");
  }
  if (cfg.image_height == 0 || cfg.image_width == 0) {
    throw ConfigError(kModule, "synthetic image size must be positive");
  }
  constexpr long kHalfWidth = 2;   // vehicles are 5 px wide
  constexpr long kHalfHeight = 1;  // and 3 px tall
  Rng rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> count_dist(cfg.count_min, cfg.count_max);
  std::uniform_int_distribution<long> x_dist(0, static_cast<long>(cfg.image_width) - 1);
  std::uniform_int_distribution<long> y_dist(0, static_cast<long>(cfg.image_height) - 1);
  std::uniform_real_distribution<real> noise(-cfg.background_noise, cfg.background_noise);
  std::uniform_real_distribution<real> shade(0.75, 1.0);

  const std::size_t h = cfg.image_height, w = cfg.image_width, c = cfg.channels;
  std::vector<AnnotatedFrame> frames;
  frames.reserve(cfg.frames);
  for (std::size_t f = 0; f < cfg.frames; ++f) {
    std::vector<real> pixels(c * h * w);
    for (auto& v : pixels) v = std::clamp(0.1 + noise(rng), 0.0, 1.0);

    AnnotatedFrame frame;
    const std::size_t n = count_dist(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const long cx = x_dist(rng);
      const long cy = y_dist(rng);
      const real intensity = shade(rng);
      frame.dots.push_back({static_cast<real>(cx), static_cast<real>(cy)});
      for (long y = std::max(0L, cy - kHalfHeight);
           y <= std::min(static_cast<long>(h) - 1, cy + kHalfHeight); ++y) {
        for (long x = std::max(0L, cx - kHalfWidth);
             x <= std::min(static_cast<long>(w) - 1, cx + kHalfWidth); ++x) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            pixels[(ch * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x)] =
                intensity;
          }
        }
      }
    }
    std::ostringstream id;
    id << "synth_" << std::setw(5) << std::setfill('0') << f;
    frame.frame_id = id.str();
    frame.image = Tensor::from_data({c, h, w}, std::move(pixels));
    frames.push_back(std::move(frame));
  }
  return frames;
}

SplitSizes resolve_split(std::size_t corpus_size, const SplitSpec& spec) {
  SplitSizes sizes;
  if (spec.train && spec.validation && spec.test) {
    sizes = {*spec.train, *spec.validation, *spec.test};
  } else if (!spec.train && !spec.validation && !spec.test && corpus_size == 1244) {
    sizes = {658, 165, 421};
  } else {
    if (spec.train || spec.validation) {
      throw ConfigError(kModule, "train/validation counts must be given together with test");
    }
    const std::size_t test =
        spec.test ? *spec.test
                  : static_cast<std::size_t>(std::llround(corpus_size * 421.0 / 1244.0));
    if (test > corpus_size) {
      throw ConfigError(kModule, "test count " + std::to_string(test) + " exceeds corpus of " +
                                     std::to_string(corpus_size));
    }
    const std::size_t remaining = corpus_size - test;
    sizes.train = remaining * 4 / 5;
    sizes.validation = remaining - sizes.train;
    sizes.test = test;
  }
  if (sizes.train + sizes.validation + sizes.test > corpus_size) {
    throw ConfigError(kModule, "split counts " + std::to_string(sizes.train) + "+" +
                                   std::to_string(sizes.validation) + "+" +
                                   std::to_string(sizes.test) + " exceed corpus of " +
                                   std::to_string(corpus_size));
  }
  return sizes;
}

DatasetSplits split(const std::vector<AnnotatedFrame>& frames, const SplitSpec& spec) {
  const SplitSizes sizes = resolve_split(frames.size(), spec);
  DatasetSplits out;
  auto it = frames.begin();
  out.train.assign(it, it + static_cast<long>(sizes.train));
  it += static_cast<long>(sizes.train);
  out.validation.assign(it, it + static_cast<long>(sizes.validation));
  it += static_cast<long>(sizes.validation);
  out.test.assign(it, it + static_cast<long>(sizes.test));
  return out;
}

FrameSet FrameSet::slice(std::size_t begin, std::size_t end) const {
  NoGradGuard guard;
  return {slice_first(images, begin, end), slice_first(densities, begin, end),
          slice_first(counts, begin, end)};
}

FrameSet to_frame_set(const std::vector<AnnotatedFrame>& frames, real blob_sigma) {
  if (frames.empty()) throw DatasetError(kModule, "empty frame list");
  const Shape& first = frames.front().image.shape();
  const std::size_t c = first[0], h = first[1], w = first[2];
  std::vector<real> images, densities, counts;
  images.reserve(frames.size() * c * h * w);
  densities.reserve(frames.size() * h * w);
  for (const auto& frame : frames) {
    if (frame.image.shape() != first) {
      throw ShapeError(kModule, "frame " + frame.frame_id + " has shape " +
                                    shape_str(frame.image.shape()) + ", expected " +
                                    shape_str(first));
    }
    images.insert(images.end(), frame.image.data().begin(), frame.image.data().end());
    const DensityMap map = make_gt_density(frame.dots, h, w, blob_sigma);
    densities.insert(densities.end(), map.values.begin(), map.values.end());
    counts.push_back(static_cast<real>(frame.count()));
  }
  const std::size_t n = frames.size();
  return {Tensor::from_data({n, c, h, w}, std::move(images)),
          Tensor::from_data({n, 1, h, w}, std::move(densities)),
          Tensor::from_data({n}, std::move(counts))};
}

}  // namespace semcom

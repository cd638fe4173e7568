#include "deconas/sr_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>

#include "json.hpp"

#include "deconas/errors.hpp"
#include "deconas/rng.hpp"

namespace deconas {

namespace {

using Taps = std::vector<std::vector<std::pair<int, double>>>;

// Symmetric extension: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

void normalize(std::vector<std::pair<int, double>>& taps) {
  double total = 0.0;
  for (const auto& [j, w] : taps) total += w;
  for (auto& [j, w] : taps) w /= total;
}

Taps downsample_taps(int in_len, int scale) {
  const int out_len = in_len / scale;
  const double s = scale;
  Taps taps(static_cast<std::size_t>(out_len));
  for (int i = 0; i < out_len; ++i) {
    const double centre = (i + 0.5) * s - 0.5;
    const int lo = static_cast<int>(std::floor(centre - 2.0 * s));
    const int hi = static_cast<int>(std::ceil(centre + 2.0 * s));
    for (int j = lo; j <= hi; ++j) {
      const double w = cubic_kernel((j - centre) / s) / s;
      if (w != 0.0) taps[static_cast<std::size_t>(i)].emplace_back(reflect(j, in_len), w);
    }
    normalize(taps[static_cast<std::size_t>(i)]);
  }
  return taps;
}

Taps upsample_taps(int in_len, int scale) {
  const int out_len = in_len * scale;
  Taps taps(static_cast<std::size_t>(out_len));
  for (int i = 0; i < out_len; ++i) {
    const double centre = (i + 0.5) / scale - 0.5;
    const int base = static_cast<int>(std::floor(centre));
    for (int j = base - 1; j <= base + 2; ++j) {
      const double w = cubic_kernel(j - centre);
      if (w != 0.0) taps[static_cast<std::size_t>(i)].emplace_back(reflect(j, in_len), w);
    }
    normalize(taps[static_cast<std::size_t>(i)]);
  }
  return taps;
}

// Separable resampling: rows through `x_taps`, then columns through `y_taps`.
Image resample(const Image& in, const Taps& y_taps, const Taps& x_taps) {
  const int out_h = static_cast<int>(y_taps.size());
  const int out_w = static_cast<int>(x_taps.size());
  Image horizontal = Image::filled(in.channels, in.height, out_w);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (const auto& [j, w] : x_taps[static_cast<std::size_t>(x)]) acc += w * in.at(c, y, j);
        horizontal.at(c, y, x) = acc;
      }
  Image out = Image::filled(in.channels, out_h, out_w);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (const auto& [j, w] : y_taps[static_cast<std::size_t>(y)]) acc += w * horizontal.at(c, j, x);
        out.at(c, y, x) = std::clamp(acc, 0.0, 1.0);
      }
  return out;
}

Image crop(const Image& in, int y0, int x0, int h, int w) {
  Image out = Image::filled(in.channels, h, w);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = in.at(c, y0 + y, x0 + x);
  return out;
}

int uniform_index(Rng& rng, int n) {
  return std::min(n - 1, static_cast<int>(uniform01(rng) * n));
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

Image generate_one(int size, Rng& rng) {
  constexpr int kChannels = 3;
  Image img = Image::filled(kChannels, size, size);
  double base[kChannels], gx[kChannels], gy[kChannels];
  for (int c = 0; c < kChannels; ++c) {
    base[c] = uniform_in(rng, 0.25, 0.75);
    gx[c] = uniform_in(rng, -0.3, 0.3);
    gy[c] = uniform_in(rng, -0.3, 0.3);
  }
  struct Wave {
    double kx, ky, phase, amp[kChannels];
  };
  std::vector<Wave> waves(static_cast<std::size_t>(1 + uniform_index(rng, 2)));
  for (auto& wave : waves) {
    const double angle = uniform_in(rng, 0.0, std::numbers::pi);
    const double period = uniform_in(rng, 3.0, 10.0);
    wave.kx = 2.0 * std::numbers::pi * std::cos(angle) / period;
    wave.ky = 2.0 * std::numbers::pi * std::sin(angle) / period;
    wave.phase = uniform_in(rng, 0.0, 2.0 * std::numbers::pi);
    for (double& a : wave.amp) a = uniform_in(rng, 0.03, 0.15);
  }
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < kChannels; ++c) {
        double v = base[c] + gx[c] * x / size + gy[c] * y / size;
        for (const auto& wave : waves) v += wave.amp[c] * std::sin(wave.kx * x + wave.ky * y + wave.phase);
        img.at(c, y, x) = v;
      }
  const int rects = 3 + uniform_index(rng, 4);
  for (int r = 0; r < rects; ++r) {
    const int h = 2 + uniform_index(rng, std::max(1, size / 2));
    const int w = 2 + uniform_index(rng, std::max(1, size / 2));
    const int y0 = uniform_index(rng, size);
    const int x0 = uniform_index(rng, size);
    const double alpha = uniform_in(rng, 0.6, 1.0);
    double colour[kChannels];
    for (double& v : colour) v = uniform01(rng);
    for (int y = y0; y < std::min(size, y0 + h); ++y)
      for (int x = x0; x < std::min(size, x0 + w); ++x)
        for (int c = 0; c < kChannels; ++c)
          img.at(c, y, x) = (1.0 - alpha) * img.at(c, y, x) + alpha * colour[c];
  }
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Header tokens of a PNM file: whitespace separated, '#' starts a comment.
class PnmHeader {
 public:
  explicit PnmHeader(const std::string& bytes) : bytes_(bytes) {}

  int next_int(const char* what) {
    skip();
    const char* first = bytes_.data() + pos_;
    const char* last = bytes_.data() + bytes_.size();
    int value = 0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first) throw FormatError(std::string("PNM header: bad ") + what);
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  std::size_t data_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      throw FormatError("PNM header: missing separator before raster");
    return pos_ + 1;
  }

 private:
  void skip() {
    while (pos_ < bytes_.size()) {
      const char ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 2;
};

std::uint64_t parse_seed(const std::string& text) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw DataError("synthetic data source needs an integer seed, got '" + text + "'");
  return value;
}

Dataset load_directory(const std::filesystem::path& root, const DatasetOptions& options) {
  namespace fs = std::filesystem;
  const fs::path hr_dir = root / "hr";
  if (!fs::is_directory(hr_dir)) throw DataError("data directory has no hr/ folder: " + root.string());

  std::vector<std::string> files;
  std::set<std::string> validation_names;
  bool have_split = false;
  const fs::path manifest_path = root / "manifest.json";
  if (fs::exists(manifest_path)) {
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad manifest.json: " + std::string(e.what()));
    }
    if (manifest.contains("scale") && manifest["scale"].get<int>() != options.scale)
      throw DataError("manifest scale differs from the requested scale");
    if (manifest.contains("files")) files = manifest["files"].get<std::vector<std::string>>();
    if (manifest.contains("validation")) {
      for (const auto& name : manifest["validation"]) validation_names.insert(name.get<std::string>());
      have_split = true;
    }
  }
  if (files.empty()) {
    for (const auto& entry : fs::directory_iterator(hr_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".ppm")
        files.push_back(entry.path().filename().string());
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw DataError("no .ppm images under " + hr_dir.string());
  if (!have_split && files.size() > 1) {
    const std::size_t held_out = std::max<std::size_t>(1, files.size() / 10);
    for (std::size_t i = files.size() - held_out; i < files.size(); ++i) validation_names.insert(files[i]);
  }

  Dataset data;
  data.scale = options.scale;
  data.source = "dir:" + root.string();
  for (const auto& name : files) {
    Image hr;
    try {
      hr = load_pnm(hr_dir / name);
    } catch (const FormatError& e) {
      throw DataError(e.what());
    }
    const int h = hr.height - hr.height % options.scale;
    const int w = hr.width - hr.width % options.scale;
    if (h == 0 || w == 0) throw DataError("image smaller than the scale: " + name);
    if (hr.channels == 1) {
      Image rgb = Image::filled(3, hr.height, hr.width);
      for (int c = 0; c < 3; ++c) std::copy(hr.data.begin(), hr.data.end(), rgb.data.begin() + static_cast<std::ptrdiff_t>(c) * hr.height * hr.width);
      hr = std::move(rgb);
    }
    auto pair = make_pair(crop(hr, 0, 0, h, w), options.scale, (hr_dir / name).string());
    (validation_names.count(name) ? data.validation : data.train).push_back(std::move(pair));
  }
  return data;
}

}  // namespace

Image Image::filled(int channels, int height, int width, double value) {
  Image img;
  img.channels = channels;
  img.height = height;
  img.width = width;
  img.data.assign(static_cast<std::size_t>(channels) * height * width, value);
  return img;
}

std::vector<Image> synth_generate(int count, int size, std::uint64_t seed) {
  if (count < 0 || size < 1) throw RangeError("synth_generate needs count >= 0 and size >= 1");
  std::vector<Image> images;
  images.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    images.push_back(generate_one(size, rng));
  }
  return images;
}

double cubic_kernel(double x, double a) {
  const double t = std::abs(x);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

Image downsample_bicubic(const Image& hr, int scale) {
  if (scale < 1) throw RangeError("scale must be >= 1");
  if (hr.height % scale != 0 || hr.width % scale != 0)
    throw ShapeError("image " + std::to_string(hr.height) + "x" + std::to_string(hr.width) +
                     " is not divisible by scale " + std::to_string(scale));
  if (scale == 1) return hr;
  return resample(hr, downsample_taps(hr.height, scale), downsample_taps(hr.width, scale));
}

Image upsample_bicubic(const Image& lr, int scale) {
  if (scale < 1) throw RangeError("scale must be >= 1");
  if (scale == 1) return lr;
  return resample(lr, upsample_taps(lr.height, scale), upsample_taps(lr.width, scale));
}

ImagePair make_pair(Image hr, int scale, std::string provenance) {
  Image lr = downsample_bicubic(hr, scale);
  return {std::move(hr), std::move(lr), std::move(provenance)};
}

std::vector<ImagePair> extract_patches(std::span<const ImagePair> pairs, int patch, int count,
                                       std::uint64_t seed) {
  if (count < 0) throw RangeError("patch count must be >= 0");
  if (count > 0 && pairs.empty()) throw DataError("no images to extract patches from");
  Rng rng(seed);
  std::vector<ImagePair> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const ImagePair& src = pairs[static_cast<std::size_t>(uniform_index(rng, static_cast<int>(pairs.size())))];
    if (patch < 1 || patch > src.lr.height || patch > src.lr.width)
      throw RangeError("patch " + std::to_string(patch) + " does not fit LR image " +
                       std::to_string(src.lr.height) + "x" + std::to_string(src.lr.width));
    const int s = src.hr.height / src.lr.height;
    const int oy = uniform_index(rng, src.lr.height - patch + 1);
    const int ox = uniform_index(rng, src.lr.width - patch + 1);
    out.push_back({crop(src.hr, oy * s, ox * s, patch * s, patch * s), crop(src.lr, oy, ox, patch, patch),
                   src.provenance});
  }
  return out;
}

Image apply_dihedral(const Image& image, int transform) {
  if (transform < 0 || transform >= 8) throw RangeError("dihedral transform must be in [0, 8)");
  const int turns = transform % 4;
  if (turns % 2 == 1 && image.height != image.width)
    throw ShapeError("rotation by 90 degrees needs a square image");
  Image out = image;
  if (transform >= 4)
    for (int c = 0; c < image.channels; ++c)
      for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
  for (int t = 0; t < turns; ++t) {
    const Image in = out;
    out = Image::filled(in.channels, in.width, in.height);
    for (int c = 0; c < in.channels; ++c)
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.at(c, y, x) = in.at(c, x, in.width - 1 - y);
  }
  return out;
}

int augment_choice(std::uint64_t seed) { return static_cast<int>(splitmix64(seed) >> 61); }

ImagePair augment(const ImagePair& pair, std::uint64_t seed) {
  if (pair.hr.height != pair.hr.width || pair.lr.height != pair.lr.width)
    throw ShapeError("augment needs square patches");
  const int t = augment_choice(seed);
  return {apply_dihedral(pair.hr, t), apply_dihedral(pair.lr, t), pair.provenance};
}

double psnr(const Image& a, const Image& b) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width)
    throw ShapeError("psnr needs equal shapes");
  if (a.channels != 1 && a.channels != 3) throw ShapeError("psnr needs 1 or 3 channels");
  const std::size_t plane = static_cast<std::size_t>(a.height) * a.width;
  if (plane == 0) throw ShapeError("psnr of an empty image");
  auto luma = [&](const Image& img, std::size_t i) {
    if (img.channels == 1) return img.data[i];
    return 0.299 * img.data[i] + 0.587 * img.data[plane + i] + 0.114 * img.data[2 * plane + i];
  };
  double mse = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    const double d = luma(a, i) - luma(b, i);
    mse += d * d;
  }
  mse /= static_cast<double>(plane);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

Image load_pnm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw FormatError(path.string() + ": only binary P5/P6 images are supported");
  const int channels = bytes[1] == '5' ? 1 : 3;
  PnmHeader header(bytes);
  const int width = header.next_int("width");
  const int height = header.next_int("height");
  const int maxval = header.next_int("maxval");
  if (width < 1 || height < 1) throw FormatError(path.string() + ": empty image");
  if (maxval < 1 || maxval > 255) throw FormatError(path.string() + ": maxval must be in [1, 255]");
  const std::size_t offset = header.data_offset();
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() < offset + count) throw FormatError(path.string() + ": truncated raster");
  Image img = Image::filled(channels, height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        const auto byte = static_cast<unsigned char>(bytes[offset + (static_cast<std::size_t>(y) * width + x) * channels + c]);
        img.at(c, y, x) = static_cast<double>(byte) / maxval;
      }
  return img;
}

void store_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw FormatError("PNM stores 1 or 3 channels");
  std::string out = (image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c)
        out.push_back(static_cast<char>(std::lround(std::clamp(image.at(c, y, x), 0.0, 1.0) * 255.0)));
  std::ofstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

nc::Tensor to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("to_tensor needs at least one image");
  const Image& first = images.front();
  std::vector<double> values;
  values.reserve(images.size() * first.data.size());
  for (const auto& img : images) {
    if (img.channels != first.channels || img.height != first.height || img.width != first.width)
      throw ShapeError("to_tensor needs equally sized images");
    values.insert(values.end(), img.data.begin(), img.data.end());
  }
  return nc::Tensor::constant({static_cast<int>(images.size()), first.channels, first.height, first.width},
                              std::move(values));
}

Image from_tensor(const nc::Tensor& batch, int index) {
  if (batch.rank() != 4) throw ShapeError("from_tensor needs a (B, C, H, W) tensor");
  if (index < 0 || index >= batch.dim(0)) throw RangeError("batch index out of range");
  Image img = Image::filled(batch.dim(1), batch.dim(2), batch.dim(3));
  const auto begin = batch.values().begin() + static_cast<std::ptrdiff_t>(index) * static_cast<std::ptrdiff_t>(img.data.size());
  std::transform(begin, begin + static_cast<std::ptrdiff_t>(img.data.size()), img.data.begin(),
                 [](double v) { return std::clamp(v, 0.0, 1.0); });
  return img;
}

Batch make_batch(std::span<const ImagePair> pairs) {
  std::vector<Image> lr, hr;
  for (const auto& p : pairs) {
    lr.push_back(p.lr);
    hr.push_back(p.hr);
  }
  return {to_tensor(lr), to_tensor(hr)};
}

Dataset load_dataset(const std::string& source, const DatasetOptions& options) {
  if (options.scale < 1) throw DataError("scale must be >= 1");
  constexpr std::string_view kSynthetic = "synthetic:";
  constexpr std::string_view kDir = "dir:";
  if (source.starts_with(kSynthetic)) {
    if (options.image_size % options.scale != 0) throw DataError("synthetic image size must be divisible by the scale");
    const std::uint64_t seed = parse_seed(source.substr(kSynthetic.size()));
    auto images = synth_generate(options.train_images + options.validation_images, options.image_size, seed);
    Dataset data;
    data.scale = options.scale;
    data.source = source;
    for (std::size_t i = 0; i < images.size(); ++i) {
      auto pair = make_pair(std::move(images[i]), options.scale, source + "#" + std::to_string(i));
      (static_cast<int>(i) < options.train_images ? data.train : data.validation).push_back(std::move(pair));
    }
    return data;
  }
  if (source.starts_with(kDir)) return load_directory(source.substr(kDir.size()), options);
  throw DataError("data source must be synthetic:<seed> or dir:<path>, got '" + source + "'");
}

double bicubic_psnr(std::span<const ImagePair> pairs, int scale) {
  if (pairs.empty()) throw DataError("bicubic_psnr of an empty set");
  double total = 0.0;
  for (const auto& p : pairs) total += psnr(p.hr, upsample_bicubic(p.lr, scale));
  return total / static_cast<double>(pairs.size());
}

}  // namespace deconas

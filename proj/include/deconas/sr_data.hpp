#pragma once

// Super-resolution data: procedural images, bicubic resampling, patch
// sampling with dihedral augmentation, luma PSNR and binary PNM files.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "deconas/nc/tensor.hpp"

namespace deconas {

/// Planar (C, H, W) image with samples in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static Image filled(int channels, int height, int width, double value = 0.0);

  [[nodiscard]] double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  [[nodiscard]] double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool operator==(const Image&) const = default;
};

struct ImagePair {
  Image hr;
  Image lr;
  std::string provenance;
};

/// `count` images of size x size, three channels, reproducible from `seed`.
std::vector<Image> synth_generate(int count, int size, std::uint64_t seed);

/// Cubic convolution kernel with parameter a.
double cubic_kernel(double x, double a = -0.5);

/// Antialiased bicubic decimation by `scale`: taps k((j - c)/s)/s around
/// centre c = (i + 0.5)s - 0.5, normalized, reflective boundary, clamped.
Image downsample_bicubic(const Image& hr, int scale);
/// Bicubic interpolation by `scale` with reflective boundary, clamped.
Image upsample_bicubic(const Image& lr, int scale);

/// Pairs an HR image with its bicubic LR version. Throws ShapeError when
/// the size is not divisible by `scale`.
ImagePair make_pair(Image hr, int scale, std::string provenance);

/// `count` aligned patches: an LR window of `patch` pixels at a seeded
/// origin and the HR window at scale times that origin.
std::vector<ImagePair> extract_patches(std::span<const ImagePair> pairs, int patch,
                                       int count, std::uint64_t seed);

/// Dihedral transform t in [0, 8): rotation by 90 * (t % 4) degrees
/// counter-clockwise, preceded by a horizontal flip when t >= 4.
Image apply_dihedral(const Image& image, int transform);
/// The transform augment() picks for `seed`.
int augment_choice(std::uint64_t seed);
/// Applies the same seeded transform to LR and HR. Square inputs only.
ImagePair augment(const ImagePair& pair, std::uint64_t seed);

/// BT.601 luma PSNR with peak 1, capped at 100 dB. Single-channel inputs
/// are used as luma directly.
double psnr(const Image& a, const Image& b);
inline constexpr double kPsnrCap = 100.0;

/// Binary PGM (P5) and PPM (P6), maxval <= 255.
Image load_pnm(const std::filesystem::path& path);
void store_pnm(const std::filesystem::path& path, const Image& image);

/// Stacks same-sized images into a (B, C, H, W) constant tensor.
nc::Tensor to_tensor(std::span<const Image> images);
/// Image `index` of a (B, C, H, W) tensor, clamped to [0, 1].
Image from_tensor(const nc::Tensor& batch, int index);

struct Batch {
  nc::Tensor lr;
  nc::Tensor hr;
};
Batch make_batch(std::span<const ImagePair> pairs);

struct DatasetOptions {
  int scale = 2;
  /// Synthetic source only.
  int train_images = 32;
  int validation_images = 8;
  int image_size = 64;
};

struct Dataset {
  std::vector<ImagePair> train;
  std::vector<ImagePair> validation;
  int scale = 2;
  std::string source;
};

/// `synthetic:<seed>` or `dir:<path>`. A directory holds hr/*.ppm and an
/// optional manifest.json ({"files": [...], "validation": [...]}); without
/// a manifest the last tenth of the sorted files is held out. HR images
/// are cropped to a multiple of the scale. Throws DataError.
Dataset load_dataset(const std::string& source, const DatasetOptions& options);

/// Mean PSNR of bicubic upsampling over the pairs.
double bicubic_psnr(std::span<const ImagePair> pairs, int scale);

}  // namespace deconas

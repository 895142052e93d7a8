#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace novsal {

/// Grayscale intensity grid, row-major, values in [0,1].
class ImageBuf {
 public:
  ImageBuf() = default;
  ImageBuf(std::size_t height, std::size_t width, double fill = 0.0)
      : height_(height), width_(width), data_(height * width, fill) {}
  ImageBuf(std::size_t height, std::size_t width, std::vector<double> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(std::size_t r, std::size_t c) { return data_[r * width_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * width_ + c]; }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  bool same_dims(const ImageBuf& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool operator==(const ImageBuf&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// True when every value is finite and inside [0,1].
bool in_unit_range(const ImageBuf& img);

/// Interleaved (r,g,b) image, channels in [0,1].
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;  // 3 * height * width
};

/// BT.601 luma.
ImageBuf to_grayscale(const RgbImage& img);

/// Corner-aligned bilinear resize.
ImageBuf resize_bilinear(const ImageBuf& img, std::size_t out_h, std::size_t out_w);

// 8-bit netpbm I/O. Encoding rounds v*255 to nearest, decoding divides by 255.
std::uint8_t encode_intensity(double v);
double decode_intensity(std::uint8_t byte);

void write_pgm(const std::filesystem::path& path, const ImageBuf& img);
ImageBuf read_pgm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_ppm(const std::filesystem::path& path);

/// Reads either P5 or P6 (converted to grayscale).
ImageBuf read_gray_image(const std::filesystem::path& path);

struct ManifestRecord {
  std::string path;  // relative to the manifest directory
  double angle_rad = 0.0;
  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;  // directory the relative paths resolve against

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  std::filesystem::path resolve(const ManifestRecord& rec) const { return base_dir / rec.path; }
};

/// Throws DataError on empty or duplicate paths and non-finite angles.
void validate_manifest(const DatasetManifest& manifest);

/// CSV with header `path,angle_rad`.
DatasetManifest read_manifest(const std::filesystem::path& csv);
void write_manifest(const std::filesystem::path& csv, const DatasetManifest& manifest);

std::vector<ImageBuf> load_images(const DatasetManifest& manifest);
std::vector<double> angles(const DatasetManifest& manifest);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Seeded shuffle, then the first floor(f*N) records train and the rest test.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                          const SplitSpec& spec);
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          const SplitSpec& spec);

/// Index batches for one epoch. The permutation depends only on (seed, epoch);
/// a short final batch is kept.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch,
                                                    std::uint64_t seed, std::uint64_t epoch);

/// Materialized minibatches of images for one epoch.
std::vector<std::vector<ImageBuf>> minibatches(const std::vector<ImageBuf>& images,
                                               std::size_t batch, std::uint64_t seed,
                                               std::uint64_t epoch = 0);

}  // namespace novsal

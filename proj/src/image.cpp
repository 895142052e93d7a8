#include "novsal/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "novsal/error.hpp"
#include "novsal/rng.hpp"

namespace novsal {

ImageBuf::ImageBuf(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != height_ * width_) {
    throw std::invalid_argument("ImageBuf: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(height_) + "x" +
                                std::to_string(width_));
  }
}

bool in_unit_range(const ImageBuf& img) {
  return std::all_of(img.data().begin(), img.data().end(),
                     [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
}

ImageBuf to_grayscale(const RgbImage& img) {
  if (img.data.size() != 3 * img.height * img.width) {
    throw std::invalid_argument("to_grayscale: RGB data length mismatch");
  }
  ImageBuf out(img.height, img.width);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double r = img.data[3 * k], g = img.data[3 * k + 1], b = img.data[3 * k + 2];
    out[k] = std::clamp(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 1.0);
  }
  return out;
}

namespace {

// Source coordinate for corner-aligned sampling.
double source_coord(std::size_t out_index, std::size_t in_dim, std::size_t out_dim) {
  if (out_dim == 1) return 0.0;
  return static_cast<double>(out_index) * static_cast<double>(in_dim - 1) /
         static_cast<double>(out_dim - 1);
}

}  // namespace

ImageBuf resize_bilinear(const ImageBuf& img, std::size_t out_h, std::size_t out_w) {
  if (img.height() == 0 || img.width() == 0) {
    throw std::invalid_argument("resize_bilinear: empty input image");
  }
  if (out_h == 0 || out_w == 0) {
    throw std::invalid_argument("resize_bilinear: output dimensions must be >= 1");
  }
  if (out_h == img.height() && out_w == img.width()) return img;

  ImageBuf out(out_h, out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const double sy = source_coord(r, img.height(), out_h);
    const std::size_t y0 = std::min(static_cast<std::size_t>(sy), img.height() - 1);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t c = 0; c < out_w; ++c) {
      const double sx = source_coord(c, img.width(), out_w);
      const std::size_t x0 = std::min(static_cast<std::size_t>(sx), img.width() - 1);
      const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = img.at(y0, x0) * (1.0 - fx) + img.at(y0, x1) * fx;
      const double bottom = img.at(y1, x0) * (1.0 - fx) + img.at(y1, x1) * fx;
      out.at(r, c) = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

std::uint8_t encode_intensity(double v) {
  const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::min(scaled, 255.0));
}

double decode_intensity(std::uint8_t byte) { return static_cast<double>(byte) / 255.0; }

namespace {

// Reads the next whitespace-separated header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

struct NetpbmHeader {
  std::string magic;
  std::size_t width = 0;
  std::size_t height = 0;
};

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  NetpbmHeader h;
  h.magic = next_token(in);
  try {
    h.width = std::stoul(next_token(in));
    h.height = std::stoul(next_token(in));
    const unsigned long maxval = std::stoul(next_token(in));
    if (maxval != 255) throw DataError("unsupported maxval " + std::to_string(maxval));
  } catch (const std::logic_error&) {
    throw DataError("malformed netpbm header in " + path.string());
  }
  if (h.width == 0 || h.height == 0) throw DataError("zero-sized image in " + path.string());
  return h;
}

std::vector<std::uint8_t> read_raster(std::istream& in, std::size_t count,
                                      const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(count);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw DataError("truncated raster in " + path.string());
  }
  return bytes;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  return in;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const ImageBuf& img) {
  auto out = open_for_write(path);
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<std::uint8_t> bytes(img.size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), encode_intensity);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

ImageBuf read_pgm(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  const NetpbmHeader h = read_header(in, path);
  if (h.magic != "P5") throw DataError("not a binary PGM (P5): " + path.string());
  const auto bytes = read_raster(in, h.width * h.height, path);
  ImageBuf img(h.height, h.width);
  std::transform(bytes.begin(), bytes.end(), img.data().begin(), decode_intensity);
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  if (img.data.size() != 3 * img.height * img.width) {
    throw std::invalid_argument("write_ppm: RGB data length mismatch");
  }
  auto out = open_for_write(path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), encode_intensity);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  const NetpbmHeader h = read_header(in, path);
  if (h.magic != "P6") throw DataError("not a binary PPM (P6): " + path.string());
  const auto bytes = read_raster(in, 3 * h.width * h.height, path);
  RgbImage img{h.height, h.width, std::vector<double>(bytes.size())};
  std::transform(bytes.begin(), bytes.end(), img.data.begin(), decode_intensity);
  return img;
}

ImageBuf read_gray_image(const std::filesystem::path& path) {
  std::string magic;
  {
    auto in = open_for_read(path);
    magic = next_token(in);
  }
  if (magic == "P5") return read_pgm(path);
  if (magic == "P6") return to_grayscale(read_ppm(path));
  throw DataError("unsupported image format '" + magic + "': " + path.string());
}

void validate_manifest(const DatasetManifest& manifest) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& rec = manifest.records[i];
    if (rec.path.empty()) throw DataError("manifest record " + std::to_string(i) + ": empty path");
    if (!std::isfinite(rec.angle_rad)) {
      throw DataError("manifest record " + std::to_string(i) + ": non-finite angle");
    }
    if (!seen.insert(rec.path).second) throw DataError("manifest: duplicate path " + rec.path);
  }
}

DatasetManifest read_manifest(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw DataError("cannot open manifest: " + csv.string());
  DatasetManifest manifest;
  manifest.base_dir = csv.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty manifest: " + csv.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,angle_rad") {
    throw DataError("manifest header must be 'path,angle_rad': " + csv.string());
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw DataError(csv.string() + ":" + std::to_string(lineno) + ": missing angle column");
    }
    ManifestRecord rec;
    rec.path = line.substr(0, comma);
    try {
      std::size_t used = 0;
      const std::string angle = line.substr(comma + 1);
      rec.angle_rad = std::stod(angle, &used);
      if (used != angle.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::logic_error&) {
      throw DataError(csv.string() + ":" + std::to_string(lineno) + ": bad angle value");
    }
    manifest.records.push_back(std::move(rec));
  }
  validate_manifest(manifest);
  return manifest;
}

void write_manifest(const std::filesystem::path& csv, const DatasetManifest& manifest) {
  validate_manifest(manifest);
  std::ofstream out(csv, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + csv.string());
  out << "path,angle_rad\n";
  char buf[64];
  for (const auto& rec : manifest.records) {
    std::snprintf(buf, sizeof buf, "%.17g", rec.angle_rad);
    out << rec.path << ',' << buf << '\n';
  }
  if (!out) throw DataError("write failed: " + csv.string());
}

std::vector<ImageBuf> load_images(const DatasetManifest& manifest) {
  std::vector<ImageBuf> images;
  images.reserve(manifest.size());
  for (const auto& rec : manifest.records) images.push_back(read_gray_image(manifest.resolve(rec)));
  return images;
}

std::vector<double> angles(const DatasetManifest& manifest) {
  std::vector<double> out;
  out.reserve(manifest.size());
  for (const auto& rec : manifest.records) out.push_back(rec.angle_rad);
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                          const SplitSpec& spec) {
  if (n == 0) throw std::invalid_argument("split_dataset: empty manifest");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("split_dataset: train fraction must be in (0,1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(spec.seed));
  rng.shuffle(order);

  const auto n_train =
      static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  order.resize(n_train);
  return {std::move(order), std::move(test)};
}

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          const SplitSpec& spec) {
  const auto [train_idx, test_idx] = split_indices(manifest.size(), spec);
  DatasetManifest train{{}, manifest.base_dir};
  DatasetManifest test{{}, manifest.base_dir};
  for (std::size_t i : train_idx) train.records.push_back(manifest.records[i]);
  for (std::size_t i : test_idx) test.records.push_back(manifest.records[i]);
  return {std::move(train), std::move(test)};
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch,
                                                    std::uint64_t seed, std::uint64_t epoch) {
  if (batch == 0) throw std::invalid_argument("epoch_batches: batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, epoch));
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t stop = std::min(n, start + batch);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

std::vector<std::vector<ImageBuf>> minibatches(const std::vector<ImageBuf>& images,
                                               std::size_t batch, std::uint64_t seed,
                                               std::uint64_t epoch) {
  std::vector<std::vector<ImageBuf>> out;
  for (const auto& idx : epoch_batches(images.size(), batch, seed, epoch)) {
    auto& b = out.emplace_back();
    b.reserve(idx.size());
    for (std::size_t i : idx) b.push_back(images[i]);
  }
  return out;
}

}  // namespace novsal

#include "crossgen/data/mnist.hpp"

#include <zlib.h>

#include <fstream>
#include <memory>

#include "crossgen/util/errors.hpp"

namespace crossgen::data {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

// gzread passes uncompressed files through unchanged.
class GzFile {
 public:
  explicit GzFile(const std::filesystem::path& path) : path_(path), file_(gzopen(path.c_str(), "rb"), gzclose) {
    if (!file_) throw IoError("cannot open " + path.string());
  }

  void read(void* out, std::size_t n, const char* what) {
    auto* dst = static_cast<char*>(out);
    while (n > 0) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
      const int got = gzread(file_.get(), dst, chunk);
      if (got <= 0) throw ParseError(path_.string() + ": truncated while reading " + what);
      dst += got;
      n -= static_cast<std::size_t>(got);
    }
  }

  std::uint32_t be32(const char* what) {
    unsigned char b[4];
    read(b, 4, what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
  }

  bool at_eof() {
    char c;
    return gzread(file_.get(), &c, 1) == 0;
  }

 private:
  std::filesystem::path path_;
  std::unique_ptr<gzFile_s, decltype(&gzclose)> file_;
};

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(b, 4);
}

}  // namespace

tensor::Tensor image_tensor(const ImageSample& image) {
  tensor::Tensor t({1, kImageSide, kImageSide});
  for (std::size_t i = 0; i < kImagePixels; ++i) t[i] = image.pixels[i] / 255.0f;
  return t;
}

std::vector<ImageSample> load_mnist_idx(const std::filesystem::path& images_path,
                                        const std::filesystem::path& labels_path) {
  GzFile images(images_path);
  GzFile labels(labels_path);
  if (const auto magic = images.be32("magic"); magic != kImageMagic) {
    throw ParseError(images_path.string() + ": bad image magic " + std::to_string(magic));
  }
  if (const auto magic = labels.be32("magic"); magic != kLabelMagic) {
    throw ParseError(labels_path.string() + ": bad label magic " + std::to_string(magic));
  }
  const std::uint32_t n_images = images.be32("image count");
  const std::uint32_t rows = images.be32("row count");
  const std::uint32_t cols = images.be32("column count");
  const std::uint32_t n_labels = labels.be32("label count");
  if (rows != kImageSide || cols != kImageSide) {
    throw ParseError(images_path.string() + ": expected 28x28 images, got " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  if (n_images != n_labels) {
    throw ParseError("MNIST count mismatch: " + std::to_string(n_images) + " images vs " +
                     std::to_string(n_labels) + " labels");
  }
  std::vector<ImageSample> out(n_images);
  std::vector<std::uint8_t> label_bytes(n_labels);
  if (n_labels > 0) labels.read(label_bytes.data(), n_labels, "labels");
  for (std::uint32_t i = 0; i < n_images; ++i) {
    images.read(out[i].pixels.data(), kImagePixels, "pixels");
    if (label_bytes[i] > 9) throw ParseError(labels_path.string() + ": label out of range at " + std::to_string(i));
    out[i].label = label_bytes[i];
  }
  if (!images.at_eof()) throw ParseError(images_path.string() + ": trailing bytes after header count");
  if (!labels.at_eof()) throw ParseError(labels_path.string() + ": trailing bytes after header count");
  return out;
}

void write_mnist_idx(std::span<const ImageSample> images, const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw IoError("cannot write MNIST fixture files");
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(images.size()));
  write_be32(img, kImageSide);
  write_be32(img, kImageSide);
  write_be32(lab, kLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(images.size()));
  for (const auto& s : images) {
    img.write(reinterpret_cast<const char*>(s.pixels.data()), kImagePixels);
    lab.put(static_cast<char>(s.label));
  }
  if (!img || !lab) throw IoError("failed writing MNIST fixture files");
}

MnistFiles find_mnist_files(const std::filesystem::path& dir) {
  auto pick = [&](const std::string& stem) {
    // Some mirrors use "train-images.idx3-ubyte" instead of "train-images-idx3-ubyte".
    std::string dotted = stem;
    dotted[dotted.find("-idx")] = '.';
    for (const auto& name : {stem, stem + ".gz", dotted, dotted + ".gz"}) {
      if (std::filesystem::exists(dir / name)) return dir / name;
    }
    throw IoError("MNIST file " + stem + " not found in " + dir.string());
  };
  return {pick("train-images-idx3-ubyte"), pick("train-labels-idx1-ubyte"), pick("t10k-images-idx3-ubyte"),
          pick("t10k-labels-idx1-ubyte")};
}

}  // namespace crossgen::data

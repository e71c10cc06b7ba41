#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "segbias/error.hpp"
#include "segbias/image.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "pnm";

class HeaderReader {
 public:
  HeaderReader(const std::vector<char>& buf, const std::filesystem::path& path)
      : buf_(buf), path_(path) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < buf_.size() && !std::isspace(static_cast<unsigned char>(buf_[pos_]))) {
      out.push_back(buf_[pos_++]);
    }
    if (out.empty()) fail("truncated header");
    return out;
  }

  int integer() {
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      fail("non-numeric header field '" + t + "'");
    }
    return std::stoi(t);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= buf_.size()) fail("missing raster");
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError, kModule, path_.string() + ": " + what);
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < buf_.size()) {
      if (std::isspace(static_cast<unsigned char>(buf_[pos_]))) {
        ++pos_;
      } else if (buf_[pos_] == '#') {
        while (pos_ < buf_.size() && buf_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<char>& buf_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

Pnm read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, kModule, "cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  HeaderReader reader(buf, path);
  const std::string magic = reader.token();
  Pnm pnm;
  if (magic == "P5") {
    pnm.channels = 1;
  } else if (magic == "P6") {
    pnm.channels = 3;
  } else {
    reader.fail("unsupported magic '" + magic + "'");
  }
  pnm.width = reader.integer();
  pnm.height = reader.integer();
  const int maxval = reader.integer();
  if (maxval != 255) reader.fail("only maxval 255 is supported");
  if (pnm.width <= 0 || pnm.height <= 0) reader.fail("non-positive dimensions");

  const std::size_t offset = reader.raster_offset();
  const std::size_t expected = static_cast<std::size_t>(pnm.width) * pnm.height * pnm.channels;
  if (buf.size() < offset + expected) reader.fail("raster shorter than header declares");
  pnm.bytes.assign(buf.begin() + static_cast<std::ptrdiff_t>(offset),
                   buf.begin() + static_cast<std::ptrdiff_t>(offset + expected));
  return pnm;
}

void write_pnm(const std::filesystem::path& path, const Pnm& pnm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, kModule, "cannot write " + path.string());
  out << (pnm.channels == 3 ? "P6" : "P5") << '\n'
      << pnm.width << ' ' << pnm.height << '\n'
      << 255 << '\n';
  out.write(reinterpret_cast<const char*>(pnm.bytes.data()),
            static_cast<std::streamsize>(pnm.bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, kModule, "short write to " + path.string());
}

void write_image_pgm(const std::filesystem::path& path, const GrayImage& image) {
  Pnm pnm{image.width, image.height, 1, {}};
  pnm.bytes.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image.values[i], 0.0, 1.0);
    pnm.bytes[i] = static_cast<std::uint8_t>(std::lround(255.0 * v));
  }
  write_pnm(path, pnm);
}

GrayImage read_image_pgm(const std::filesystem::path& path) {
  const Pnm pnm = read_pnm(path);
  if (pnm.channels != 1) {
    throw Error(ErrorCode::ParseError, kModule, path.string() + ": expected P5 grayscale");
  }
  GrayImage image(pnm.width, pnm.height);
  for (std::size_t i = 0; i < image.size(); ++i) image.values[i] = pnm.bytes[i] / 255.0;
  return image;
}

RgbImage read_rgb_ppm(const std::filesystem::path& path) {
  Pnm pnm = read_pnm(path);
  if (pnm.channels != 3) {
    throw Error(ErrorCode::ParseError, kModule, path.string() + ": expected P6 RGB");
  }
  return RgbImage{pnm.width, pnm.height, std::move(pnm.bytes)};
}

void write_rgb_ppm(const std::filesystem::path& path, const RgbImage& image) {
  write_pnm(path, Pnm{image.width, image.height, 3, image.rgb});
}

void quantize_to_8bit(GrayImage& image) {
  for (double& v : image.values) {
    v = static_cast<double>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))) / 255.0;
  }
}

}  // namespace segbias

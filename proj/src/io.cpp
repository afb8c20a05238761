#include "cowdiff/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "cowdiff/text_util.hpp"

namespace cowdiff {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kTensorMagic{'C', 'W', 'T', 'N'};
constexpr std::uint32_t kTensorVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("tensor file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!tok.empty()) break;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  if (tok.empty()) throw std::runtime_error("PNM header truncated");
  return tok;
}

unsigned char to_byte(double v) {
  const double p = std::round((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5);
  return static_cast<unsigned char>(p);
}

bool has_pnm_extension(const std::string& path) {
  const std::string ext = fs::path(path).extension().string();
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

}  // namespace

double quantize_8bit(double v) { return to_byte(v) / 127.5 - 1.0; }

Canvas read_pnm(std::istream& in) {
  const std::string magic = pnm_token(in);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw std::runtime_error("unsupported PNM type '" + magic + "' (need P5 or P6)");
  }
  const int width = parse_int(pnm_token(in));
  const int height = parse_int(pnm_token(in));
  const int maxval = parse_int(pnm_token(in));
  if (maxval != 255) throw std::runtime_error("only 8-bit PNM (maxval 255) is supported");
  Canvas out(Shape{height, width, channels});
  std::vector<unsigned char> bytes(out.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::runtime_error("PNM pixel data truncated");
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = bytes[i] / 127.5 - 1.0;
  return out;
}

void write_pnm(std::ostream& out, const Canvas& canvas) {
  const Shape& s = canvas.shape();
  if (s.channels != 1 && s.channels != 3) {
    throw std::invalid_argument("PNM output needs 1 or 3 channels, got " + std::to_string(s.channels));
  }
  out << (s.channels == 1 ? "P5" : "P6") << '\n' << s.width << ' ' << s.height << "\n255\n";
  std::vector<unsigned char> bytes(canvas.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(canvas[i]);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing PNM");
}

Canvas read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kTensorMagic) throw std::runtime_error("not a raw tensor file");
  const std::uint32_t version = get_u32(in);
  if (version != kTensorVersion) {
    throw std::runtime_error("unsupported tensor version " + std::to_string(version));
  }
  std::array<int, 3> dims{};
  for (int& d : dims) {
    const std::uint32_t u = get_u32(in);
    if (u == 0 || u > (1u << 16)) throw std::runtime_error("tensor header has invalid dimension");
    d = static_cast<int>(u);
  }
  Canvas out(Shape{dims[0], dims[1], dims[2]});
  for (double& v : out.values()) v = static_cast<double>(std::bit_cast<float>(get_u32(in)));
  return out;
}

void write_tensor(std::ostream& out, const Canvas& canvas) {
  out.write(kTensorMagic.data(), kTensorMagic.size());
  put_u32(out, kTensorVersion);
  const Shape& s = canvas.shape();
  for (int d : {s.height, s.width, s.channels}) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : canvas.values()) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw std::runtime_error("failed writing tensor");
}

Canvas read_canvas(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return has_pnm_extension(path) ? read_pnm(in) : read_tensor(in);
}

void write_canvas(const std::string& path, const Canvas& canvas) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  if (has_pnm_extension(path)) {
    write_pnm(out, canvas);
  } else {
    write_tensor(out, canvas);
  }
}

std::vector<LabeledImage> load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open dataset manifest '" + manifest_path + "'");
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<LabeledImage> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tokens = split_ws(strip_comment(line));
    if (tokens.empty()) continue;
    if (tokens.size() != 2) {
      throw std::runtime_error("dataset line " + std::to_string(lineno) + ": expected 'label path'");
    }
    const fs::path p = fs::path(tokens[1]).is_absolute() ? fs::path(tokens[1]) : base / tokens[1];
    out.push_back({read_canvas(p.string()), tokens[0] == "-" ? std::string() : tokens[0]});
  }
  return out;
}

void save_dataset(const std::string& manifest_path, const std::vector<LabeledImage>& dataset) {
  const fs::path base = fs::path(manifest_path).parent_path();
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write dataset manifest '" + manifest_path + "'");
  out << "# label path\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::string name = "sample_" + std::to_string(i) + ".tensor";
    write_canvas((base / name).string(), dataset[i].image);
    out << (dataset[i].label.empty() ? "-" : dataset[i].label) << ' ' << name << '\n';
  }
}

}  // namespace cowdiff

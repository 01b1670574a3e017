#include "vidfeat/video.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "vidfeat/rng.hpp"

namespace vidfeat {
namespace {

constexpr char kRgvMagic[4] = {'R', 'G', 'V', '1'};
constexpr std::uint64_t kMaxPixels = 1ull << 33;

std::uint32_t get_u32le(const unsigned char* p) {
  return p[0] | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

void put_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

unsigned char quantize(float v) {
  float s = std::round(v * 255.0f);
  if (s < 0.0f) s = 0.0f;
  if (s > 255.0f) s = 255.0f;
  return static_cast<unsigned char>(s);
}

GrayVideo load_rgv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::missing_file, "cannot open: " + path.string());

  unsigned char header[16];
  is.read(reinterpret_cast<char*>(header), 16);
  if (is.gcount() != 16)
    throw IoError(IoError::Kind::corrupt_header, "RGV header truncated: " + path.string());
  if (std::memcmp(header, kRgvMagic, 4) != 0)
    throw IoError(IoError::Kind::corrupt_header, "bad magic, not an RGV file: " + path.string());

  GrayVideo v;
  v.width = get_u32le(header + 4);
  v.height = get_u32le(header + 8);
  v.frames = get_u32le(header + 12);
  if (v.width == 0 || v.height == 0 || v.frames == 0)
    throw IoError(IoError::Kind::corrupt_header, "zero dimension in RGV header");
  std::uint64_t total = std::uint64_t(v.width) * v.height * v.frames;
  if (total > kMaxPixels)
    throw IoError(IoError::Kind::corrupt_header, "RGV header declares unreasonable size");

  std::vector<unsigned char> raw(total);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(total));
  if (static_cast<std::uint64_t>(is.gcount()) != total)
    throw IoError(IoError::Kind::truncated_payload, "RGV payload truncated: " + path.string());
  if (is.peek() != std::ifstream::traits_type::eof())
    throw IoError(IoError::Kind::corrupt_header, "RGV payload longer than header declares");

  v.data.resize(total);
  for (std::uint64_t i = 0; i < total; ++i) v.data[i] = raw[i] / 255.0f;
  return v;
}

struct PgmImage {
  std::uint32_t width = 0, height = 0;
  std::vector<unsigned char> pixels;
};

PgmImage load_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::missing_file, "cannot open: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) -> std::uint32_t {
    skip_ws();
    std::uint64_t v = 0;
    std::size_t start = pos;
    while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
      v = v * 10 + (buf[pos] - '0');
      if (v > kMaxPixels) throw IoError(IoError::Kind::corrupt_header, "PGM value too large");
      ++pos;
    }
    if (pos == start)
      throw IoError(IoError::Kind::corrupt_header,
                    std::string("PGM header missing ") + what + ": " + path.string());
    return static_cast<std::uint32_t>(v);
  };

  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5')
    throw IoError(IoError::Kind::corrupt_header, "not a binary PGM (P5): " + path.string());
  pos = 2;
  PgmImage img;
  img.width = read_int("width");
  img.height = read_int("height");
  std::uint32_t maxval = read_int("maxval");
  if (img.width == 0 || img.height == 0)
    throw IoError(IoError::Kind::corrupt_header, "zero dimension in PGM header");
  if (maxval != 255)
    throw IoError(IoError::Kind::bad_format, "unsupported PGM maxval (need 255)");
  if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos])))
    throw IoError(IoError::Kind::corrupt_header, "malformed PGM header: " + path.string());
  ++pos;

  std::uint64_t total = std::uint64_t(img.width) * img.height;
  if (buf.size() - pos < total)
    throw IoError(IoError::Kind::truncated_payload, "PGM payload truncated: " + path.string());
  img.pixels.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                    buf.begin() + static_cast<std::ptrdiff_t>(pos + total));
  return img;
}

GrayVideo load_pgm_sequence(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir))
    throw IoError(IoError::Kind::missing_file, "no such directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm") files.push_back(entry.path());
  }
  if (files.empty())
    throw IoError(IoError::Kind::missing_file, "no .pgm frames in: " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });

  GrayVideo v;
  for (std::size_t t = 0; t < files.size(); ++t) {
    PgmImage img = load_pgm(files[t]);
    if (t == 0) {
      v.width = img.width;
      v.height = img.height;
      v.frames = static_cast<std::uint32_t>(files.size());
      v.data.reserve(std::size_t(v.width) * v.height * v.frames);
    } else if (img.width != v.width || img.height != v.height) {
      throw IoError(IoError::Kind::corrupt_header,
                    "frame size mismatch at: " + files[t].string());
    }
    for (unsigned char p : img.pixels) v.data.push_back(p / 255.0f);
  }
  return v;
}

}  // namespace

float ImageView::sample(float x, float y) const {
  x = std::clamp(x, 0.0f, static_cast<float>(width - 1));
  y = std::clamp(y, 0.0f, static_cast<float>(height - 1));
  std::uint32_t x0 = static_cast<std::uint32_t>(x);
  std::uint32_t y0 = static_cast<std::uint32_t>(y);
  std::uint32_t x1 = std::min(x0 + 1, width - 1);
  std::uint32_t y1 = std::min(y0 + 1, height - 1);
  float fx = x - x0, fy = y - y0;
  float top = at(x0, y0) * (1.0f - fx) + at(x1, y0) * fx;
  float bot = at(x0, y1) * (1.0f - fx) + at(x1, y1) * fx;
  return top * (1.0f - fy) + bot * fy;
}

GrayVideo load_video(const std::filesystem::path& path, VideoFormat format) {
  switch (format) {
    case VideoFormat::rgv:
      return load_rgv(path);
    case VideoFormat::pgm_sequence:
      return load_pgm_sequence(path);
  }
  throw std::invalid_argument("unknown video format");
}

void save_rgv(const GrayVideo& video, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::missing_file, "cannot open for write: " + path.string());
  os.write(kRgvMagic, 4);
  put_u32le(os, video.width);
  put_u32le(os, video.height);
  put_u32le(os, video.frames);
  std::vector<unsigned char> raw(video.data.size());
  for (std::size_t i = 0; i < video.data.size(); ++i) raw[i] = quantize(video.data[i]);
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!os) throw IoError(IoError::Kind::truncated_payload, "short write: " + path.string());
}

void save_pgm_sequence(const GrayVideo& video, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::uint32_t t = 0; t < video.frames; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05u.pgm", t);
    std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
    if (!os)
      throw IoError(IoError::Kind::missing_file, "cannot open for write: " + (dir / name).string());
    os << "P5\n" << video.width << " " << video.height << "\n255\n";
    const float* frame = video.data.data() + video.frame_offset(t);
    std::vector<unsigned char> raw(std::size_t(video.width) * video.height);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(frame[i]);
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  }
}

void save_pgm_scaled(const float* data, std::uint32_t width, std::uint32_t height,
                     const std::filesystem::path& path) {
  std::size_t n = std::size_t(width) * height;
  float lo = data[0], hi = data[0];
  for (std::size_t i = 1; i < n; ++i) {
    lo = std::min(lo, data[i]);
    hi = std::max(hi, data[i]);
  }
  float scale = hi > lo ? 255.0f / (hi - lo) : 0.0f;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::missing_file, "cannot open for write: " + path.string());
  os << "P5\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> raw(n);
  for (std::size_t i = 0; i < n; ++i)
    raw[i] = static_cast<unsigned char>(std::lround((data[i] - lo) * scale));
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

GrayVideo resize_bilinear(const GrayVideo& video, std::uint32_t new_width,
                          std::uint32_t new_height) {
  if (new_width == 0 || new_height == 0)
    throw std::invalid_argument("resize target must be nonzero");
  GrayVideo out;
  out.width = new_width;
  out.height = new_height;
  out.frames = video.frames;
  out.data.resize(std::size_t(new_width) * new_height * video.frames);
  float sx = static_cast<float>(video.width) / new_width;
  float sy = static_cast<float>(video.height) / new_height;
  for (std::uint32_t t = 0; t < video.frames; ++t) {
    ImageView src = frame_view(video, t);
    float* dst = out.data.data() + out.frame_offset(t);
    for (std::uint32_t y = 0; y < new_height; ++y) {
      float syc = (y + 0.5f) * sy - 0.5f;
      for (std::uint32_t x = 0; x < new_width; ++x) {
        dst[std::size_t(y) * new_width + x] = src.sample((x + 0.5f) * sx - 0.5f, syc);
      }
    }
  }
  return out;
}

float ScalePyramid::to_base(float coord, int level) const {
  return coord * std::pow(1.0f / factor, static_cast<float>(level));
}

ScalePyramid build_scale_pyramid(const GrayVideo& video, int num_scales, float factor) {
  if (num_scales < 1) throw std::invalid_argument("num_scales must be >= 1");
  if (!(factor > 0.0f && factor < 1.0f)) throw std::invalid_argument("factor must be in (0,1)");
  ScalePyramid pyr;
  pyr.factor = factor;
  pyr.levels.push_back(video);
  for (int i = 1; i < num_scales; ++i) {
    double s = std::pow(static_cast<double>(factor), i);
    auto w = static_cast<std::uint32_t>(std::lround(video.width * s));
    auto h = static_cast<std::uint32_t>(std::lround(video.height * s));
    if (w < 32 || h < 32) break;
    pyr.levels.push_back(resize_bilinear(video, w, h));
  }
  return pyr;
}

MotionSpec MotionSpec::translate(float vx, float vy) {
  MotionSpec s;
  s.kind = Kind::translate;
  s.vx = vx;
  s.vy = vy;
  return s;
}

MotionSpec MotionSpec::oscillate(int axis, float period, float amplitude) {
  if (period <= 0.0f) throw std::invalid_argument("oscillation period must be positive");
  MotionSpec s;
  s.kind = Kind::oscillate;
  s.axis = axis;
  s.period = period;
  s.amplitude = amplitude;
  return s;
}

std::pair<float, float> MotionSpec::offset_at(float t) const {
  switch (kind) {
    case Kind::still:
      return {0.0f, 0.0f};
    case Kind::translate:
      return {vx * t, vy * t};
    case Kind::oscillate: {
      float d = amplitude *
                std::sin(2.0f * std::numbers::pi_v<float> * t / period);
      return axis == 0 ? std::pair{d, 0.0f} : std::pair{0.0f, d};
    }
  }
  return {0.0f, 0.0f};
}

std::pair<float, float> MotionSpec::flow_at(std::uint32_t t) const {
  auto [x0, y0] = offset_at(static_cast<float>(t));
  auto [x1, y1] = offset_at(static_cast<float>(t) + 1.0f);
  return {x1 - x0, y1 - y0};
}

GrayVideo synth_video(const MotionSpec& spec, std::uint32_t width, std::uint32_t height,
                      std::uint32_t frames, std::uint64_t seed) {
  if (width == 0 || height == 0 || frames == 0)
    throw std::invalid_argument("synth_video dimensions must be nonzero");

  auto rng = make_rng(seed, "synth_video");
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  std::size_t npix = std::size_t(width) * height;
  std::vector<float> pattern(npix);
  for (float& p : pattern) p = uni(rng);

  // Wrap-around box blur passes smooth the noise so gradients are stable.
  std::vector<float> tmp(npix);
  for (int pass = 0; pass < 3; ++pass) {
    for (std::uint32_t y = 0; y < height; ++y) {
      for (std::uint32_t x = 0; x < width; ++x) {
        float s = 0.0f;
        for (int dy = -1; dy <= 1; ++dy) {
          std::uint32_t yy = (y + height + dy) % height;
          for (int dx = -1; dx <= 1; ++dx) {
            std::uint32_t xx = (x + width + dx) % width;
            s += pattern[std::size_t(yy) * width + xx];
          }
        }
        tmp[std::size_t(y) * width + x] = s / 9.0f;
      }
    }
    pattern.swap(tmp);
  }
  float lo = pattern[0], hi = pattern[0];
  for (float p : pattern) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  float scale = hi > lo ? 1.0f / (hi - lo) : 0.0f;
  for (float& p : pattern) p = (p - lo) * scale;

  auto wrap_sample = [&](float x, float y) {
    x = std::fmod(x, static_cast<float>(width));
    if (x < 0.0f) x += width;
    y = std::fmod(y, static_cast<float>(height));
    if (y < 0.0f) y += height;
    std::uint32_t x0 = static_cast<std::uint32_t>(x) % width;
    std::uint32_t y0 = static_cast<std::uint32_t>(y) % height;
    std::uint32_t x1 = (x0 + 1) % width;
    std::uint32_t y1 = (y0 + 1) % height;
    float fx = x - std::floor(x), fy = y - std::floor(y);
    float top = pattern[std::size_t(y0) * width + x0] * (1 - fx) +
                pattern[std::size_t(y0) * width + x1] * fx;
    float bot = pattern[std::size_t(y1) * width + x0] * (1 - fx) +
                pattern[std::size_t(y1) * width + x1] * fx;
    return top * (1 - fy) + bot * fy;
  };

  GrayVideo v;
  v.width = width;
  v.height = height;
  v.frames = frames;
  v.data.resize(npix * frames);
  for (std::uint32_t t = 0; t < frames; ++t) {
    auto [ox, oy] = spec.offset_at(static_cast<float>(t));
    float* dst = v.data.data() + v.frame_offset(t);
    for (std::uint32_t y = 0; y < height; ++y)
      for (std::uint32_t x = 0; x < width; ++x)
        dst[std::size_t(y) * width + x] = wrap_sample(x - ox, y - oy);
  }
  return v;
}

}  // namespace vidfeat

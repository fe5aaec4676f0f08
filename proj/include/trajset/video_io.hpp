// Copyright 2026 trajset contributors
// Licensed under the terms of the Apache 2.0 License.
// See the LICENSE file in the project root for terms.
#pragma once

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trajset/errors.hpp"
#include "trajset/image.hpp"
#include "trajset/io_util.hpp"

namespace trajset {

// ITU-R BT.601 luma weights used when collapsing RGB inputs to grayscale.
inline float bt601_luma(float r, float g, float b) {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

// Ordered stream of grayscale frames with consecutive indices from 0.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<GrayFrame> next() = 0;
};

enum class SourceFormat { auto_detect, y4m, image_dir };

// ---------------------------------------------------------------------------
// Y4M (YUV4MPEG2)

namespace detail {

struct Y4mHeader {
  int width = 0;
  int height = 0;
  int fps_num = 30;
  int fps_den = 1;
  std::string colorspace = "420";
};

inline Y4mHeader parse_y4m_header(const std::string& line, const std::string& name) {
  std::istringstream ss(line);
  std::string tok;
  ss >> tok;
  if (tok != "YUV4MPEG2") throw UnsupportedFormat(name + ": not a YUV4MPEG2 stream");
  Y4mHeader h;
  while (ss >> tok) {
    if (tok.empty()) continue;
    const char tag = tok[0];
    const std::string val = tok.substr(1);
    switch (tag) {
      case 'W': h.width = std::stoi(val); break;
      case 'H': h.height = std::stoi(val); break;
      case 'F': {
        const auto colon = val.find(':');
        if (colon == std::string::npos) throw UnsupportedFormat(name + ": bad F tag");
        h.fps_num = std::stoi(val.substr(0, colon));
        h.fps_den = std::stoi(val.substr(colon + 1));
        break;
      }
      case 'C': h.colorspace = val; break;
      default: break;  // Ip, A, X... are irrelevant here
    }
  }
  if (h.width <= 0 || h.height <= 0)
    throw UnsupportedFormat(name + ": missing W/H in Y4M header");
  return h;
}

}  // namespace detail

class Y4mSource final : public FrameSource {
 public:
  explicit Y4mSource(const std::string& path)
      : name_(path), bytes_(io::read_file(path)) {
    const auto nl = find_newline(0);
    header_ = detail::parse_y4m_header(
        std::string(bytes_.begin(), bytes_.begin() + static_cast<long>(nl)), name_);
    pos_ = nl + 1;
    const std::string& cs = header_.colorspace;
    if (cs == "mono") {
      chroma_bytes_ = 0;
    } else if (cs == "420" || cs == "420jpeg" || cs == "420mpeg2" || cs == "420paldv") {
      chroma_bytes_ = 2 * static_cast<std::size_t>((header_.width + 1) / 2) *
                      static_cast<std::size_t>((header_.height + 1) / 2);
    } else {
      throw UnsupportedFormat(name_ + ": colorspace C" + cs + " not supported");
    }
  }

  int width() const { return header_.width; }
  int height() const { return header_.height; }

  std::optional<GrayFrame> next() override {
    if (pos_ >= bytes_.size()) return std::nullopt;
    const auto nl = find_newline(pos_);
    const std::string marker(bytes_.begin() + static_cast<long>(pos_),
                             bytes_.begin() + static_cast<long>(nl));
    if (marker.rfind("FRAME", 0) != 0)
      throw UnsupportedFormat(name_ + ": expected FRAME marker");
    pos_ = nl + 1;
    const std::size_t luma = static_cast<std::size_t>(header_.width) * header_.height;
    if (pos_ + luma + chroma_bytes_ > bytes_.size())
      throw UnreadableSource(name_ + ": truncated frame payload");
    GrayFrame f;
    f.width = header_.width;
    f.height = header_.height;
    f.frame_index = index_++;
    f.data.resize(luma);
    for (std::size_t i = 0; i < luma; ++i)
      f.data[i] = static_cast<float>(bytes_[pos_ + i]) / 255.0f;
    pos_ += luma + chroma_bytes_;  // chroma planes are skipped
    return f;
  }

 private:
  std::size_t find_newline(std::size_t from) const {
    for (std::size_t i = from; i < bytes_.size(); ++i)
      if (bytes_[i] == '\n') return i;
    throw UnreadableSource(name_ + ": missing newline in stream header");
  }

  std::string name_;
  std::vector<std::uint8_t> bytes_;
  detail::Y4mHeader header_;
  std::size_t chroma_bytes_ = 0;
  std::size_t pos_ = 0;
  int index_ = 0;
};

// Writes frames as Y4M. Mono carries the gray plane alone; C420 pads the
// chroma planes with 128 (neutral).
inline void write_y4m(const std::string& path, const std::vector<GrayFrame>& frames,
                      int fps_num = 30, int fps_den = 1, bool mono = true) {
  if (frames.empty()) throw EmptyInput("write_y4m: no frames");
  std::string out;
  out += "YUV4MPEG2 W" + std::to_string(frames[0].width) + " H" +
         std::to_string(frames[0].height) + " F" + std::to_string(fps_num) + ":" +
         std::to_string(fps_den) + " Ip A1:1 C" + (mono ? "mono" : "420") + "\n";
  const std::size_t chroma =
      mono ? 0
           : 2 * static_cast<std::size_t>((frames[0].width + 1) / 2) *
                 static_cast<std::size_t>((frames[0].height + 1) / 2);
  for (const auto& f : frames) {
    if (f.width != frames[0].width || f.height != frames[0].height)
      throw InconsistentDimensions("write_y4m: frame size changed");
    out += "FRAME\n";
    for (const float v : f.data) {
      const int b = static_cast<int>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
      out.push_back(static_cast<char>(b));
    }
    out.append(chroma, static_cast<char>(128));
  }
  io::write_file(path, out);
}

// ---------------------------------------------------------------------------
// PGM (binary P5, 8-bit or 16-bit big-endian)

inline GrayFrame decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
  };

  if (next_token() != "P5") throw UnsupportedFormat(name + ": only binary PGM (P5) supported");
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  ++pos;  // single whitespace after maxval
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw UnsupportedFormat(name + ": bad PGM header");
  const std::size_t count = static_cast<std::size_t>(w) * h;
  const int bytes_per = maxval > 255 ? 2 : 1;
  if (pos + count * bytes_per > bytes.size()) throw UnreadableSource(name + ": truncated PGM");
  GrayFrame f;
  f.width = w;
  f.height = h;
  f.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    int v;
    if (bytes_per == 1) {
      v = bytes[pos + i];
    } else {
      v = (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1];
    }
    f.data[i] = static_cast<float>(v) / static_cast<float>(maxval);
  }
  return f;
}

inline void write_pgm(const std::string& path, const GrayFrame& f) {
  std::string out = "P5\n" + std::to_string(f.width) + " " + std::to_string(f.height) + "\n255\n";
  for (const float v : f.data)
    out.push_back(static_cast<char>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f)));
  io::write_file(path, out);
}

// ---------------------------------------------------------------------------
// PNG (8-bit grayscale or RGB, non-interlaced)

namespace detail {

inline std::uint32_t be32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace detail

inline GrayFrame decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (bytes.size() < 8 || !std::equal(sig, sig + 8, bytes.begin()))
    throw UnsupportedFormat(name + ": not a PNG file");

  int w = 0, h = 0, bit_depth = 0, color_type = 0;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  bool saw_end = false;
  while (pos + 8 <= bytes.size() && !saw_end) {
    const std::uint32_t len = detail::be32(&bytes[pos]);
    const std::string type(bytes.begin() + static_cast<long>(pos) + 4,
                           bytes.begin() + static_cast<long>(pos) + 8);
    if (pos + 12 + len > bytes.size()) throw UnreadableSource(name + ": truncated PNG chunk");
    const std::uint8_t* data = &bytes[pos + 8];
    if (type == "IHDR") {
      w = static_cast<int>(detail::be32(data));
      h = static_cast<int>(detail::be32(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      if (data[12] != 0) throw UnsupportedFormat(name + ": interlaced PNG not supported");
      if (bit_depth != 8 || (color_type != 0 && color_type != 2))
        throw UnsupportedFormat(name + ": only 8-bit grayscale/RGB PNG supported");
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      saw_end = true;
    }
    pos += 12 + len;
  }
  if (w <= 0 || h <= 0 || idat.empty()) throw UnreadableSource(name + ": incomplete PNG");

  const int channels = color_type == 2 ? 3 : 1;
  const std::size_t stride = static_cast<std::size_t>(w) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(h));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw UnreadableSource(name + ": PNG inflate failed");

  // Undo per-row filters in place.
  std::vector<std::uint8_t> prev(stride, 0);
  GrayFrame f;
  f.width = w;
  f.height = h;
  f.data.resize(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    std::uint8_t* row = &raw[(stride + 1) * static_cast<std::size_t>(y)];
    const int filter = row[0];
    std::uint8_t* cur = row + 1;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<std::size_t>(channels) ? cur[i - channels] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<std::size_t>(channels) ? prev[i - channels] : 0;
      int v = cur[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += detail::paeth(a, b, c); break;
        default: throw UnsupportedFormat(name + ": unknown PNG filter");
      }
      cur[i] = static_cast<std::uint8_t>(v & 0xff);
    }
    std::copy(cur, cur + stride, prev.begin());
    for (int x = 0; x < w; ++x) {
      if (channels == 1) {
        f.data[static_cast<std::size_t>(y) * w + x] = cur[x] / 255.0f;
      } else {
        f.data[static_cast<std::size_t>(y) * w + x] =
            bt601_luma(cur[3 * x] / 255.0f, cur[3 * x + 1] / 255.0f, cur[3 * x + 2] / 255.0f);
      }
    }
  }
  return f;
}

// Minimal PNG writer (filter 0 rows). `rgb` empty -> grayscale from `gray`.
inline void write_png(const std::string& path, int w, int h,
                      const std::vector<std::uint8_t>& gray,
                      const std::vector<std::uint8_t>& rgb = {}) {
  const bool color = !rgb.empty();
  const int channels = color ? 3 : 1;
  const std::size_t stride = static_cast<std::size_t>(w) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(h), 0);
  const std::vector<std::uint8_t>& src = color ? rgb : gray;
  for (int y = 0; y < h; ++y)
    std::copy(src.begin() + static_cast<long>(y * stride),
              src.begin() + static_cast<long>((y + 1) * stride),
              raw.begin() + static_cast<long>((stride + 1) * y + 1));

  std::vector<std::uint8_t> compressed(compressBound(static_cast<uLong>(raw.size())));
  uLongf comp_len = static_cast<uLongf>(compressed.size());
  if (compress2(compressed.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw UnreadableSource("PNG deflate failed");
  compressed.resize(comp_len);

  std::string out;
  const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.append(reinterpret_cast<const char*>(sig), 8);
  auto put_be32 = [](std::string& s, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto chunk = [&](const char* type, const std::string& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    std::string body = std::string(type) + data;
    out += body;
    const auto crc = crc32(0, reinterpret_cast<const Bytef*>(body.data()),
                           static_cast<uInt>(body.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
  };
  std::string ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(w));
  put_be32(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);                                // bit depth
  ihdr.push_back(color ? 2 : 0);                    // color type
  ihdr.push_back(0), ihdr.push_back(0), ihdr.push_back(0);
  chunk("IHDR", ihdr);
  chunk("IDAT", std::string(compressed.begin(), compressed.end()));
  chunk("IEND", "");
  io::write_file(path, out);
}

// ---------------------------------------------------------------------------
// Image directory source: lexicographically ordered PGM/PNG frames.

class ImageDirSource final : public FrameSource {
 public:
  explicit ImageDirSource(const std::string& dir) : name_(dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw UnreadableSource(dir + " is not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (ext == ".pgm" || ext == ".png") paths_.push_back(entry.path().string());
    }
    std::sort(paths_.begin(), paths_.end());
    if (paths_.empty()) throw UnreadableSource(dir + ": no PGM/PNG frames found");
  }

  std::optional<GrayFrame> next() override {
    if (cursor_ >= paths_.size()) return std::nullopt;
    const std::string& path = paths_[cursor_];
    const auto bytes = io::read_file(path);
    GrayFrame f;
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
      f = decode_pgm(bytes, path);
    } else if (bytes.size() >= 8 && bytes[0] == 137 && bytes[1] == 'P') {
      f = decode_png(bytes, path);
    } else {
      throw UnsupportedFormat(path + ": unknown image format");
    }
    if (cursor_ == 0) {
      width_ = f.width;
      height_ = f.height;
    } else if (f.width != width_ || f.height != height_) {
      throw InconsistentDimensions(path + ": frame size changed mid-stream");
    }
    f.frame_index = static_cast<int>(cursor_++);
    return f;
  }

 private:
  std::string name_;
  std::vector<std::string> paths_;
  std::size_t cursor_ = 0;
  int width_ = 0, height_ = 0;
};

inline std::unique_ptr<FrameSource> open_source(const std::string& path,
                                                SourceFormat format = SourceFormat::auto_detect) {
  namespace fs = std::filesystem;
  if (format == SourceFormat::auto_detect)
    format = fs::is_directory(path) ? SourceFormat::image_dir : SourceFormat::y4m;
  switch (format) {
    case SourceFormat::y4m: return std::make_unique<Y4mSource>(path);
    case SourceFormat::image_dir: return std::make_unique<ImageDirSource>(path);
    default: throw UnsupportedFormat(path + ": unknown source format");
  }
}

// Convenience for desk-scale inputs: decode everything up front.
inline std::vector<GrayFrame> read_all_frames(const std::string& path,
                                              SourceFormat format = SourceFormat::auto_detect) {
  auto src = open_source(path, format);
  std::vector<GrayFrame> frames;
  while (auto f = src->next()) frames.push_back(std::move(*f));
  return frames;
}

}  // namespace trajset

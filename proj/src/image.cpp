#include <evikit/image.hpp>

#include <evikit/binary_io.hpp>
#include <evikit/errors.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace evikit {

Frame::Frame(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels)
{
  if (width < 0 || height < 0 || channels < 1)
    throw ValidationError("invalid frame shape " + std::to_string(channels) + "x" + std::to_string(height) + "x" +
                          std::to_string(width));
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Frame::Frame(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data))
{
  if (width < 0 || height < 0 || channels < 1)
    throw ValidationError("invalid frame shape");
  if (data_.size() != static_cast<std::size_t>(width) * height * channels)
    throw ValidationError("frame data length " + std::to_string(data_.size()) + " does not match " +
                          std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width));
}

Frame luminance(const Frame& frame)
{
  if (frame.channels() == 1)
    return frame;
  if (frame.channels() != 3)
    throw ValidationError("luminance needs 1 or 3 channels, got " + std::to_string(frame.channels()));
  Frame out(frame.width(), frame.height(), 1);
  auto r = frame.plane(0), g = frame.plane(1), b = frame.plane(2);
  auto o = out.plane(0);
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return out;
}

namespace {

// Parses one whitespace-delimited header token, skipping '#' comments.
long header_int(const std::vector<std::uint8_t>& bytes, std::size_t& pos, const char* what)
{
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n')
        ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  long v = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    v = v * 10 + (bytes[pos] - '0');
    if (v > 1'000'000)
      throw FormatError(std::string("netpbm ") + what + " too large", start);
    ++pos;
  }
  if (pos == start)
    throw FormatError(std::string("netpbm header: expected ") + what, start);
  return v;
}

} // namespace

Frame read_netpbm(const std::filesystem::path& path)
{
  const auto bytes = io::read_file(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw FormatError("'" + path.string() + "' is not a binary P5/P6 netpbm file", 0);
  const int channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  const long width = header_int(bytes, pos, "width");
  const long height = header_int(bytes, pos, "height");
  const long maxval = header_int(bytes, pos, "maxval");
  if (maxval < 1 || maxval > 65535)
    throw FormatError("netpbm maxval out of range", pos);
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw FormatError("netpbm header not terminated by whitespace", pos);
  ++pos;
  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t samples = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos < samples * sample_bytes)
    throw FormatError("truncated netpbm pixel data in '" + path.string() + "'", pos);

  Frame out(static_cast<int>(width), static_cast<int>(height), channels);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (long y = 0; y < height; ++y)
    for (long x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        unsigned v = bytes[pos];
        if (sample_bytes == 2)
          v = (v << 8) | bytes[pos + 1];
        pos += sample_bytes;
        out.at(c, static_cast<int>(y), static_cast<int>(x)) = std::min(1.0, v * scale);
      }
  return out;
}

void write_netpbm(const Frame& frame, const std::filesystem::path& path, bool deep)
{
  if (frame.channels() != 1 && frame.channels() != 3)
    throw ValidationError("netpbm output needs 1 or 3 channels, got " + std::to_string(frame.channels()));
  const unsigned maxval = deep ? 65535u : 255u;
  std::string header = std::string(frame.channels() == 1 ? "P5" : "P6") + "\n" + std::to_string(frame.width()) + " " +
                       std::to_string(frame.height()) + "\n" + std::to_string(maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + frame.size() * (deep ? 2 : 1));
  for (int y = 0; y < frame.height(); ++y)
    for (int x = 0; x < frame.width(); ++x)
      for (int c = 0; c < frame.channels(); ++c) {
        const double v = frame.at(c, y, x);
        const double clamped = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
        const auto q = static_cast<unsigned>(std::lround(clamped * maxval));
        if (deep)
          out.push_back(static_cast<std::uint8_t>(q >> 8));
        out.push_back(static_cast<std::uint8_t>(q & 0xff));
      }
  io::write_file_atomic(path, out);
}

std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir)
{
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw IoError("frame directory '" + dir.string() + "' does not exist");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file())
      continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
      out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace evikit

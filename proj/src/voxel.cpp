#include <evikit/voxel.hpp>

#include <evikit/binary_io.hpp>
#include <evikit/errors.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace evikit {

VoxelGrid::VoxelGrid(int bins, int height, int width, double t_begin, double t_end)
    : VoxelGrid(bins, height, width, t_begin, t_end,
                std::vector<double>(static_cast<std::size_t>(std::max(bins, 0)) * std::max(height, 0) *
                                    std::max(width, 0)))
{
}

VoxelGrid::VoxelGrid(int bins, int height, int width, double t_begin, double t_end, std::vector<double> data)
    : bins_(bins), height_(height), width_(width), t_begin_(t_begin), t_end_(t_end), data_(std::move(data))
{
  if (bins < 2 || height < 0 || width < 0)
    throw ValidationError("voxel grid needs at least 2 bins and a non-negative size, got " + std::to_string(bins) +
                          "x" + std::to_string(height) + "x" + std::to_string(width));
  if (data_.size() != static_cast<std::size_t>(bins) * height * width)
    throw ValidationError("voxel data length does not match its shape");
}

double VoxelGrid::total() const
{
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

VoxelGrid voxelize(const EventStream& stream, int n)
{
  if (n < 0)
    throw ValidationError("number of interpolated frames must be >= 0, got " + std::to_string(n));
  const double tb = stream.t_begin();
  const double te = stream.t_end();
  VoxelGrid grid(n + 2, stream.height(), stream.width(), tb, te);
  if (stream.empty())
    return grid;
  if (!(te > tb))
    throw ValidationError("cannot voxelize events over a degenerate window");

  const double scale = static_cast<double>(n + 1) / (te - tb);
  const int last = n + 1;
  for (const Event& e : stream.events()) {
    const double pos = std::clamp((e.t - tb) * scale, 0.0, static_cast<double>(last));
    const int k = std::min(static_cast<int>(pos), last);
    const double frac = pos - k;
    grid.at(k, e.y, e.x) += e.p * (1.0 - frac);
    if (frac > 0.0)
      grid.at(k + 1, e.y, e.x) += e.p * frac;
  }
  return grid;
}

VoxelPair bidirectional_pair(const EventStream& stream, int n)
{
  return {voxelize(stream, n), voxelize(reverse(stream), n)};
}

std::span<const double> subvoxel(const VoxelGrid& grid, int i)
{
  if (i < 1 || i > grid.bins() - 1)
    throw RangeError("sub-voxel index " + std::to_string(i) + " outside [1, " + std::to_string(grid.bins() - 1) + "]");
  return grid.data().subspan(static_cast<std::size_t>(i - 1) * grid.plane_size(), 2 * grid.plane_size());
}

VoxelGrid exposure_voxel(const EventStream& stream, const ExposedFrame& frame, int bins)
{
  if (bins < 2)
    throw ValidationError("exposure voxel needs at least 2 bins");
  return voxelize(slice(stream, frame.t_s, frame.t_e), bins - 2);
}

namespace {
constexpr std::string_view kVox1Magic = "VOX1";
}

std::vector<std::uint8_t> encode_vox1(const VoxelGrid& grid)
{
  if (grid.bins() > 65535 || grid.height() > 65535 || grid.width() > 65535)
    throw ValidationError("voxel grid dimensions exceed the VOX1 u16 limit");
  io::ByteWriter w;
  w.bytes(kVox1Magic);
  w.u16(static_cast<std::uint16_t>(grid.bins()));
  w.u16(static_cast<std::uint16_t>(grid.height()));
  w.u16(static_cast<std::uint16_t>(grid.width()));
  w.f64(grid.t_begin());
  w.f64(grid.t_end());
  for (double v : grid.data())
    w.f32(static_cast<float>(v));
  return w.buffer();
}

VoxelGrid decode_vox1(std::span<const std::uint8_t> bytes)
{
  io::ByteReader r(bytes);
  if (r.bytes(std::min<std::size_t>(4, bytes.size()), "magic") != kVox1Magic)
    throw FormatError("bad magic, expected \"VOX1\"", 0);
  const std::uint64_t shape_offset = r.offset();
  const int bins = r.u16("bins");
  const int height = r.u16("height");
  const int width = r.u16("width");
  if (bins < 2)
    throw FormatError("voxel grid needs at least 2 bins", shape_offset);
  const double tb = r.f64("t_begin");
  const double te = r.f64("t_end");
  const std::size_t count = static_cast<std::size_t>(bins) * height * width;
  if (r.remaining() != count * 4)
    throw FormatError("voxel payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(count * 4),
                      r.offset());
  std::vector<double> data(count);
  for (auto& v : data)
    v = r.f32("voxel value");
  return VoxelGrid(bins, height, width, tb, te, std::move(data));
}

void write_voxel(const VoxelGrid& grid, const std::filesystem::path& path)
{
  io::write_file_atomic(path, encode_vox1(grid));
}

VoxelGrid read_voxel(const std::filesystem::path& path)
{
  return decode_vox1(io::read_file(path));
}

} // namespace evikit

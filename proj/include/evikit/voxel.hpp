#pragma once

#include <evikit/event_core.hpp>
#include <evikit/physical_model.hpp>

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace evikit {

/// (n + 2) temporal bins of polarity mass over an event window, bin-major then
/// row-major. Bin 0 is centred on t_begin and bin n + 1 on t_end.
class VoxelGrid {
public:
  VoxelGrid() = default;
  VoxelGrid(int bins, int height, int width, double t_begin, double t_end);
  VoxelGrid(int bins, int height, int width, double t_begin, double t_end, std::vector<double> data);

  int bins() const noexcept { return bins_; }
  int n_interp() const noexcept { return bins_ - 2; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  double t_begin() const noexcept { return t_begin_; }
  double t_end() const noexcept { return t_end_; }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height_) * width_; }

  double& at(int bin, int y, int x) { return data_[(static_cast<std::size_t>(bin) * height_ + y) * width_ + x]; }
  double at(int bin, int y, int x) const { return data_[(static_cast<std::size_t>(bin) * height_ + y) * width_ + x]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> channel(int bin) const { return {data_.data() + bin * plane_size(), plane_size()}; }

  double total() const;

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

private:
  int bins_ = 0;
  int height_ = 0;
  int width_ = 0;
  double t_begin_ = 0.0;
  double t_end_ = 0.0;
  std::vector<double> data_;
};

/// Bilinear temporal binning into n + 2 bins spanning the stream window.
VoxelGrid voxelize(const EventStream& stream, int n);

struct VoxelPair {
  VoxelGrid forward;
  VoxelGrid backward;
};

/// forward = voxelize(stream), backward = voxelize(reverse(stream)).
VoxelPair bidirectional_pair(const EventStream& stream, int n);

/// Channels (i - 1, i) as one contiguous 2 x H x W view; valid for 1 <= i <= n + 1.
/// The view borrows from `grid`.
std::span<const double> subvoxel(const VoxelGrid& grid, int i);

/// Voxel grid of the events inside one exposure, with `bins` channels.
VoxelGrid exposure_voxel(const EventStream& stream, const ExposedFrame& frame, int bins = 6);

// VOX1: magic, u16 bins, u16 H, u16 W, f64 t_begin, f64 t_end, f32 data.
std::vector<std::uint8_t> encode_vox1(const VoxelGrid& grid);
VoxelGrid decode_vox1(std::span<const std::uint8_t> bytes);
void write_voxel(const VoxelGrid& grid, const std::filesystem::path& path);
VoxelGrid read_voxel(const std::filesystem::path& path);

} // namespace evikit

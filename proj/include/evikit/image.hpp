#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace evikit {

/// Planar real-valued image, channels x height x width. Grayscale frames have
/// one channel, color frames three.
class Frame {
public:
  Frame() = default;
  Frame(int width, int height, int channels = 1, double fill = 0.0);
  Frame(int width, int height, int channels, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }
  double& at(int y, int x) { return data_[index(0, y, x)]; }
  double at(int y, int x) const { return data_[index(0, y, x)]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(int c) const { return {data_.data() + c * plane_size(), plane_size()}; }

  bool same_shape(const Frame& other) const noexcept
  {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  friend bool operator==(const Frame&, const Frame&) = default;

private:
  std::size_t index(int c, int y, int x) const noexcept
  {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Rec. 601 luma (0.299 R + 0.587 G + 0.114 B); grayscale frames pass through.
Frame luminance(const Frame& frame);

/// Reads binary P5 (gray) or P6 (color) netpbm, 8- or 16-bit, scaled to [0, 1].
Frame read_netpbm(const std::filesystem::path& path);

/// Writes P5/P6 at maxval 255, or 65535 when `deep` is set. Values are clamped
/// to [0, 1] and rounded.
void write_netpbm(const Frame& frame, const std::filesystem::path& path, bool deep = false);

/// Netpbm files (.pgm, .ppm, .pnm) in a directory, in lexicographic order.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

} // namespace evikit

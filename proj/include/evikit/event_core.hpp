#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace evikit {

/// One asynchronous brightness-change record. Polarity is +1 or -1.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  double t = 0.0;
  std::int8_t p = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

struct PixelCoord {
  int x = 0;
  int y = 0;
};

/// Immutable, time-sorted event sequence on a width x height sensor, bounded
/// by a closed window [t_begin, t_end]. Equal timestamps keep insertion order.
class EventStream {
public:
  EventStream() = default;

  /// Takes events that are already sorted; throws ValidationError otherwise.
  EventStream(int width, int height, double t_begin, double t_end, std::vector<Event> events);

  /// Stable-sorts `events` by timestamp before validating.
  static EventStream from_unsorted(int width, int height, double t_begin, double t_end,
                                   std::vector<Event> events);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double t_begin() const noexcept { return t_begin_; }
  double t_end() const noexcept { return t_end_; }
  std::span<const Event> events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  bool contains(PixelCoord px) const noexcept
  {
    return px.x >= 0 && px.y >= 0 && px.x < width_ && px.y < height_;
  }

  bool covers(double a, double b) const noexcept { return t_begin_ <= a && a <= b && b <= t_end_; }

  /// Walks the stream and throws ValidationError on the first violated invariant.
  void validate() const;

  friend bool operator==(const EventStream&, const EventStream&) = default;

private:
  int width_ = 0;
  int height_ = 0;
  double t_begin_ = 0.0;
  double t_end_ = 0.0;
  std::vector<Event> events_;
};

/// Events with a < t <= b; the returned window is [a, b].
EventStream slice(const EventStream& stream, double a, double b);

/// Mirrors every event in time about the window centre and flips its polarity.
EventStream reverse(const EventStream& stream);

/// Sum of polarities at one pixel over (a, b].
long polarity_sum(const EventStream& stream, PixelCoord pixel, double a, double b);

/// Per-pixel polarity sums over (a, b], row-major H*W.
std::vector<long> polarity_sums(const EventStream& stream, double a, double b);

long total_polarity(const EventStream& stream);

// EVT1 binary format.
std::vector<std::uint8_t> encode_evt1(const EventStream& stream);
EventStream decode_evt1(std::span<const std::uint8_t> bytes);
void write_events(const EventStream& stream, const std::filesystem::path& path);
EventStream read_events(const std::filesystem::path& path);

// CSV alternative ("x,y,t,p" header). Window and sensor size are not stored,
// so the reader takes them explicitly.
void write_events_csv(const EventStream& stream, const std::filesystem::path& path);
EventStream read_events_csv(const std::filesystem::path& path, int width, int height, double t_begin,
                            double t_end);

} // namespace evikit

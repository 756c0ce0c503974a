#include <evikit/event_core.hpp>

#include <evikit/binary_io.hpp>
#include <evikit/errors.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace evikit {

namespace {

constexpr std::string_view kEvt1Magic = "EVT1";
constexpr std::size_t kEvt1HeaderSize = 4 + 2 + 2 + 8 + 8 + 8;
constexpr std::size_t kEvt1RecordSize = 2 + 2 + 8 + 1 + 3;

std::string describe(const Event& e)
{
  std::ostringstream os;
  os << "(" << e.x << ", " << e.y << ", " << e.t << ", " << int(e.p) << ")";
  return os.str();
}

void check_window(int width, int height, double t_begin, double t_end)
{
  if (width < 0 || height < 0 || width > 65535 || height > 65535)
    throw ValidationError("sensor size must be within [0, 65535], got " + std::to_string(width) + "x" +
                          std::to_string(height));
  if (!std::isfinite(t_begin) || !std::isfinite(t_end) || t_begin > t_end)
    throw ValidationError("invalid stream window [" + std::to_string(t_begin) + ", " + std::to_string(t_end) + "]");
}

} // namespace

EventStream::EventStream(int width, int height, double t_begin, double t_end, std::vector<Event> events)
    : width_(width), height_(height), t_begin_(t_begin), t_end_(t_end), events_(std::move(events))
{
  check_window(width, height, t_begin, t_end);
  validate();
}

EventStream EventStream::from_unsorted(int width, int height, double t_begin, double t_end,
                                       std::vector<Event> events)
{
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return EventStream(width, height, t_begin, t_end, std::move(events));
}

void EventStream::validate() const
{
  double prev = t_begin_;
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const Event& e = events_[i];
    if (e.p != 1 && e.p != -1)
      throw ValidationError("event " + std::to_string(i) + " " + describe(e) + " has polarity other than +1/-1");
    if (e.x >= width_ || e.y >= height_)
      throw ValidationError("event " + std::to_string(i) + " " + describe(e) + " lies outside the " +
                            std::to_string(width_) + "x" + std::to_string(height_) + " sensor");
    if (!std::isfinite(e.t) || e.t < t_begin_ || e.t > t_end_)
      throw ValidationError("event " + std::to_string(i) + " " + describe(e) + " lies outside the window");
    if (e.t < prev)
      throw ValidationError("event " + std::to_string(i) + " " + describe(e) + " breaks time ordering");
    prev = e.t;
  }
}

EventStream slice(const EventStream& stream, double a, double b)
{
  if (!(a <= b) || !stream.covers(a, b))
    throw RangeError("slice (" + std::to_string(a) + ", " + std::to_string(b) + "] is outside the stream window [" +
                     std::to_string(stream.t_begin()) + ", " + std::to_string(stream.t_end()) + "]");
  auto events = stream.events();
  auto by_time = [](double t, const Event& e) { return t < e.t; };
  auto first = std::upper_bound(events.begin(), events.end(), a, by_time);
  auto last = std::upper_bound(first, events.end(), b, by_time);
  return EventStream(stream.width(), stream.height(), a, b, std::vector<Event>(first, last));
}

EventStream reverse(const EventStream& stream)
{
  const double tb = stream.t_begin();
  const double te = stream.t_end();
  const double span_sum = tb + te;
  std::vector<Event> out;
  out.reserve(stream.size());
  for (const Event& e : stream.events()) {
    Event r = e;
    r.t = std::clamp(span_sum - e.t, tb, te);
    r.p = static_cast<std::int8_t>(-e.p);
    out.push_back(r);
  }
  // Mirrored times come out descending; restore ascending order while keeping
  // the original relative order of equal timestamps.
  std::stable_sort(out.begin(), out.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return EventStream(stream.width(), stream.height(), tb, te, std::move(out));
}

long polarity_sum(const EventStream& stream, PixelCoord pixel, double a, double b)
{
  if (!stream.contains(pixel))
    throw RangeError("pixel (" + std::to_string(pixel.x) + ", " + std::to_string(pixel.y) + ") is outside the " +
                     std::to_string(stream.width()) + "x" + std::to_string(stream.height()) + " sensor");
  if (!(a <= b) || !stream.covers(a, b))
    throw RangeError("interval (" + std::to_string(a) + ", " + std::to_string(b) + "] is outside the stream window");
  auto events = stream.events();
  auto by_time = [](double t, const Event& e) { return t < e.t; };
  auto first = std::upper_bound(events.begin(), events.end(), a, by_time);
  auto last = std::upper_bound(first, events.end(), b, by_time);
  long sum = 0;
  for (auto it = first; it != last; ++it)
    if (it->x == pixel.x && it->y == pixel.y)
      sum += it->p;
  return sum;
}

std::vector<long> polarity_sums(const EventStream& stream, double a, double b)
{
  if (!(a <= b) || !stream.covers(a, b))
    throw RangeError("interval (" + std::to_string(a) + ", " + std::to_string(b) + "] is outside the stream window");
  std::vector<long> sums(static_cast<std::size_t>(stream.width()) * stream.height(), 0);
  auto events = stream.events();
  auto by_time = [](double t, const Event& e) { return t < e.t; };
  auto first = std::upper_bound(events.begin(), events.end(), a, by_time);
  auto last = std::upper_bound(first, events.end(), b, by_time);
  for (auto it = first; it != last; ++it)
    sums[static_cast<std::size_t>(it->y) * stream.width() + it->x] += it->p;
  return sums;
}

long total_polarity(const EventStream& stream)
{
  long sum = 0;
  for (const Event& e : stream.events())
    sum += e.p;
  return sum;
}

std::vector<std::uint8_t> encode_evt1(const EventStream& stream)
{
  io::ByteWriter w;
  w.bytes(kEvt1Magic);
  w.u16(static_cast<std::uint16_t>(stream.width()));
  w.u16(static_cast<std::uint16_t>(stream.height()));
  w.f64(stream.t_begin());
  w.f64(stream.t_end());
  w.u64(stream.size());
  for (const Event& e : stream.events()) {
    w.u16(e.x);
    w.u16(e.y);
    w.f64(e.t);
    w.i8(e.p);
    w.u8(0);
    w.u8(0);
    w.u8(0);
  }
  return w.buffer();
}

EventStream decode_evt1(std::span<const std::uint8_t> bytes)
{
  io::ByteReader r(bytes);
  if (r.bytes(std::min<std::size_t>(4, bytes.size()), "magic") != kEvt1Magic)
    throw FormatError("bad magic, expected \"EVT1\"", 0);
  const int width = r.u16("width");
  const int height = r.u16("height");
  const std::uint64_t window_offset = r.offset();
  const double t_begin = r.f64("t_begin");
  const double t_end = r.f64("t_end");
  if (!std::isfinite(t_begin) || !std::isfinite(t_end) || t_begin > t_end)
    throw FormatError("invalid window", window_offset);
  const std::uint64_t count_offset = r.offset();
  const std::uint64_t count = r.u64("event count");
  if (count > r.remaining() / kEvt1RecordSize)
    throw FormatError("event count " + std::to_string(count) + " exceeds file size", count_offset);

  std::vector<Event> events;
  events.reserve(count);
  double prev = t_begin;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t rec = r.offset();
    Event e;
    e.x = r.u16("event x");
    e.y = r.u16("event y");
    e.t = r.f64("event t");
    e.p = r.i8("event polarity");
    for (int k = 0; k < 3; ++k)
      if (r.u8("padding") != 0)
        throw FormatError("nonzero padding in event record " + std::to_string(i), rec + 13 + k);
    if (e.x >= width || e.y >= height)
      throw FormatError("event " + std::to_string(i) + " coordinates out of bounds", rec);
    if (e.p != 1 && e.p != -1)
      throw FormatError("event " + std::to_string(i) + " has invalid polarity " + std::to_string(int(e.p)), rec + 12);
    if (!std::isfinite(e.t) || e.t < prev || e.t > t_end)
      throw FormatError("event " + std::to_string(i) + " timestamp out of order or outside window", rec + 4);
    prev = e.t;
    events.push_back(e);
  }
  if (!r.at_end())
    throw FormatError("trailing bytes after last record", r.offset());
  return EventStream(width, height, t_begin, t_end, std::move(events));
}

void write_events(const EventStream& stream, const std::filesystem::path& path)
{
  io::write_file_atomic(path, encode_evt1(stream));
}

EventStream read_events(const std::filesystem::path& path)
{
  return decode_evt1(io::read_file(path));
}

void write_events_csv(const EventStream& stream, const std::filesystem::path& path)
{
  std::ostringstream os;
  os.precision(17);
  os << "x,y,t,p\n";
  for (const Event& e : stream.events())
    os << e.x << ',' << e.y << ',' << e.t << ',' << int(e.p) << '\n';
  io::write_file_atomic(path, os.str());
}

EventStream read_events_csv(const std::filesystem::path& path, int width, int height, double t_begin, double t_end)
{
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path.string() + "' for reading");
  std::string line;
  std::uint64_t offset = 0;
  if (!std::getline(in, line) || line != "x,y,t,p")
    throw FormatError("missing \"x,y,t,p\" header", 0);
  offset += line.size() + 1;
  std::vector<Event> events;
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    std::istringstream ls(line);
    long x = 0, y = 0, p = 0;
    double t = 0.0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ls >> x >> c1 >> y >> c2 >> t >> c3 >> p) || c1 != ',' || c2 != ',' || c3 != ',')
      throw FormatError("malformed event line '" + line + "'", offset);
    if (x < 0 || y < 0 || x >= width || y >= height)
      throw FormatError("event coordinates out of bounds", offset);
    if (p != 1 && p != -1)
      throw FormatError("invalid polarity", offset);
    events.push_back({static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), t, static_cast<std::int8_t>(p)});
    offset += line.size() + 1;
  }
  return EventStream::from_unsorted(width, height, t_begin, t_end, std::move(events));
}

} // namespace evikit

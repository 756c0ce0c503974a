#include <evikit/simulator.hpp>

#include <evikit/errors.hpp>
#include <evikit/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace evikit {

namespace {

enum class RngStream : std::uint64_t { threshold = 1, noise = 2, hot_pixel = 3 };

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Each (seed, pixel, purpose) triple gets its own engine, so results do not
// depend on how pixels are distributed over workers.
std::mt19937_64 pixel_engine(std::uint64_t seed, std::size_t pixel, RngStream stream)
{
  const std::uint64_t key = splitmix64(splitmix64(seed) ^ splitmix64(pixel * 4 + static_cast<std::uint64_t>(stream)));
  return std::mt19937_64(key);
}

struct TaggedEvent {
  Event event;
  std::uint32_t pixel;
};

} // namespace

void SimConfig::validate() const
{
  if (!(c_mean > 0.0))
    throw ValidationError("simulate.c_mean must be > 0");
  if (!(c_std >= 0.0))
    throw ValidationError("simulate.c_std must be >= 0");
  if (!(log_eps > 0.0))
    throw ValidationError("simulate.log_eps must be > 0");
  if (!(noise_rate >= 0.0) || !std::isfinite(noise_rate))
    throw ValidationError("simulate.noise_rate must be >= 0");
  if (!(hot_pixel_fraction >= 0.0 && hot_pixel_fraction < 1.0))
    throw ValidationError("simulate.hot_pixel_fraction must be in [0, 1)");
  if (!(hot_pixel_rate > 0.0) || !std::isfinite(hot_pixel_rate))
    throw ValidationError("simulate.hot_pixel_rate must be > 0");
}

FrameSequence FrameSequence::uniform(std::vector<Frame> frames, double fps, double t0)
{
  if (!(fps > 0.0) || !std::isfinite(fps))
    throw ValidationError("fps must be positive");
  FrameSequence seq;
  seq.timestamps.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k)
    seq.timestamps.push_back(t0 + static_cast<double>(k) / fps);
  seq.frames = std::move(frames);
  return seq;
}

void FrameSequence::validate() const
{
  if (frames.size() != timestamps.size())
    throw ValidationError("frame sequence has " + std::to_string(frames.size()) + " frames but " +
                          std::to_string(timestamps.size()) + " timestamps");
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (!frames[k].same_shape(frames.front()))
      throw ValidationError("frame " + std::to_string(k) + " is " + std::to_string(frames[k].width()) + "x" +
                            std::to_string(frames[k].height()) + ", expected " + std::to_string(frames[0].width()) +
                            "x" + std::to_string(frames[0].height()));
    if (!std::isfinite(timestamps[k]) || (k > 0 && !(timestamps[k] > timestamps[k - 1])))
      throw ValidationError("timestamps must be finite and strictly increasing (index " + std::to_string(k) + ")");
    for (double v : frames[k].data())
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw ValidationError("frame " + std::to_string(k) + " has a value outside [0, 1]");
  }
}

std::vector<double> pixel_thresholds(const SimConfig& cfg, int width, int height)
{
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<double> c(n, cfg.c_mean);
  if (cfg.c_mode == ThresholdMode::gaussian_per_pixel && cfg.c_std > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      auto rng = pixel_engine(cfg.seed, i, RngStream::threshold);
      std::normal_distribution<double> dist(cfg.c_mean, cfg.c_std);
      c[i] = std::max(kMinContrastThreshold, dist(rng));
    }
  }
  return c;
}

EventStream simulate(const FrameSequence& seq, const SimConfig& cfg)
{
  cfg.validate();
  if (seq.size() < 2)
    throw ValidationError("simulate needs at least 2 frames, got " + std::to_string(seq.size()));
  seq.validate();

  const int width = seq.frames.front().width();
  const int height = seq.frames.front().height();
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  const double t_begin = seq.timestamps.front();
  const double t_end = seq.timestamps.back();

  // Log intensity, frame-major.
  std::vector<std::vector<double>> log_frames;
  log_frames.reserve(seq.size());
  for (const Frame& f : seq.frames) {
    const Frame lum = luminance(f);
    std::vector<double> l(pixels);
    for (std::size_t i = 0; i < pixels; ++i)
      l[i] = std::log(lum.data()[i] + cfg.log_eps);
    log_frames.push_back(std::move(l));
  }
  const std::vector<double> thresholds = pixel_thresholds(cfg, width, height);

  std::vector<std::vector<TaggedEvent>> per_pixel(pixels);
  parallel_for(pixels, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& out = per_pixel[i];
      const Event proto{static_cast<std::uint16_t>(i % width), static_cast<std::uint16_t>(i / width), 0.0, 1};
      const double c = thresholds[i];
      double ref = log_frames[0][i];
      for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
        const double la = log_frames[k][i];
        const double lb = log_frames[k + 1][i];
        const double ta = seq.timestamps[k];
        const double tb = seq.timestamps[k + 1];
        for (;;) {
          double level;
          std::int8_t pol;
          if (lb - ref >= c - kCrossingTolerance) {
            level = ref + c;
            pol = 1;
          } else if (ref - lb >= c - kCrossingTolerance) {
            level = ref - c;
            pol = -1;
          } else {
            break;
          }
          const double frac = lb != la ? std::clamp((level - la) / (lb - la), 0.0, 1.0) : 1.0;
          Event e = proto;
          e.t = std::min(tb, ta + frac * (tb - ta));
          e.p = pol;
          out.push_back({e, static_cast<std::uint32_t>(i)});
          ref = level;
        }
      }

      if (cfg.noise_rate > 0.0) {
        auto rng = pixel_engine(cfg.seed, i, RngStream::noise);
        std::poisson_distribution<long> count_dist(cfg.noise_rate * (t_end - t_begin));
        std::uniform_real_distribution<double> time_dist(t_begin, t_end);
        std::bernoulli_distribution sign_dist(0.5);
        const long count = count_dist(rng);
        for (long n = 0; n < count; ++n) {
          Event e = proto;
          e.t = time_dist(rng);
          e.p = sign_dist(rng) ? 1 : -1;
          out.push_back({e, static_cast<std::uint32_t>(i)});
        }
      }

      if (cfg.hot_pixel_fraction > 0.0) {
        auto rng = pixel_engine(cfg.seed, i, RngStream::hot_pixel);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        if (unit(rng) < cfg.hot_pixel_fraction) {
          const double period = 1.0 / cfg.hot_pixel_rate;
          const double phase = unit(rng) * period;
          const std::int8_t pol = unit(rng) < 0.5 ? 1 : -1;
          for (double t = t_begin + phase; t <= t_end; t += period) {
            Event e = proto;
            e.t = t;
            e.p = pol;
            out.push_back({e, static_cast<std::uint32_t>(i)});
          }
        }
      }
    }
  });

  std::vector<TaggedEvent> all;
  std::size_t total = 0;
  for (const auto& v : per_pixel)
    total += v.size();
  all.reserve(total);
  for (auto& v : per_pixel)
    all.insert(all.end(), v.begin(), v.end());
  // Timestamp first, then pixel index; stable keeps per-pixel emission order.
  std::stable_sort(all.begin(), all.end(), [](const TaggedEvent& a, const TaggedEvent& b) {
    if (a.event.t != b.event.t)
      return a.event.t < b.event.t;
    return a.pixel < b.pixel;
  });
  std::vector<Event> events;
  events.reserve(all.size());
  for (const auto& te : all)
    events.push_back(te.event);
  return EventStream(width, height, t_begin, t_end, std::move(events));
}

double estimate_threshold(const FrameSequence& seq, const EventStream& stream, double log_eps)
{
  seq.validate();
  if (seq.size() < 2)
    throw ValidationError("threshold estimation needs at least 2 frames");
  if (seq.frames.front().width() != stream.width() || seq.frames.front().height() != stream.height())
    throw ValidationError("frame size does not match the event sensor size");
  if (stream.empty())
    throw EstimationError("cannot estimate a contrast threshold from an empty event stream");

  const std::size_t pixels = static_cast<std::size_t>(stream.width()) * stream.height();
  double num = 0.0;
  double den = 0.0;
  // pairs (0, k)
  const Frame first = luminance(seq.frames.front());
  for (std::size_t k = 1; k < seq.size(); ++k) {
    const Frame next = luminance(seq.frames[k]);
    const double a = std::max(seq.timestamps.front(), stream.t_begin());
    const double b = std::min(seq.timestamps[k], stream.t_end());
    if (a < b) {
      const auto sums = polarity_sums(stream, a, b);
      for (std::size_t i = 0; i < pixels; ++i) {
        if (sums[i] == 0)
          continue;
        const double dl = std::log(next.data()[i] + log_eps) - std::log(first.data()[i] + log_eps);
        num += dl * static_cast<double>(sums[i]);
        den += static_cast<double>(sums[i]) * static_cast<double>(sums[i]);
      }
    }
  }
  if (den == 0.0)
    throw EstimationError("no frame interval carries a nonzero polarity sum");
  const double c = num / den;
  if (!(c > 0.0))
    throw EstimationError("least-squares threshold is not positive (" + std::to_string(c) + ")");
  return c;
}

} // namespace evikit

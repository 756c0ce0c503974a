#include <evikit/physical_model.hpp>

#include <evikit/errors.hpp>
#include <evikit/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace evikit {

namespace {

void check_sensor(const Frame& image, const EventStream& stream)
{
  if (image.width() != stream.width() || image.height() != stream.height())
    throw ValidationError("frame is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                          " but the event sensor is " + std::to_string(stream.width()) + "x" +
                          std::to_string(stream.height()));
}

void check_threshold(double c)
{
  if (!(c > 0.0) || !std::isfinite(c))
    throw ValidationError("contrast threshold must be positive, got " + std::to_string(c));
}

// Event times and polarities grouped by pixel, each group in time order.
struct PixelBuckets {
  std::vector<std::size_t> offsets;
  std::vector<double> times;
  std::vector<std::int8_t> polarities;
};

PixelBuckets bucket_by_pixel(const EventStream& stream)
{
  const std::size_t pixels = static_cast<std::size_t>(stream.width()) * stream.height();
  PixelBuckets b;
  b.offsets.assign(pixels + 1, 0);
  for (const Event& e : stream.events())
    ++b.offsets[static_cast<std::size_t>(e.y) * stream.width() + e.x + 1];
  for (std::size_t i = 0; i < pixels; ++i)
    b.offsets[i + 1] += b.offsets[i];
  b.times.resize(stream.size());
  b.polarities.resize(stream.size());
  std::vector<std::size_t> cursor(b.offsets.begin(), b.offsets.end() - 1);
  for (const Event& e : stream.events()) {
    const std::size_t k = cursor[static_cast<std::size_t>(e.y) * stream.width() + e.x]++;
    b.times[k] = e.t;
    b.polarities[k] = e.p;
  }
  return b;
}

} // namespace

void ExposedFrame::validate() const
{
  if (!std::isfinite(t_s) || !std::isfinite(t_e) || !(t_s < t_e))
    throw ValidationError("exposure interval [" + std::to_string(t_s) + ", " + std::to_string(t_e) +
                          "] must have positive length");
  for (double v : image.data())
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError("exposed frame values must be finite and non-negative");
}

Frame interpolate_latent(const Frame& reference, const EventStream& stream, double t_ref, double tau, double c)
{
  check_threshold(c);
  check_sensor(reference, stream);
  if (tau == t_ref) {
    if (!stream.covers(t_ref, t_ref))
      throw RangeError("reference time lies outside the event window");
    return reference;
  }
  const double lo = std::min(t_ref, tau);
  const double hi = std::max(t_ref, tau);
  if (!stream.covers(lo, hi))
    throw RangeError("event window [" + std::to_string(stream.t_begin()) + ", " + std::to_string(stream.t_end()) +
                     "] does not cover [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  const double sign = tau > t_ref ? 1.0 : -1.0;
  const auto sums = polarity_sums(stream, lo, hi);

  Frame out = reference;
  const std::size_t plane = out.plane_size();
  for (int ch = 0; ch < out.channels(); ++ch) {
    auto data = out.plane(ch);
    for (std::size_t i = 0; i < plane; ++i) {
      if (sums[i] != 0)
        data[i] = std::max(0.0, data[i] * std::exp(c * sign * static_cast<double>(sums[i])));
      else
        data[i] = std::max(0.0, data[i]);
    }
  }
  return out;
}

Frame edi_deblur(const ExposedFrame& frame, const EventStream& stream, double c, std::optional<double> t_target)
{
  frame.validate();
  check_threshold(c);
  check_sensor(frame.image, stream);
  const double ts = frame.t_s;
  const double te = frame.t_e;
  const double target = t_target.value_or(frame.midpoint());
  if (!(target >= ts && target <= te))
    throw RangeError("deblur target " + std::to_string(target) + " lies outside the exposure");
  if (!stream.covers(ts, te))
    throw RangeError("event window does not cover the exposure [" + std::to_string(ts) + ", " + std::to_string(te) +
                     "]");

  const PixelBuckets buckets = bucket_by_pixel(slice(stream, ts, te));
  const std::size_t pixels = frame.image.plane_size();
  const double duration = te - ts;
  std::vector<double> gain(pixels, 1.0);

  parallel_for(pixels, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t first = buckets.offsets[i];
      const std::size_t last = buckets.offsets[i + 1];
      if (first == last)
        continue;
      // S(t) = S(t_s) + (polarity of events up to t); S(t_target) = 0.
      long level = 0;
      for (std::size_t k = first; k < last && buckets.times[k] <= target; ++k)
        level -= buckets.polarities[k];
      double denom = 0.0;
      double seg_start = ts;
      for (std::size_t k = first; k < last; ++k) {
        denom += (buckets.times[k] - seg_start) * std::exp(c * static_cast<double>(level));
        seg_start = buckets.times[k];
        level += buckets.polarities[k];
      }
      denom += (te - seg_start) * std::exp(c * static_cast<double>(level));
      gain[i] = duration / denom;
    }
  });

  Frame out = frame.image;
  for (int ch = 0; ch < out.channels(); ++ch) {
    auto data = out.plane(ch);
    for (std::size_t i = 0; i < pixels; ++i)
      data[i] *= gain[i];
  }
  return out;
}

FusionWeights fusion_weights(double mid_left, double mid_right, double tau)
{
  if (!(mid_left < mid_right))
    throw ValidationError("left exposure midpoint must precede the right one");
  const double w_left = std::clamp((mid_right - tau) / (mid_right - mid_left), 0.0, 1.0);
  return {w_left, 1.0 - w_left};
}

Frame blurry_interpolate(const ExposedFrame& left, const ExposedFrame& right, const EventStream& stream, double c,
                         double tau)
{
  left.validate();
  right.validate();
  if (!left.image.same_shape(right.image))
    throw ValidationError("left and right frames differ in shape");
  if (!(tau >= left.t_s && tau <= right.t_e))
    throw RangeError("tau " + std::to_string(tau) + " lies outside [" + std::to_string(left.t_s) + ", " +
                     std::to_string(right.t_e) + "]");

  const double mid_l = left.midpoint();
  const double mid_r = right.midpoint();
  const FusionWeights w = fusion_weights(mid_l, mid_r, tau);

  const Frame from_left = interpolate_latent(edi_deblur(left, stream, c), stream, mid_l, tau, c);
  const Frame from_right = interpolate_latent(edi_deblur(right, stream, c), stream, mid_r, tau, c);

  Frame out(left.image.width(), left.image.height(), left.image.channels());
  auto o = out.data();
  auto a = from_left.data();
  auto b = from_right.data();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = w.left * a[i] + w.right * b[i];
  return out;
}

} // namespace evikit

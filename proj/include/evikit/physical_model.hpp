#pragma once

#include <evikit/event_core.hpp>
#include <evikit/image.hpp>

#include <optional>

namespace evikit {

/// A frame integrated over [t_s, t_e]. When blurry, `image` is the mean of
/// the latent intensities over the exposure.
struct ExposedFrame {
  Frame image;
  double t_s = 0.0;
  double t_e = 0.0;

  double duration() const noexcept { return t_e - t_s; }
  double midpoint() const noexcept { return 0.5 * (t_s + t_e); }
  void validate() const;
};

/// Latent frame at `tau` from a sharp reference at `t_ref`: each pixel scales
/// by exp(c * S), S the signed polarity sum between t_ref and tau. Negative
/// results clamp to zero; no renormalization.
Frame interpolate_latent(const Frame& reference, const EventStream& stream, double t_ref, double tau, double c);

/// Event double integral restoration of the latent frame at `t_target`
/// (default: exposure midpoint). The denominator integral is evaluated exactly
/// as a sum over the piecewise-constant segments between events.
Frame edi_deblur(const ExposedFrame& frame, const EventStream& stream, double c,
                 std::optional<double> t_target = std::nullopt);

struct FusionWeights {
  double left = 0.0;
  double right = 0.0;
};

/// Time-linear weights between the exposure midpoints, clamped to [0, 1].
FusionWeights fusion_weights(double mid_left, double mid_right, double tau);

/// Deblurs both key frames at their midpoints, propagates each to `tau`, and
/// blends the two estimates with fusion_weights().
Frame blurry_interpolate(const ExposedFrame& left, const ExposedFrame& right, const EventStream& stream, double c,
                         double tau);

} // namespace evikit

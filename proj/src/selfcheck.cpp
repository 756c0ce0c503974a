#include <evikit/selfcheck.hpp>

#include <evikit/event_core.hpp>
#include <evikit/nn.hpp>
#include <evikit/physical_model.hpp>
#include <evikit/quality.hpp>
#include <evikit/simulator.hpp>
#include <evikit/voxel.hpp>

#include <cmath>
#include <functional>
#include <sstream>

namespace evikit {

namespace {

std::string fmt(double v)
{
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

SelfcheckResult check_near(std::string name, double got, double want, double tol)
{
  const bool ok = std::abs(got - want) <= tol;
  return {std::move(name), ok, "got " + fmt(got) + ", want " + fmt(want) + " +/- " + fmt(tol)};
}

Frame ramp(int w, int h)
{
  Frame f(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      f.at(y, x) = (x + 2.0 * y) / (w + 2.0 * h);
  return f;
}

} // namespace

std::vector<SelfcheckResult> run_selfcheck()
{
  std::vector<SelfcheckResult> out;
  auto guarded = [&](const std::string& name, const std::function<SelfcheckResult()>& fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("threw: ") + e.what()});
    }
  };

  guarded("psnr peak 255 mse 1", [] {
    Frame a(4, 4, 1, 10.0), b(4, 4, 1, 11.0);
    return check_near("psnr peak 255 mse 1", psnr(a, b, 255.0), 48.1308, 1e-3);
  });
  guarded("psnr identical cap", [] {
    Frame a = ramp(8, 8);
    return check_near("psnr identical cap", psnr(a, a), kPsnrCap, 0.0);
  });
  guarded("ssim identical", [] {
    Frame a = ramp(16, 16);
    return check_near("ssim identical", ssim(a, a), 1.0, 1e-9);
  });
  guarded("charbonnier identical", [] {
    nn::Tensor t({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    return check_near("charbonnier identical", charbonnier(t, t).item(), 1e-6, 0.0);
  });
  guarded("charbonnier |d| = 3", [] {
    nn::Tensor a({1}, {3.0}), b({1}, {0.0});
    return check_near("charbonnier |d| = 3", charbonnier(a, b).item(), 3.0, 1e-12);
  });
  guarded("slice is open on the left", [] {
    EventStream s(4, 4, 0.0, 1.0, {{0, 0, 0.1, 1}, {0, 0, 0.2, 1}, {0, 0, 0.3, 1}});
    const auto sl = slice(s, 0.1, 0.3);
    const bool ok = sl.size() == 2 && sl.events()[0].t == 0.2 && sl.events()[1].t == 0.3;
    return SelfcheckResult{"slice is open on the left", ok, "kept " + std::to_string(sl.size()) + " events"};
  });
  guarded("reverse single event", [] {
    EventStream s(8, 8, 0.0, 1.0, {{3, 4, 0.2, 1}});
    const Event e = reverse(s).events()[0];
    const bool ok = e.x == 3 && e.y == 4 && std::abs(e.t - 0.8) < 1e-15 && e.p == -1;
    return SelfcheckResult{"reverse single event", ok, "t = " + fmt(e.t) + ", p = " + std::to_string(int(e.p))};
  });
  guarded("polarity sum", [] {
    EventStream s(2, 2, 0.0, 1.0, {{1, 1, 0.1, 1}, {1, 1, 0.2, 1}, {1, 1, 0.3, -1}});
    const long v = polarity_sum(s, {1, 1}, 0.0, 1.0);
    return SelfcheckResult{"polarity sum", v == 1, "got " + std::to_string(v)};
  });
  guarded("latent gain e^0.2", [] {
    EventStream s(1, 1, 0.0, 1.0, {{0, 0, 0.5, 1}});
    Frame ref(1, 1, 1, 0.5);
    const double g = interpolate_latent(ref, s, 0.0, 1.0, 0.2).at(0, 0) / 0.5;
    return check_near("latent gain e^0.2", g, 1.221402758, 1e-9);
  });
  guarded("deblur without events is identity", [] {
    Frame b = ramp(6, 5);
    EventStream s(6, 5, 0.0, 1.0, {});
    const bool ok = edi_deblur({b, 0.0, 1.0}, s, 0.2) == b;
    return SelfcheckResult{"deblur without events is identity", ok, ""};
  });
  guarded("voxel bin centre", [] {
    EventStream s(1, 1, 0.0, 1.0, {{0, 0, 0.5, 1}});
    const auto g = voxelize(s, 1);
    const bool ok = g.at(0, 0, 0) == 0.0 && g.at(1, 0, 0) == 1.0 && g.at(2, 0, 0) == 0.0;
    return SelfcheckResult{"voxel bin centre", ok, ""};
  });
  guarded("voxel midway split", [] {
    EventStream s(1, 1, 0.0, 1.0, {{0, 0, 0.25, 1}});
    const auto g = voxelize(s, 1);
    const bool ok = g.at(0, 0, 0) == 0.5 && g.at(1, 0, 0) == 0.5;
    return SelfcheckResult{"voxel midway split", ok, ""};
  });
  guarded("static scene emits nothing", [] {
    FrameSequence seq = FrameSequence::uniform({ramp(4, 4), ramp(4, 4), ramp(4, 4)}, 10.0);
    SimConfig cfg;
    const auto s = simulate(seq, cfg);
    return SelfcheckResult{"static scene emits nothing", s.empty(), std::to_string(s.size()) + " events"};
  });
  guarded("channel squeeze at zero", [] {
    std::mt19937_64 rng(7);
    nn::ChannelSqueeze cs(8, 4, rng);
    const auto w = cs(nn::Tensor::zeros({8, 3, 3}));
    bool ok = true;
    for (double v : w.data())
      ok = ok && v == 0.5;
    return SelfcheckResult{"channel squeeze at zero", ok, ""};
  });
  return out;
}

} // namespace evikit

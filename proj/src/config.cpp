#include <evikit/config.hpp>

#include <evikit/binary_io.hpp>
#include <evikit/errors.hpp>

#include <cmath>
#include <limits>
#include <set>

namespace evikit {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& known)
{
  if (!obj.is_object())
    throw ValidationError("config " + path + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      throw ValidationError("unknown config key " + path + "/" + it.key());
}

double get_number(const json& obj, const std::string& path, const char* key, double fallback, double lo, double hi,
                  bool lo_open = false)
{
  if (!obj.contains(key))
    return fallback;
  const auto& v = obj.at(key);
  const std::string where = path + "/" + key;
  if (!v.is_number())
    throw ValidationError("config " + where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d) || d < lo || d > hi || (lo_open && d == lo))
    throw ValidationError("config " + where + " = " + std::to_string(d) + " is out of range");
  return d;
}

long long get_int(const json& obj, const std::string& path, const char* key, long long fallback, long long lo,
                  long long hi)
{
  if (!obj.contains(key))
    return fallback;
  const auto& v = obj.at(key);
  const std::string where = path + "/" + key;
  if (!v.is_number_integer())
    throw ValidationError("config " + where + " must be an integer");
  const long long i = v.get<long long>();
  if (i < lo || i > hi)
    throw ValidationError("config " + where + " = " + std::to_string(i) + " is out of range [" + std::to_string(lo) +
                          ", " + std::to_string(hi) + "]");
  return i;
}

std::uint64_t get_seed(const json& obj, const std::string& path, std::uint64_t fallback)
{
  if (!obj.contains("seed"))
    return fallback;
  const auto& v = obj.at("seed");
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
    throw ValidationError("config " + path + "/seed must be a non-negative integer");
  return v.get<std::uint64_t>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback)
{
  if (!obj.contains(key))
    return fallback;
  if (!obj.at(key).is_boolean())
    throw ValidationError("config " + path + "/" + key + " must be a boolean");
  return obj.at(key).get<bool>();
}

constexpr double kInf = std::numeric_limits<double>::infinity();

SimConfig parse_simulate(const json& s, const std::string& path)
{
  reject_unknown(s, path,
                 {"c_mean", "c_std", "c_mode", "log_eps", "seed", "noise_rate", "hot_pixel_fraction", "hot_pixel_rate"});
  SimConfig c;
  c.c_mean = get_number(s, path, "c_mean", c.c_mean, 0.0, kInf, true);
  c.c_std = get_number(s, path, "c_std", c.c_std, 0.0, kInf);
  c.log_eps = get_number(s, path, "log_eps", c.log_eps, 0.0, kInf, true);
  c.seed = get_seed(s, path, c.seed);
  c.noise_rate = get_number(s, path, "noise_rate", c.noise_rate, 0.0, 1e9);
  c.hot_pixel_fraction = get_number(s, path, "hot_pixel_fraction", c.hot_pixel_fraction, 0.0, 1.0);
  if (c.hot_pixel_fraction >= 1.0)
    throw ValidationError("config " + path + "/hot_pixel_fraction must be < 1");
  c.hot_pixel_rate = get_number(s, path, "hot_pixel_rate", c.hot_pixel_rate, 0.0, 1e9, true);
  if (s.contains("c_mode")) {
    const auto& m = s.at("c_mode");
    if (m == "fixed")
      c.c_mode = ThresholdMode::fixed;
    else if (m == "gaussian-per-pixel")
      c.c_mode = ThresholdMode::gaussian_per_pixel;
    else
      throw ValidationError("config " + path + "/c_mode must be \"fixed\" or \"gaussian-per-pixel\"");
  }
  return c;
}

} // namespace

RefidConfig refid_config_from_json(const json& m, const std::string& path)
{
  reject_unknown(m, path,
                 {"scales", "base_channels", "n_interp", "residual_blocks_per_evr", "exposure_voxel_bins",
                  "image_channels", "image_residual_blocks", "squeeze_reduction", "shared_squeeze", "bidirectional",
                  "seed", "steps", "lr"});
  RefidConfig c;
  c.scales = int(get_int(m, path, "scales", c.scales, 1, 8));
  c.base_channels = int(get_int(m, path, "base_channels", c.base_channels, 1, 256));
  c.n_interp = int(get_int(m, path, "n_interp", c.n_interp, 0, 64));
  c.residual_blocks_per_evr = int(get_int(m, path, "residual_blocks_per_evr", c.residual_blocks_per_evr, 0, 16));
  c.exposure_voxel_bins = int(get_int(m, path, "exposure_voxel_bins", c.exposure_voxel_bins, 2, 64));
  c.image_channels = int(get_int(m, path, "image_channels", c.image_channels, 1, 3));
  c.image_residual_blocks = int(get_int(m, path, "image_residual_blocks", c.image_residual_blocks, 0, 16));
  c.squeeze_reduction = int(get_int(m, path, "squeeze_reduction", c.squeeze_reduction, 1, 256));
  c.shared_squeeze = get_bool(m, path, "shared_squeeze", c.shared_squeeze);
  c.bidirectional = get_bool(m, path, "bidirectional", c.bidirectional);
  c.seed = get_seed(m, path, c.seed);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  return c;
}

PipelineConfig parse_pipeline_config(const json& doc)
{
  reject_unknown(doc, "", {"simulate", "blur", "physical", "voxel", "model", "eval"});
  PipelineConfig cfg;
  if (doc.contains("simulate"))
    cfg.simulate = parse_simulate(doc.at("simulate"), "/simulate");
  if (doc.contains("blur")) {
    const auto& b = doc.at("blur");
    reject_unknown(b, "/blur", {"per_blur", "skip", "fps"});
    cfg.blur.frames_per_blur = int(get_int(b, "/blur", "per_blur", cfg.blur.frames_per_blur, 1, 1001));
    if (cfg.blur.frames_per_blur % 2 == 0)
      throw ValidationError("config /blur/per_blur must be odd");
    cfg.blur.skip = int(get_int(b, "/blur", "skip", cfg.blur.skip, 0, 1000));
    cfg.blur.fps = get_number(b, "/blur", "fps", cfg.blur.fps, 0.0, 1e9, true);
  }
  if (doc.contains("physical")) {
    const auto& p = doc.at("physical");
    reject_unknown(p, "/physical", {"c"});
    cfg.physical.c = get_number(p, "/physical", "c", cfg.physical.c, 0.0, 10.0, true);
  }
  if (doc.contains("voxel")) {
    const auto& v = doc.at("voxel");
    reject_unknown(v, "/voxel", {"n", "exposure_bins"});
    cfg.voxel.n = int(get_int(v, "/voxel", "n", cfg.voxel.n, 0, 1000));
    cfg.voxel.exposure_bins = int(get_int(v, "/voxel", "exposure_bins", cfg.voxel.exposure_bins, 2, 1000));
  }
  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    cfg.model = refid_config_from_json(m, "/model");
    cfg.train.steps = std::size_t(get_int(m, "/model", "steps", long(cfg.train.steps), 0, 100'000'000));
    cfg.train.lr = get_number(m, "/model", "lr", cfg.train.lr, 0.0, 10.0, true);
  }
  if (doc.contains("eval")) {
    const auto& e = doc.at("eval");
    reject_unknown(e, "/eval", {"peak"});
    cfg.eval.peak = get_number(e, "/eval", "peak", cfg.eval.peak, 0.0, 1e9, true);
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path)
{
  const auto bytes = io::read_file(path);
  json doc = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (doc.is_discarded())
    throw ValidationError("config '" + path.string() + "' is not valid JSON");
  return parse_pipeline_config(doc);
}

json to_json(const SimConfig& c)
{
  return {{"c_mean", c.c_mean},
          {"c_std", c.c_std},
          {"c_mode", c.c_mode == ThresholdMode::fixed ? "fixed" : "gaussian-per-pixel"},
          {"log_eps", c.log_eps},
          {"seed", c.seed},
          {"noise_rate", c.noise_rate},
          {"hot_pixel_fraction", c.hot_pixel_fraction},
          {"hot_pixel_rate", c.hot_pixel_rate}};
}

json to_json(const RefidConfig& c)
{
  return {{"scales", c.scales},
          {"base_channels", c.base_channels},
          {"n_interp", c.n_interp},
          {"residual_blocks_per_evr", c.residual_blocks_per_evr},
          {"exposure_voxel_bins", c.exposure_voxel_bins},
          {"image_channels", c.image_channels},
          {"image_residual_blocks", c.image_residual_blocks},
          {"squeeze_reduction", c.squeeze_reduction},
          {"shared_squeeze", c.shared_squeeze},
          {"bidirectional", c.bidirectional},
          {"seed", c.seed}};
}

} // namespace evikit

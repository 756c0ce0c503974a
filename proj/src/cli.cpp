#include <evikit/cli.hpp>

#include <evikit/binary_io.hpp>
#include <evikit/checkpoint.hpp>
#include <evikit/config.hpp>
#include <evikit/errors.hpp>
#include <evikit/event_core.hpp>
#include <evikit/image.hpp>
#include <evikit/physical_model.hpp>
#include <evikit/quality.hpp>
#include <evikit/refid.hpp>
#include <evikit/selfcheck.hpp>
#include <evikit/simulator.hpp>
#include <evikit/voxel.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace evikit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log_stage(const std::string& cmd, const std::string& msg) { std::cerr << "evikit " << cmd << ": " << msg << '\n'; }

std::vector<double> parse_reals(const std::string& text, const std::string& flag)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size())
      throw ValidationError(flag + ": not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty())
    throw ValidationError(flag + ": empty list");
  return out;
}

ExposedFrame exposed(const fs::path& image, const std::string& exposure, const std::string& flag)
{
  const auto span = parse_reals(exposure, flag);
  if (span.size() != 2)
    throw ValidationError(flag + ": expected t_s,t_e");
  ExposedFrame f{read_netpbm(image), span[0], span[1]};
  f.validate();
  return f;
}

PipelineConfig pipeline(const std::string& path)
{
  return path.empty() ? PipelineConfig{} : load_pipeline_config(path);
}

std::string numbered(const std::string& stem, std::size_t i, const Frame& f)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04zu", i);
  return stem + buf + (f.channels() == 3 ? ".ppm" : ".pgm");
}

FrameSequence load_sequence(const fs::path& dir, double fps)
{
  if (!fs::is_directory(dir))
    throw IoError("not a directory: " + dir.string());
  std::vector<Frame> frames;
  for (const auto& p : list_frames(dir))
    frames.push_back(read_netpbm(p));
  if (frames.empty())
    throw ValidationError("no .pgm/.ppm frames in " + dir.string());
  return FrameSequence::uniform(std::move(frames), fps);
}

void write_json(const fs::path& path, const json& doc) { io::write_file_atomic(path, doc.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

struct Options {
  std::string config;
  std::string frames, out, out_bwd, outdir, events, frame, exposure, left, right, left_exposure, right_exposure;
  std::string taus, data, weights, pred, gt, report, loss_log;
  std::optional<double> fps, c, target, peak, lr;
  std::optional<int> per_blur, skip, n;
  std::optional<std::size_t> steps;
  bool deep = false;
};

int cmd_simulate(const Options& o)
{
  const auto cfg = pipeline(o.config);
  const auto seq = load_sequence(o.frames, o.fps.value_or(cfg.blur.fps));
  log_stage("simulate", "read " + std::to_string(seq.size()) + " frames");
  const auto stream = simulate(seq, cfg.simulate);
  write_events(stream, o.out);
  log_stage("simulate", "wrote " + std::to_string(stream.size()) + " events to " + o.out);
  return kOk;
}

int cmd_blur(const Options& o)
{
  auto cfg = pipeline(o.config);
  BlurProtocol proto = cfg.blur;
  if (o.per_blur)
    proto.frames_per_blur = *o.per_blur;
  if (o.skip)
    proto.skip = *o.skip;
  if (o.fps)
    proto.fps = *o.fps;
  const auto seq = load_sequence(o.frames, proto.fps);
  const auto blurred = synthesize_blur(seq, proto);
  ensure_dir(o.outdir);
  json manifest{{"fps", proto.fps}, {"frames_per_blur", proto.frames_per_blur}, {"skip", proto.skip},
                {"blurry", json::array()}, {"ground_truth", json::array()}};
  for (std::size_t i = 0; i < blurred.blurry.size(); ++i) {
    const auto& b = blurred.blurry[i];
    const auto name = numbered("blurry", i, b.image);
    write_netpbm(b.image, fs::path(o.outdir) / name, o.deep);
    manifest["blurry"].push_back({{"file", name}, {"t_s", b.t_s}, {"t_e", b.t_e}});
  }
  for (std::size_t i = 0; i < blurred.ground_truth.size(); ++i) {
    const auto& g = blurred.ground_truth[i];
    const auto name = numbered("gt", i, g.image);
    write_netpbm(g.image, fs::path(o.outdir) / name, o.deep);
    manifest["ground_truth"].push_back({{"file", name}, {"t", g.t}, {"source_index", g.source_index}});
  }
  write_json(fs::path(o.outdir) / "manifest.json", manifest);
  log_stage("blur", std::to_string(blurred.blurry.size()) + " blurry, " + std::to_string(blurred.ground_truth.size()) +
                        " ground-truth frames in " + o.outdir);
  return kOk;
}

int cmd_voxelize(const Options& o)
{
  const auto cfg = pipeline(o.config);
  const int n = o.n.value_or(cfg.voxel.n);
  const auto stream = read_events(o.events);
  const auto pair = bidirectional_pair(stream, n);
  write_voxel(pair.forward, o.out);
  if (!o.out_bwd.empty())
    write_voxel(pair.backward, o.out_bwd);
  log_stage("voxelize", std::to_string(stream.size()) + " events into " + std::to_string(n + 2) + " bins");
  return kOk;
}

int cmd_deblur(const Options& o)
{
  const auto cfg = pipeline(o.config);
  const auto frame = exposed(o.frame, o.exposure, "--exposure");
  const auto stream = read_events(o.events);
  const auto sharp = edi_deblur(frame, stream, o.c.value_or(cfg.physical.c), o.target);
  write_netpbm(sharp, o.out, o.deep);
  log_stage("deblur", "wrote " + o.out);
  return kOk;
}

int cmd_interpolate(const Options& o)
{
  const auto cfg = pipeline(o.config);
  const auto left = exposed(o.left, o.left_exposure, "--left-exposure");
  const auto right = exposed(o.right, o.right_exposure, "--right-exposure");
  const auto stream = read_events(o.events);
  const auto taus = parse_reals(o.taus, "--taus");
  const double c = o.c.value_or(cfg.physical.c);
  ensure_dir(o.outdir);
  const double m0 = left.midpoint(), m1 = right.midpoint();
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (taus[i] < 0.0 || taus[i] > 1.0)
      throw ValidationError("--taus: " + std::to_string(taus[i]) + " outside [0, 1]");
    const double t = m0 + taus[i] * (m1 - m0);
    const auto img = blurry_interpolate(left, right, stream, c, t);
    write_netpbm(img, fs::path(o.outdir) / numbered("interp", i, img), o.deep);
  }
  log_stage("interpolate", std::to_string(taus.size()) + " frames in " + o.outdir);
  return kOk;
}

int cmd_train(const Options& o)
{
  auto cfg = pipeline(o.config);
  if (o.steps)
    cfg.train.steps = *o.steps;
  if (o.lr)
    cfg.train.lr = *o.lr;
  if (o.fps)
    cfg.blur.fps = *o.fps;
  cfg.model.validate();
  auto seq = load_sequence(o.data, cfg.blur.fps);
  if (cfg.model.image_channels == 1)
    for (auto& f : seq.frames)
      f = luminance(f);
  BlurProtocol proto = cfg.blur;
  proto.skip = cfg.model.n_interp;
  const auto blurred = synthesize_blur(seq, proto);
  const auto stream = simulate(seq, cfg.simulate);
  log_stage("train-toy", std::to_string(stream.size()) + " events from " + std::to_string(seq.size()) + " frames");
  const auto samples = make_training_samples(seq, blurred, stream, cfg.model);
  if (samples.empty())
    throw ValidationError("need at least two blurry windows; got " + std::to_string(blurred.blurry.size()));
  log_stage("train-toy", std::to_string(samples.size()) + " samples, " + std::to_string(cfg.train.steps) + " steps");
  const auto result = train_toy(samples, cfg.model, cfg.train.steps, cfg.train.lr);
  save_weights(result.model, o.out);
  if (!result.losses.empty())
    log_stage("train-toy", "loss " + std::to_string(result.losses.front()) + " -> " +
                               std::to_string(result.losses.back()));
  if (!o.loss_log.empty())
    write_json(o.loss_log, json{{"losses", result.losses}});
  log_stage("train-toy", "wrote " + o.out);
  return kOk;
}

int cmd_infer(const Options& o)
{
  const auto model = load_weights(o.weights);
  const auto left = exposed(o.left, o.left_exposure, "--left-exposure");
  const auto right = exposed(o.right, o.right_exposure, "--right-exposure");
  const auto stream = read_events(o.events);
  const auto inputs = make_refid_inputs(left, right, stream, model.config());
  const auto outputs = model.forward(inputs);
  ensure_dir(o.outdir);
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto img = frame_from_tensor(outputs[i]);
    write_netpbm(img, fs::path(o.outdir) / numbered("frame", i, img), o.deep);
  }
  log_stage("infer", std::to_string(outputs.size()) + " frames in " + o.outdir);
  return kOk;
}

int cmd_eval(const Options& o)
{
  const auto cfg = pipeline(o.config);
  const double peak = o.peak.value_or(cfg.eval.peak);
  for (const auto& d : {o.pred, o.gt})
    if (!fs::is_directory(d))
      throw IoError("not a directory: " + d);
  const auto pred = list_frames(o.pred);
  const auto gt = list_frames(o.gt);
  if (pred.size() != gt.size() || pred.empty())
    throw ValidationError("--pred has " + std::to_string(pred.size()) + " frames, --gt has " +
                          std::to_string(gt.size()));
  json per = json::array();
  double psum = 0.0, ssum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto a = read_netpbm(pred[i]);
    const auto b = read_netpbm(gt[i]);
    const double p = psnr(a, b, peak), s = ssim(a, b, peak);
    psum += p;
    ssum += s;
    per.push_back({{"pred", pred[i].filename().string()}, {"gt", gt[i].filename().string()}, {"psnr", p}, {"ssim", s}});
  }
  const double n = double(pred.size());
  write_json(o.report, json{{"psnr_mean", psum / n}, {"ssim_mean", ssum / n}, {"per_frame", per}});
  log_stage("eval", "psnr " + std::to_string(psum / n) + " dB, ssim " + std::to_string(ssum / n));
  return kOk;
}

int cmd_selfcheck()
{
  int failed = 0;
  for (const auto& r : run_selfcheck()) {
    std::cerr << (r.passed ? "ok   " : "FAIL ") << r.name;
    if (!r.passed && !r.detail.empty())
      std::cerr << " (" << r.detail << ")";
    std::cerr << '\n';
    failed += r.passed ? 0 : 1;
  }
  std::cerr << "selfcheck: " << (failed ? std::to_string(failed) + " failed" : std::string("all passed")) << '\n';
  return failed ? kValidationError : kOk;
}

} // namespace

int run(const std::vector<std::string>& args)
{
  CLI::App app{"evikit: event-based frame interpolation toolkit", "evikit"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", o.config, "pipeline config JSON"); };
  auto add_deep = [&](CLI::App* sub) { sub->add_flag("--deep", o.deep, "write 16-bit netpbm"); };

  auto* simulate_cmd = app.add_subcommand("simulate", "simulate events from sharp frames");
  simulate_cmd->add_option("--frames", o.frames, "directory of frames")->required();
  simulate_cmd->add_option("--fps", o.fps, "frame rate");
  simulate_cmd->add_option("--out", o.out, "EVT1 output")->required();
  add_config(simulate_cmd);

  auto* blur_cmd = app.add_subcommand("blur", "average sharp frames into blurry frames");
  blur_cmd->add_option("--frames", o.frames, "directory of sharp frames")->required();
  blur_cmd->add_option("--per-blur", o.per_blur, "sharp frames per blurry frame");
  blur_cmd->add_option("--skip", o.skip, "withheld frames between windows");
  blur_cmd->add_option("--fps", o.fps, "frame rate of the sharp frames");
  blur_cmd->add_option("--outdir", o.outdir, "output directory")->required();
  add_config(blur_cmd);
  add_deep(blur_cmd);

  auto* voxelize_cmd = app.add_subcommand("voxelize", "bin events into forward/backward voxel grids");
  voxelize_cmd->add_option("--events", o.events, "EVT1 input")->required();
  voxelize_cmd->add_option("--n", o.n, "frames to interpolate");
  voxelize_cmd->add_option("--out", o.out, "forward VOX1 output")->required();
  voxelize_cmd->add_option("--out-bwd", o.out_bwd, "backward VOX1 output");
  add_config(voxelize_cmd);

  auto* deblur_cmd = app.add_subcommand("deblur", "event double integral deblurring");
  deblur_cmd->add_option("--frame", o.frame, "blurry frame")->required();
  deblur_cmd->add_option("--exposure", o.exposure, "t_s,t_e")->required();
  deblur_cmd->add_option("--events", o.events, "EVT1 input")->required();
  deblur_cmd->add_option("--c", o.c, "contrast threshold");
  deblur_cmd->add_option("--target", o.target, "latent timestamp (default: exposure midpoint)");
  deblur_cmd->add_option("--out", o.out, "output image")->required();
  add_config(deblur_cmd);
  add_deep(deblur_cmd);

  auto* interp_cmd = app.add_subcommand("interpolate", "physical-model interpolation between blurry frames");
  interp_cmd->add_option("--left", o.left, "left blurry frame")->required();
  interp_cmd->add_option("--right", o.right, "right blurry frame")->required();
  interp_cmd->add_option("--left-exposure", o.left_exposure, "t_s,t_e of the left frame")->required();
  interp_cmd->add_option("--right-exposure", o.right_exposure, "t_s,t_e of the right frame")->required();
  interp_cmd->add_option("--events", o.events, "EVT1 input")->required();
  interp_cmd->add_option("--taus", o.taus, "positions between the exposure midpoints, in [0, 1]")->required();
  interp_cmd->add_option("--c", o.c, "contrast threshold");
  interp_cmd->add_option("--outdir", o.outdir, "output directory")->required();
  add_config(interp_cmd);
  add_deep(interp_cmd);

  auto* train_cmd = app.add_subcommand("train-toy", "train the toy interpolation network");
  train_cmd->add_option("--data", o.data, "directory of sharp frames")->required();
  train_cmd->add_option("--steps", o.steps, "Adam steps");
  train_cmd->add_option("--lr", o.lr, "learning rate");
  train_cmd->add_option("--fps", o.fps, "frame rate of the sharp frames");
  train_cmd->add_option("--out", o.out, "RWT1 output")->required();
  train_cmd->add_option("--loss-log", o.loss_log, "per-step losses as JSON");
  add_config(train_cmd);

  auto* infer_cmd = app.add_subcommand("infer", "run a trained network");
  infer_cmd->add_option("--weights", o.weights, "RWT1 checkpoint")->required();
  infer_cmd->add_option("--left", o.left, "left blurry frame")->required();
  infer_cmd->add_option("--right", o.right, "right blurry frame")->required();
  infer_cmd->add_option("--left-exposure", o.left_exposure, "t_s,t_e of the left frame")->required();
  infer_cmd->add_option("--right-exposure", o.right_exposure, "t_s,t_e of the right frame")->required();
  infer_cmd->add_option("--events", o.events, "EVT1 input")->required();
  infer_cmd->add_option("--outdir", o.outdir, "output directory")->required();
  add_deep(infer_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of predictions against ground truth");
  eval_cmd->add_option("--pred", o.pred, "predicted frames")->required();
  eval_cmd->add_option("--gt", o.gt, "ground-truth frames")->required();
  eval_cmd->add_option("--report", o.report, "metrics JSON output")->required();
  eval_cmd->add_option("--peak", o.peak, "signal peak");
  add_config(eval_cmd);

  auto* selfcheck_cmd = app.add_subcommand("selfcheck", "run embedded golden vectors");

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  if (storage.empty())
    storage.push_back("evikit");
  for (auto& s : storage)
    argv.push_back(s.data());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cerr, std::cerr);
    return code == 0 ? kOk : kValidationError;
  }

  try {
    if (simulate_cmd->parsed())
      return cmd_simulate(o);
    if (blur_cmd->parsed())
      return cmd_blur(o);
    if (voxelize_cmd->parsed())
      return cmd_voxelize(o);
    if (deblur_cmd->parsed())
      return cmd_deblur(o);
    if (interp_cmd->parsed())
      return cmd_interpolate(o);
    if (train_cmd->parsed())
      return cmd_train(o);
    if (infer_cmd->parsed())
      return cmd_infer(o);
    if (eval_cmd->parsed())
      return cmd_eval(o);
    if (selfcheck_cmd->parsed())
      return cmd_selfcheck();
  } catch (const IoError& e) {
    std::cerr << "evikit: " << e.what() << '\n';
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "evikit: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "evikit: " << e.what() << '\n';
    return kValidationError;
  }
  return kValidationError;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

} // namespace evikit::cli

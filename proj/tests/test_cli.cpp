#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

#include <evikit/binary_io.hpp>
#include <evikit/cli.hpp>
#include <evikit/image.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace evikit;

namespace {

struct Workspace {
  fs::path root;
  Workspace()
  {
    root = fs::temp_directory_path() / ("evikit_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root / "sharp");
  }
  ~Workspace() { fs::remove_all(root); }
  std::string operator/(const std::string& name) const { return (root / name).string(); }
};

// Runs the real executable; stderr goes to `log`.
int run_tool(const std::string& args, const std::string& log)
{
  const std::string cmd = std::string(EVIKIT_BINARY) + " " + args + " 2>" + log;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path)
{
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bar_frames(const fs::path& dir, int count)
{
  const auto seq = scene::moving_bar_sequence(32, 16, count, 240.0, 4.0, 1.0, 5.0);
  for (int k = 0; k < count; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "f%03d.pgm", k);
    write_netpbm(seq.frames[std::size_t(k)], dir / name, true);
  }
}

} // namespace

TEST_CASE("selfcheck and usage errors")
{
  Workspace ws;
  CHECK(run_tool("selfcheck", ws / "log") == 0);
  CHECK(slurp(ws / "log").find("all passed") != std::string::npos);
  CHECK(cli::run({"evikit", "selfcheck"}) == 0);
  CHECK(cli::run({"evikit"}) == 1);
  CHECK(cli::run({"evikit", "frobnicate"}) == 1);
  CHECK(cli::run({"evikit", "deblur", "--frame", "x.pgm"}) == 1);
}

TEST_CASE("missing inputs are I/O errors naming the path")
{
  Workspace ws;
  write_netpbm(Frame(8, 8, 1, 0.5), ws.root / "b.pgm");
  const auto missing = ws / "nope.evt1";
  CHECK(run_tool("deblur --frame " + (ws / "b.pgm") + " --exposure 0,1 --events " + missing + " --out " +
                     (ws / "o.pgm"),
                 ws / "log") == 2);
  CHECK(slurp(ws / "log").find(missing) != std::string::npos);
  CHECK(!fs::exists(ws.root / "o.pgm"));
}

TEST_CASE("simulate, blur, deblur, interpolate, eval")
{
  Workspace ws;
  write_bar_frames(ws.root / "sharp", 23);
  std::ofstream(ws / "cfg.json") << R"({"simulate": {"c_mode": "fixed", "seed": 3}, "blur": {"fps": 240}})";

  const std::string sim = "simulate --frames " + (ws / "sharp") + " --fps 240 --config " + (ws / "cfg.json");
  REQUIRE(run_tool(sim + " --out " + (ws / "e.evt1"), ws / "log") == 0);
  REQUIRE(run_tool(sim + " --out " + (ws / "e2.evt1"), ws / "log") == 0);
  CHECK(io::read_file(ws / "e.evt1") == io::read_file(ws / "e2.evt1"));

  REQUIRE(run_tool("blur --frames " + (ws / "sharp") + " --per-blur 11 --skip 1 --fps 240 --deep --outdir " +
                       (ws / "blurry"),
                   ws / "log") == 0);
  const auto manifest = nlohmann::json::parse(slurp(ws / "blurry/manifest.json"));
  REQUIRE(manifest["blurry"].size() == 2);
  REQUIRE(manifest["ground_truth"].size() == 1);
  CHECK(manifest["ground_truth"][0]["source_index"] == 11);

  auto exposure = [&](int i) {
    std::ostringstream os;
    os.precision(17);
    os << double(manifest["blurry"][i]["t_s"]) << "," << double(manifest["blurry"][i]["t_e"]);
    return os.str();
  };
  fs::create_directories(ws.root / "pred");
  fs::create_directories(ws.root / "gt");
  REQUIRE(run_tool("deblur --frame " + (ws / "blurry/blurry_0000.pgm") + " --exposure " + exposure(0) + " --events " +
                       (ws / "e.evt1") + " --c 0.2 --deep --out " + (ws / "pred/a.pgm"),
                   ws / "log") == 0);
  fs::copy_file(ws.root / "sharp/f005.pgm", ws.root / "gt/a.pgm");

  REQUIRE(run_tool("interpolate --left " + (ws / "blurry/blurry_0000.pgm") + " --right " +
                       (ws / "blurry/blurry_0001.pgm") + " --left-exposure " + exposure(0) + " --right-exposure " +
                       exposure(1) + " --events " + (ws / "e.evt1") + " --taus 0.5 --c 0.2 --deep --outdir " +
                       (ws / "interp"),
                   ws / "log") == 0);
  CHECK(fs::exists(ws.root / "interp/interp_0000.pgm"));

  REQUIRE(run_tool("eval --pred " + (ws / "pred") + " --gt " + (ws / "gt") + " --report " + (ws / "m.json"),
                   ws / "log") == 0);
  const auto metrics = nlohmann::json::parse(slurp(ws / "m.json"));
  CHECK(metrics.contains("psnr_mean"));
  CHECK(metrics.contains("ssim_mean"));
  CHECK(metrics["per_frame"].size() == 1);
  CHECK(double(metrics["psnr_mean"]) > 15.0);

  REQUIRE(run_tool("voxelize --events " + (ws / "e.evt1") + " --n 3 --out " + (ws / "f.vox") + " --out-bwd " +
                       (ws / "b.vox"),
                   ws / "log") == 0);
  CHECK(fs::file_size(ws.root / "f.vox") == 26 + 5 * 16 * 32 * 4);

  std::ofstream(ws / "bad.json") << R"({"simulate": {"bogus": 1}})";
  CHECK(run_tool("simulate --frames " + (ws / "sharp") + " --config " + (ws / "bad.json") + " --out " +
                     (ws / "x.evt1"),
                 ws / "log") == 1);
  CHECK(slurp(ws / "log").find("/simulate/bogus") != std::string::npos);
  CHECK(!fs::exists(ws.root / "x.evt1"));
}

TEST_CASE("train-toy and infer")
{
  Workspace ws;
  const auto seq = scene::moving_bar_sequence(16, 16, 13, 240.0, 2.0, 0.8, 4.0);
  for (int k = 0; k < 13; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "f%03d.pgm", k);
    write_netpbm(seq.frames[std::size_t(k)], ws.root / "sharp" / name, true);
  }
  std::ofstream(ws / "cfg.json")
      << R"({"blur": {"per_blur": 5, "fps": 240}, "model": {"base_channels": 4, "n_interp": 3, "steps": 3}})";
  REQUIRE(run_tool("train-toy --config " + (ws / "cfg.json") + " --data " + (ws / "sharp") + " --out " +
                       (ws / "w.rwt1") + " --loss-log " + (ws / "loss.json"),
                   ws / "log") == 0);
  CHECK(nlohmann::json::parse(slurp(ws / "loss.json"))["losses"].size() == 3);
  REQUIRE(run_tool("train-toy --config " + (ws / "cfg.json") + " --data " + (ws / "sharp") + " --out " +
                       (ws / "w2.rwt1"),
                   ws / "log") == 0);
  CHECK(io::read_file(ws / "w.rwt1") == io::read_file(ws / "w2.rwt1"));

  REQUIRE(run_tool("simulate --frames " + (ws / "sharp") + " --fps 240 --out " + (ws / "e.evt1"), ws / "log") == 0);
  write_netpbm(seq.frames[2], ws.root / "l.pgm");
  write_netpbm(seq.frames[10], ws.root / "r.pgm");
  const auto ex = [](int a, int b) {
    std::ostringstream os;
    os.precision(17);
    os << a / 240.0 << "," << b / 240.0;
    return os.str();
  };
  REQUIRE(run_tool("infer --weights " + (ws / "w.rwt1") + " --left " + (ws / "l.pgm") + " --right " + (ws / "r.pgm") +
                       " --left-exposure " + ex(0, 4) + " --right-exposure " + ex(8, 12) + " --events " +
                       (ws / "e.evt1") + " --outdir " + (ws / "out"),
                   ws / "log") == 0);
  for (int k = 0; k < 5; ++k)
    CHECK(fs::exists(ws.root / ("out/frame_000" + std::to_string(k) + ".pgm")));

  CHECK(run_tool("infer --weights " + (ws / "l.pgm") + " --left " + (ws / "l.pgm") + " --right " + (ws / "r.pgm") +
                     " --left-exposure 0,0.01 --right-exposure 0.03,0.04 --events " + (ws / "e.evt1") +
                     " --outdir " + (ws / "out2"),
                 ws / "log") == 1);
}

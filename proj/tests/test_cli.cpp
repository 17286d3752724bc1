// End-to-end exercises of the command line tool via std::system. The binary
// path comes from the build through TTIC_CLI_PATH.
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ttic/bitstream.hpp"
#include "ttic/image.hpp"

using namespace ttic;
namespace fs = std::filesystem;

#ifndef TTIC_CLI_PATH
#define TTIC_CLI_PATH "ttic"
#endif

namespace {

const std::string kWork = "/tmp/ttic_cli_work";

int cli(const std::string& args) {
  const std::string cmd = std::string(TTIC_CLI_PATH) + " " + args + " >> " + kWork +
                          "/cli.log 2>&1";
  return std::system(cmd.c_str());
}

int cli_capture(const std::string& args, const std::string& out_file) {
  const std::string cmd = std::string(TTIC_CLI_PATH) + " " + args + " > " + out_file + " 2>> " +
                          kWork + "/cli.log";
  return std::system(cmd.c_str());
}

struct CliFixture {
  CliFixture() {
    static bool prepared = false;
    if (prepared) return;
    prepared = true;
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    // a config that the smoke workflow shares
    std::ofstream cfg(kWork + "/cfg.json");
    cfg << R"({
      "codec": {"depths": [1,1,1,1], "widths": [6,8,10,12], "window_size": 4,
                "head_dim": 8, "cz": 8, "hyper_width": 8, "hyper_depth": 1},
      "prompts": {"gp_widths": [6,8,10]},
      "train": {"steps": 10, "batch_size": 2, "crop": 64, "seed": 3,
                "dataset_root": ")" +
               kWork + R"(/corpus", "log_every": 5}
    })";
    cfg.close();
    REQUIRE(cli("gen-data --out " + kWork + "/corpus --per-class-train 3 --per-class-val 2"
                " --size 64 --seed 1") == 0);
  }
};

}  // namespace

TEST_CASE_FIXTURE(CliFixture, "cli end-to-end smoke workflow" * doctest::timeout(900)) {
  // train a tiny base codec
  REQUIRE(cli("train-base --config " + kWork + "/cfg.json --lambda 0.013 --lambda-index 3" +
              " --out " + kWork + "/base.ttck --log " + kWork + "/base.log.jsonl") == 0);
  REQUIRE(fs::exists(kWork + "/base.ttck"));
  REQUIRE(fs::exists(kWork + "/base.log.jsonl"));

  // tasknet (min-acc 0 so the tiny corpus passes)
  REQUIRE(cli("train-task --dataset " + kWork + "/corpus --arch A --out " + kWork +
              "/net.ttck --min-acc 0 --epochs 2 --seed 4") == 0);

  // transfer
  REQUIRE(cli("transfer --config " + kWork + "/cfg.json --base " + kWork +
              "/base.ttck --task A --tasknet " + kWork + "/net.ttck --steps 6 --out " + kWork +
              "/tr.ttck") == 0);

  // compress -> decompress round trip restores dimensions
  const auto& sample_dir = kWork + std::string("/corpus/val/circle");
  std::string sample;
  for (const auto& e : fs::directory_iterator(sample_dir)) {
    sample = e.path().string();
    break;
  }
  REQUIRE(cli("compress --ckpt " + kWork + "/base.ttck --in " + sample + " --out " + kWork +
              "/img.ttic") == 0);
  REQUIRE(cli("decompress --ckpt " + kWork + "/base.ttck --in " + kWork + "/img.ttic --out " +
              kWork + "/img_out.png") == 0);
  auto original = read_image(sample);
  auto decoded = read_image(kWork + "/img_out.png");
  CHECK(decoded.h == original.h);
  CHECK(decoded.w == original.w);

  // prompted compress/decompress
  REQUIRE(cli("compress --ckpt " + kWork + "/base.ttck --transfer " + kWork + "/tr.ttck --in " +
              sample + " --out " + kWork + "/img_t.ttic") == 0);
  auto stream = read_bitstream_file(kWork + "/img_t.ttic");
  CHECK(stream.header.mode == 1);
  REQUIRE(cli("decompress --ckpt " + kWork + "/base.ttck --transfer " + kWork +
              "/tr.ttck --in " + kWork + "/img_t.ttic --out " + kWork + "/img_t_out.png") == 0);

  // task-mode stream without the bundle fails with a machine-readable error
  CHECK(cli("decompress --ckpt " + kWork + "/base.ttck --in " + kWork + "/img_t.ttic --out " +
            kWork + "/nope.png") != 0);

  // eval in PSNR (human) mode, then bd of the report against itself
  REQUIRE(cli("eval --ckpts " + kWork + "/base.ttck --dataset " + kWork +
              "/corpus --split val --max-images 4 --report " + kWork + "/eval_psnr.json") == 0);
  {
    std::ifstream f(kWork + "/eval_psnr.json");
    std::string body((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(body.find("\"psnr\"") != std::string::npos);
  }

  // eval with the tasknet in accuracy mode across two checkpoints
  REQUIRE(cli("train-base --config " + kWork + "/cfg.json --lambda 0.0018 --lambda-index 0" +
              " --steps 10 --out " + kWork + "/base0.ttck") == 0);
  REQUIRE(cli("eval --ckpts " + kWork + "/base0.ttck," + kWork + "/base.ttck --dataset " + kWork +
              "/corpus --split val --tasknet " + kWork + "/net.ttck --max-images 4 --report " +
              kWork + "/eval_acc.json --plot " + kWork + "/eval_acc.png") == 0);
  CHECK(fs::exists(kWork + "/eval_acc.png"));

  // bd of a well-formed report against itself is the all-zero table
  {
    std::ofstream rep(kWork + "/synth_report.json");
    rep << R"({"metric":"top1","points":[
      {"bpp":0.1,"quality":30.0},{"bpp":0.2,"quality":33.0},
      {"bpp":0.4,"quality":36.0},{"bpp":0.8,"quality":39.0}]})";
  }
  REQUIRE(cli_capture("bd --anchor " + kWork + "/synth_report.json --test " + kWork +
                      "/synth_report.json", kWork + "/bd.json") == 0);
  {
    std::ifstream f(kWork + "/bd.json");
    std::string body((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(body.find("\"bd_rate_percent\": 0.0") != std::string::npos);
    CHECK(body.find("\"bd_quality\": 0.0") != std::string::npos);
  }

  // complexity report
  REQUIRE(cli_capture("complexity --ckpt " + kWork + "/base.ttck --transfer " + kWork +
                      "/tr.ttck --height 64 --width 64", kWork + "/cx.json") == 0);
  {
    std::ifstream f(kWork + "/cx.json");
    std::string body((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(body.find("encoder_kmacs_per_pixel") != std::string::npos);
  }

  // bit-allocation map + sidecar
  REQUIRE(cli("bitmap --ckpt " + kWork + "/base.ttck --in " + sample + " --out " + kWork +
              "/map.png") == 0);
  CHECK(fs::exists(kWork + "/map.png"));
  CHECK(fs::exists(kWork + "/map.png.json"));

  // idempotence: identical compress invocations give identical bytes
  REQUIRE(cli("compress --ckpt " + kWork + "/base.ttck --in " + sample + " --out " + kWork +
              "/img2.ttic") == 0);
  std::ifstream f1(kWork + "/img.ttic", std::ios::binary);
  std::ifstream f2(kWork + "/img2.ttic", std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  // malformed bitstream magic is rejected
  {
    std::ofstream bad(kWork + "/bad.ttic", std::ios::binary);
    bad << "NOPE";
  }
  CHECK(cli("decompress --ckpt " + kWork + "/base.ttck --in " + kWork + "/bad.ttic --out " +
            kWork + "/bad.png") != 0);
}

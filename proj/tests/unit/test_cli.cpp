#include "doctest.h"

#include "cli.hpp"

#include "iceritz/problems.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace iceritz;
using namespace iceritz::cli;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "iceritz_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig tiny_train_config(const std::string& out) {
  RunConfig c;
  c.problem = "mms1d-p2";
  c.hidden_layers = {8, 8};
  c.alpha = 100.0;
  c.beta = 100.0;
  c.iterations = 25;
  c.batch_interior = 32;
  c.batch_boundary = 2;
  c.error_grid = 101;
  c.seed = 11;
  c.out_dir = out;
  return c;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(ICERITZ_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config JSON: round trip and strict keys") {
  RunConfig c;
  c.problem = "mms2d-p3";
  c.hidden_layers = {64, 64, 64};
  c.alpha = 123.0;
  c.beta = 77.0;
  c.iterations = 321;
  c.seed = 99;
  c.sampling = "fixed-grid";
  c.pairs = {{100.0, 100.0}, {4000.0, 4000.0}};
  c.bedrock_path = "bed.asc";

  RunConfig back;
  merge_json_into(back, to_json(c));
  CHECK(back.problem == c.problem);
  CHECK(back.hidden_layers == c.hidden_layers);
  CHECK(back.alpha == c.alpha);
  CHECK(back.beta == c.beta);
  CHECK(back.iterations == c.iterations);
  CHECK(back.seed == c.seed);
  CHECK(back.sampling == c.sampling);
  CHECK(back.pairs == c.pairs);
  CHECK(back.bedrock_path == c.bedrock_path);

  RunConfig fresh;
  CHECK_THROWS_AS(merge_json_into(fresh, R"({"problem": "mms1d-p2", "iterationz": 5})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(merge_json_into(fresh, R"({"sampling": "bogus"})"), std::exception);
}

TEST_CASE("sampling mode names") {
  CHECK(parse_sampling("resample") == SamplingMode::resample);
  CHECK(parse_sampling("fixed-random") == SamplingMode::fixed_random);
  CHECK(parse_sampling("fixed-grid") == SamplingMode::fixed_grid);
  CHECK_THROWS_AS(parse_sampling("other"), std::invalid_argument);
}

TEST_CASE("train run: artifacts exist and reruns are byte-identical") {
  const fs::path dir1 = fresh_dir("train1");
  const fs::path dir2 = fresh_dir("train2");
  RunConfig c = tiny_train_config(dir1.string());

  const TrainOutcome out1 = run_training(c, dir1.string());
  CHECK_FALSE(out1.report.aborted);
  CHECK(out1.has_exact);
  for (const char* name :
       {"config.json", "train_report.csv", "net.ckpt", "solution.csv", "error.json",
        "run_meta.json"})
    CHECK(fs::exists(dir1 / name));

  // the report CSV has a header plus one line per iteration
  const std::string csv = slurp(dir1 / "train_report.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 26);
  CHECK(csv.rfind("iteration,loss1,loss2,loss3,total,l1_error,lr\n", 0) == 0);

  const TrainOutcome out2 = run_training(c, dir2.string());
  CHECK(out2.report.losses.back().total == out1.report.losses.back().total);
  for (const char* name : {"train_report.csv", "net.ckpt", "solution.csv", "error.json"})
    CHECK(slurp(dir1 / name) == slurp(dir2 / name));
}

TEST_CASE("checkpoint written by a run reloads and matches the solution dump") {
  const fs::path dir = fresh_dir("ckpt");
  RunConfig c = tiny_train_config(dir.string());
  run_training(c, dir.string());
  const Network net = Network::load_file((dir / "net.ckpt").string());
  CHECK(net.input_dim() == 1);
  CHECK(net.layer_sizes() == std::vector<int>{1, 8, 8, 1});
}

TEST_CASE("sweep: degenerate and duplicate pairs") {
  const fs::path dir = fresh_dir("sweep");
  RunConfig c = tiny_train_config((dir / "s").string());
  c.out_dir = dir.string();
  c.pairs = {{100.0, 100.0}, {100.0, 100.0}};
  c.iterations = 10;
  CHECK(cmd_sweep(c) == kExitOk);
  const std::string csv = slurp(dir / "sweep.csv");
  CHECK(csv.rfind("alpha,beta,relative_error\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  // duplicate pairs trained under distinct seeds
  const std::string cfg0 = slurp(dir / "pair0_a100_b100" / "config.json");
  const std::string cfg1 = slurp(dir / "pair1_a100_b100" / "config.json");
  CHECK(cfg0.find("\"seed\": 11") != std::string::npos);
  CHECK(cfg1.find("\"seed\": 12") != std::string::npos);

  RunConfig empty = c;
  empty.pairs.clear();
  CHECK_THROWS_AS(cmd_sweep(empty), std::invalid_argument);
}

TEST_CASE("oracle command: errors and artifacts") {
  const fs::path dir = fresh_dir("oracle");
  RunConfig c;
  c.problem = "mms1d-p2";
  c.cells = 256;
  c.out_dir = dir.string();
  CHECK(cmd_oracle(c) == kExitOk);
  CHECK(fs::exists(dir / "oracle_solution.csv"));
  const std::string err = slurp(dir / "error.json");
  CHECK(err.find("max_error") != std::string::npos);

  RunConfig bad = c;
  bad.problem = "mms2d-p1.5";
  CHECK_THROWS_AS(cmd_oracle(bad), std::invalid_argument);
  RunConfig grid = c;
  grid.problem = "grid:whatever.asc,thk.asc";
  CHECK_THROWS_AS(cmd_oracle(grid), std::invalid_argument);
}

TEST_CASE("greenland command: missing inputs are usage errors") {
  RunConfig c;
  c.out_dir = fresh_dir("greenland").string();
  c.bedrock_path = "";
  CHECK_THROWS_AS(cmd_greenland(c), std::invalid_argument);
  c.bedrock_path = "bed.asc";  // thickness still missing
  CHECK_THROWS_AS(cmd_greenland(c), std::invalid_argument);
}

TEST_CASE("binary: exit codes and usage text") {
  CHECK(run_binary("") == 2);
  CHECK(run_binary("train") == 2);                      // no problem given
  CHECK(run_binary("train --problem nope") == 2);       // unknown problem
  CHECK(run_binary("--help") == 0);
  CHECK(run_binary("oracle --problem mms2d-p1.5") == 2);

  // missing grid file surfaces as a domain error, not a usage error
  CHECK(run_binary("greenland --bedrock /nonexistent.asc --thickness /nope.asc --out "
                   "/tmp/iceritz_cli_tests/gl") == 1);

  const fs::path dir = fresh_dir("binary_train");
  const std::string args = "train --problem mms1d-p2 --layers 8,8 --alpha 100 --beta 100 "
                           "--iters 10 --batch 16 --error-grid 51 --out " +
                           dir.string();
  CHECK(run_binary(args) == 0);
  CHECK(fs::exists(dir / "train_report.csv"));
}

TEST_CASE("config file feeds the binary and flags override it") {
  const fs::path dir = fresh_dir("cfgfile");
  const fs::path cfg_path = dir / "run.json";
  {
    std::ofstream out(cfg_path);
    out << R"({"problem": "mms1d-p2", "hidden_layers": [8], "iterations": 5,
               "batch_interior": 16, "alpha": 100.0, "beta": 100.0,
               "error_grid": 51, "out_dir": ")"
        << (dir / "out").string() << R"("})";
  }
  CHECK(run_binary("train --config " + cfg_path.string()) == 0);
  const std::string saved = slurp(dir / "out" / "config.json");
  CHECK(saved.find("\"iterations\": 5") != std::string::npos);

  // a flag wins over the file value
  CHECK(run_binary("train --config " + cfg_path.string() + " --iters 7 --out " +
                   (dir / "out2").string()) == 0);
  const std::string saved2 = slurp(dir / "out2" / "config.json");
  CHECK(saved2.find("\"iterations\": 7") != std::string::npos);
}

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fluxsolve/json_io.hpp"
#include "fluxsolve/model.hpp"

namespace fs = std::filesystem;
using namespace fluxsolve;

namespace {

int run(const std::string& args, const fs::path& log = "/dev/null") {
  const std::string cmd = std::string(FLUXSOLVE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("fluxsolve_cli_" + name);
  fs::remove_all(p);
  return p;
}

const std::string small = " --n-train 3 --n-val 2 --n-test 2";

}  // namespace

TEST(Cli, HelpAndUnknownOptions) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("gen-data --help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("gen-data --out x --bogus 1"), 2);
}

TEST(Cli, GenDataIsDeterministic) {
  const auto a = fresh("gen_a"), b = fresh("gen_b");
  ASSERT_EQ(run("gen-data --seed 7 --out " + a.string() + small), 0);
  ASSERT_EQ(run("gen-data --seed 7 --out " + b.string() + small), 0);
  for (const char* f : {"train.json", "val.json", "test.json"}) {
    EXPECT_FALSE(slurp(a / f).empty());
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_TRUE(fs::exists(a / "manifest.json"));
  EXPECT_EQ(run("gen-data --out " + fresh("gen_c").string() + " --n-train 0"), 2);
}

TEST(Cli, TrainAndEval) {
  const auto data = fresh("data"), out = fresh("train");
  ASSERT_EQ(run("gen-data --seed 1 --out " + data.string() + small), 0);
  EXPECT_EQ(run("train --out " + out.string()), 2);
  EXPECT_EQ(run("train --data " + fresh("nowhere").string() + " --out " + out.string()), 2);
  EXPECT_EQ(run("train --data " + data.string() + " --out " + out.string() + " --solver rk4"), 2);

  ASSERT_EQ(run("train --epochs 0 --seed 5 --data " + data.string() + " --out " + out.string()), 0);
  const auto ckpt = json_io::read_file(out / "checkpoint.json");
  EXPECT_EQ(ckpt, FluxGNNModel::init({}, 5).to_json());

  const auto log = fresh("eval_log");
  EXPECT_EQ(run("eval --model " + (out / "checkpoint.json").string() + " --data " + data.string(), log), 0);
  EXPECT_EQ(slurp(log).rfind("method,dataset,mse", 0), 0u);
  EXPECT_EQ(run("eval --fvm blended --data " + data.string() + " --out " + fresh("eval_out").string()), 0);
  EXPECT_TRUE(fs::exists(fs::temp_directory_path() / "fluxsolve_cli_eval_out" / "metrics.csv"));
  EXPECT_EQ(run("eval --fvm blended --model x --data " + data.string()), 2);

  auto bad = ckpt;
  bad["decoder"]["values"][0] = bad["decoder"]["values"][0].get<double>() + 0.5;
  const auto bad_path = fs::temp_directory_path() / "fluxsolve_cli_bad_checkpoint.json";
  json_io::write_file(bad_path, bad);
  EXPECT_EQ(run("eval --model " + bad_path.string() + " --data " + data.string()), 3);

  const auto trained = fresh("trained");
  ASSERT_EQ(run("train --epochs 1 --data " + data.string() + " --out " + trained.string()), 0);
  EXPECT_TRUE(fs::exists(trained / "training_log.csv"));
  EXPECT_TRUE(fs::exists(trained / "checkpoint_last.json"));
}

TEST(Cli, ConvergeAndRunFvm) {
  const auto log = fresh("converge_log");
  ASSERT_EQ(run("converge --resolutions 20", log), 0);
  const auto text = slurp(log);
  EXPECT_NE(text.find("n_cells,dx,rmse"), std::string::npos);
  EXPECT_NE(text.find("\n20,"), std::string::npos);
  EXPECT_EQ(run("converge --resolutions 5,x"), 2);
  EXPECT_EQ(run("converge --scheme quick"), 2);
  EXPECT_EQ(run("run-fvm --out " + (fs::temp_directory_path() / "fluxsolve_cli_run.json").string()), 0);
  EXPECT_EQ(run("run-fvm --dt 0.3"), 2);
}

TEST(Cli, PropcheckExitCodes) {
  EXPECT_EQ(run("propcheck --probes 10"), 0);
  EXPECT_EQ(run("propcheck --probes 10 --inject-break unshared-vertex-mlp"), 1);
  EXPECT_EQ(run("propcheck --inject-break nothing"), 2);
}

TEST(Cli, ThreadVariable) {
  EXPECT_EQ(run("converge --resolutions 10"), 0);
  EXPECT_EQ(std::system(("FLUXSOLVE_THREADS=0 " + std::string(FLUXSOLVE_CLI) + " converge > /dev/null 2>&1").c_str()) >> 8, 2);
}

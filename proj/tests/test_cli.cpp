#include "doctest.h"

#include <fstream>

#include "l2g/cli.hpp"
#include "l2g/container.hpp"
#include "support.hpp"

using namespace l2g;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "l2g");
  return run_cli(args);
}

std::string slurp(const std::filesystem::path& p) { return read_text_file(p); }

}  // namespace

TEST_CASE("command-line workflow and exit codes") {
  const auto dir = testing::scratch_dir("cli");
  const std::string data = (dir / "data").string();
  const std::vector<std::string> gen = {"generate", "--family", "ba", "--m", "20", "--train", "12",
                                        "--val", "4", "--test", "4", "--signals", "30", "--seed", "5",
                                        "--out", data};
  REQUIRE(run(gen) == exit_ok);
  const std::string first = slurp(dir / "data" / "train.l2gd");
  auto again = gen;
  again.back() = (dir / "data2").string();
  REQUIRE(run(again) == exit_ok);
  CHECK(slurp(dir / "data2" / "train.l2gd") == first);
  CHECK(slurp(dir / "data2" / "manifest.json") == slurp(dir / "data" / "manifest.json"));

  CHECK(run({"tune", "--dataset", data, "--alpha-grid", "-1:0:2", "--beta-grid", "-1:0:2", "--out",
             (dir / "tune").string()}) == exit_ok);
  CHECK(run({"solve", "--dataset", data, "--config", (dir / "tune" / "tune.json").string(), "--out",
             (dir / "solve").string()}) == exit_ok);
  CHECK(std::filesystem::exists(dir / "solve" / "estimates.l2ge"));
  CHECK(run({"eval", "--dataset", data, "--estimates", (dir / "solve" / "estimates.l2ge").string(),
             "--ks-bootstrap", "20", "--out", (dir / "eval").string()}) == exit_ok);
  CHECK(slurp(dir / "eval" / "report.txt").find("gmse.mean") != std::string::npos);

  CHECK(run({"train", "--dataset", data, "--model", "unroll", "--layers", "3", "--epochs", "2", "--out",
             (dir / "train").string()}) == exit_ok);
  const auto ckpt = (dir / "train" / "checkpoint.l2gc").string();
  CHECK(std::filesystem::exists(ckpt));

  {
    std::ofstream csv(dir / "series.csv");
    csv << "name,t0,t1,t2\n";
    for (int i = 0; i < 20; ++i) csv << "n" << i << "," << i * 0.1 << "," << (i % 3) << "," << -i * 0.05 << "\n";
  }
  CHECK(run({"infer", "--checkpoint", ckpt, "--input", (dir / "series.csv").string(), "--out",
             (dir / "infer").string()}) == exit_ok);
  CHECK(slurp(dir / "infer" / "edges.csv").rfind("source,target,weight", 0) == 0);

  CHECK(run({"compare", "--dataset", data, "--models", "pds,unroll", "--solver-config",
             "pds=" + (dir / "tune" / "tune.json").string(), "--checkpoint", "unroll=" + ckpt, "--out",
             (dir / "cmp").string()}) == exit_ok);

  CHECK(run({}) == exit_usage);
  CHECK(run({"solve", "--dataset", data, "--solver", "sgd", "--out", (dir / "x").string()}) == exit_usage);
  CHECK(run({"generate", "--m", "-3", "--out", (dir / "x").string()}) == exit_usage);
  CHECK(run({"compare", "--dataset", data, "--models", "unroll", "--out", (dir / "x").string()}) == exit_usage);
  CHECK(run({"compare", "--dataset", data, "--models", "unroll", "--checkpoint",
             "unroll=" + (dir / "nope.l2gc").string(), "--out", (dir / "x").string()}) == exit_data);
  CHECK(run({"solve", "--dataset", (dir / "missing").string(), "--out", (dir / "x").string()}) == exit_data);
  CHECK(run({"solve", "--dataset", data, "--gamma", "1000", "--max-iter", "5000", "--out",
             (dir / "x").string()}) == exit_numeric);
}

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mce/cli.hpp"
#include "test_util.hpp"

using mce::testing::slurp;
using mce::testing::tmp_path;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = mce::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string small_synth(const std::string& name, const std::string& seed = "1") {
  std::string dir = tmp_path(name);
  auto r = run({"gen-synth", "--out-dir", dir, "--seed", seed, "--entities", "150", "--groups", "6",
                "--codes-per-group", "6"});
  REQUIRE(r.code == 0);
  return dir;
}

std::vector<std::string> quick_train(const std::string& dir, const std::string& tag) {
  return {"train", "--corpus", dir + "/corpus.tsv", "--embeddings", dir + "/" + tag + ".vec",
          "--dim", "8", "--scope", "4", "--gamma", "12", "--epochs", "2", "--seed", "3"};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-synth is reproducible") {
  auto a = small_synth("cli_gen_a");
  auto b = small_synth("cli_gen_b");
  for (auto f : {"corpus.tsv", "clusters.tsv", "neighbors.tsv", "manifest.json"}) {
    CHECK(slurp(a + "/" + f) == slurp(b + "/" + f));
    CHECK_FALSE(slurp(a + "/" + f).empty());
  }
}

TEST_CASE("build-vocab writes the vocabulary") {
  auto dir = small_synth("cli_vocab");
  auto r = run({"build-vocab", "--corpus", dir + "/corpus.tsv", "--min-count", "5"});
  CHECK(r.code == 0);
  std::istringstream in(r.out);
  std::size_t n = 0;
  in >> n;
  CHECK(n > 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == static_cast<long>(n + 1));
}

TEST_CASE("cbow and frozen mce write identical embeddings") {
  auto dir = small_synth("cli_equiv");
  auto cbow = quick_train(dir, "cbow");
  cbow.insert(cbow.end(), {"--mode", "cbow"});
  auto frozen = quick_train(dir, "frozen");
  frozen.insert(frozen.end(), {"--mode", "mce", "--freeze-attention"});
  REQUIRE(run(cbow).code == 0);
  REQUIRE(run(frozen).code == 0);
  CHECK(slurp(dir + "/cbow.vec") == slurp(dir + "/frozen.vec"));
}

TEST_CASE("train outputs, export-attention and eval") {
  auto dir = small_synth("cli_full");
  const std::string corpus_before = slurp(dir + "/corpus.tsv");
  auto args = quick_train(dir, "mce");
  args.insert(args.end(), {"--attention", dir + "/attn.csv", "--report", dir + "/report.json",
                           "--model", dir + "/model.txt"});
  auto r = run(args);
  REQUIRE(r.code == 0);
  CHECK(r.err.find("epoch 2/2") != std::string::npos);
  CHECK(slurp(dir + "/corpus.tsv") == corpus_before);

  auto report = nlohmann::json::parse(slurp(dir + "/report.json"));
  for (auto key : {"targets", "epochs", "final_lr", "mean_loss_per_epoch", "wall_seconds"}) {
    CHECK(report.contains(key));
  }
  CHECK(report["mean_loss_per_epoch"].size() == 2);

  auto csv = slurp(dir + "/attn.csv");
  CHECK(csv.rfind("code,delta_-4,delta_-3,", 0) == 0);
  auto ex = run({"export-attention", "--model", dir + "/model.txt", "--out", dir + "/attn2.csv"});
  CHECK(ex.code == 0);
  CHECK(slurp(dir + "/attn2.csv") == csv);

  auto ev = run({"eval", "--embeddings", dir + "/mce.vec", "--clusters", dir + "/clusters.tsv",
                 "--neighbors", dir + "/neighbors.tsv"});
  REQUIRE(ev.code == 0);
  auto metrics = nlohmann::json::parse(ev.out);
  for (auto key : {"nmi", "p_at_1", "n_clustered", "n_nns_eligible", "dropped"}) {
    CHECK(metrics.contains(key));
  }
}

TEST_CASE("eval on collapsed groups scores 1") {
  std::string dir = tmp_path("cli_collapsed");
  std::filesystem::create_directories(dir);
  {
    std::ofstream emb(dir + "/e.vec"), lab(dir + "/l.tsv");
    emb << "6 3\n";
    const char* vec[] = {"1 0 0", "0 1 0", "0 0 1"};
    for (int g = 0; g < 3; ++g) {
      for (int i = 0; i < 2; ++i) {
        emb << "c" << g << i << ' ' << vec[g] << '\n';
        lab << "c" << g << i << "\tg" << g << '\n';
      }
    }
    lab << "unknown\tg9\n";
  }
  auto ev = run({"eval", "--embeddings", dir + "/e.vec", "--clusters", dir + "/l.tsv",
                 "--neighbors", dir + "/l.tsv"});
  REQUIRE(ev.code == 0);
  auto m = nlohmann::json::parse(ev.out);
  CHECK(m["nmi"].get<double>() == doctest::Approx(1.0));
  CHECK(m["p_at_1"].get<double>() == 1.0);
  CHECK(m["dropped"] == 2);
}

TEST_CASE("sweep emits one row per setting") {
  auto dir = small_synth("cli_sweep");
  auto r = run({"sweep", "--corpus", dir + "/corpus.tsv", "--clusters", dir + "/clusters.tsv",
                "--neighbors", dir + "/neighbors.tsv", "--param", "scope", "--values", "2,6",
                "--modes", "mce,cbow", "--dim", "8", "--epochs", "1", "--restarts", "2"});
  REQUIRE(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 5);
  CHECK(r.out.rfind("mode,param,value,nmi,p_at_1", 0) == 0);
  CHECK(r.out.find("cbow,scope,6,") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == mce::cli::kExitUsage);
  CHECK(run({"train", "--bogus"}).code == mce::cli::kExitUsage);
  CHECK(run({"train", "--corpus", "/nonexistent/c.tsv", "--embeddings", tmp_path("x.vec")}).code ==
        mce::cli::kExitUsage);
  std::string bad = tmp_path("bad.tsv");
  {
    std::ofstream f(bad);
    f << "p\t0\tA\np\t-1\tB\n";
  }
  auto r = run({"train", "--corpus", bad, "--embeddings", tmp_path("bad.vec")});
  CHECK(r.code == mce::cli::kExitData);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK(run({"train", "--help"}).code == mce::cli::kExitOk);
}

TEST_CASE("help lists flags with published defaults") {
  auto r = run({"train", "--help"});
  for (auto flag : {"--dim", "--scope", "--gamma", "--negative", "--alpha", "--epochs",
                    "--min-count", "--sample", "--time-unit", "--threads", "--seed", "--mode"}) {
    CHECK(r.out.find(flag) != std::string::npos);
  }
  CHECK(r.out.find("0.025") != std::string::npos);
  CHECK(r.out.find("0.0001") != std::string::npos);
}

}  // TEST_SUITE

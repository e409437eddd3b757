#include <doctest.h>

#include <sstream>

#include "mce/error.hpp"
#include "mce/io.hpp"
#include "mce/random.hpp"

using namespace mce;

TEST_SUITE("io") {

TEST_CASE("embedding file layout") {
  ModelParams<float> p(2, 3, 1);
  p.input = {0.5f, -1.0f, 0.25f, 0.0f, 1e-7f, 3.0f};
  std::ostringstream out;
  write_embeddings(out, {"A", "B"}, p);
  CHECK(out.str() == "2 3\nA 0.5 -1 0.25\nB 0 1e-07 3\n");

  std::istringstream in(out.str());
  auto e = read_embeddings(in);
  CHECK(e.codes == std::vector<std::string>{"A", "B"});
  CHECK(e.vectors.row(1)[1] == doctest::Approx(1e-7));

  std::ostringstream outputs;
  p.output = {1, 2, 3, 4, 5, 6};
  write_embeddings(outputs, {"A", "B"}, p, VectorSet::output);
  CHECK(outputs.str() == "2 3\nA 1 2 3\nB 4 5 6\n");

  std::istringstream bad("2 3\nA 1 2\n");
  CHECK_THROWS_AS(read_embeddings(bad), ParseError);
}

TEST_CASE("float text round trip is exact (property)") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    float x = static_cast<float>((uniform01(rng) - 0.5) * std::pow(10.0, uniform_index(rng, 12) - 6.0));
    CHECK(std::stof(format_real(x)) == x);
  }
}

TEST_CASE("attention csv") {
  ModelParams<double> p(2, 2, 1);
  std::ostringstream out;
  write_attention_csv(out, {"A", "B"}, p);
  std::string third = format_real(1.0 / 3);
  CHECK(out.str() == "code,delta_-1,delta_0,delta_1\nA," + third + "," + third + "," + third +
                         "\nB," + third + "," + third + "," + third + "\n");
}

TEST_CASE("model save/load is bit exact") {
  auto p = init_params<float>(4, 3, 2, 9);
  Rng rng(2);
  for (auto& x : p.output) x = static_cast<float>(uniform01(rng));
  for (auto& x : p.attn_score) x = static_cast<float>(uniform01(rng) - 0.5);
  for (auto& x : p.attn_bias) x = static_cast<float>(uniform01(rng) - 0.5);
  std::vector<std::string> codes{"w", "x", "y", "z"};
  std::stringstream s;
  save_model(s, codes, p);
  auto m = load_model(s);
  CHECK(m.codes == codes);
  CHECK(m.params == p);
  std::istringstream junk("not a model\n");
  CHECK_THROWS_AS(load_model(junk), ParseError);
}

}  // TEST_SUITE

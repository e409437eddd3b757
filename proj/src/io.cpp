#include "mce/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mce/error.hpp"

namespace mce {

namespace {

template <typename Real>
std::string shortest(Real x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw InvariantError("number formatting failed");
  return std::string(buf, ptr);
}

template <typename Real>
Real parse_real(std::string_view s, std::size_t lineno) {
  Real x{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(lineno, "bad number '" + std::string(s) + "'");
  }
  return x;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename Real>
void write_rows(std::ostream& out, const std::vector<std::string>& codes,
                const std::vector<Real>& data, std::size_t width) {
  for (std::size_t i = 0; i < codes.size(); ++i) {
    out << codes[i];
    for (std::size_t j = 0; j < width; ++j) out << ' ' << shortest(data[i * width + j]);
    out << '\n';
  }
}

void read_rows(std::istream& in, std::size_t& lineno, std::vector<std::string>* codes,
               std::vector<float>& data, std::size_t rows, std::size_t width) {
  std::string line;
  data.resize(rows * width);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw DataError("model file truncated");
    ++lineno;
    auto fields = split(line, ' ');
    if (fields.size() != width + 1) throw ParseError(lineno, "wrong number of fields");
    if (codes) codes->emplace_back(fields[0]);
    for (std::size_t j = 0; j < width; ++j) {
      data[i * width + j] = parse_real<float>(fields[j + 1], lineno);
    }
  }
}

void expect_line(std::istream& in, std::size_t& lineno, const std::string& want) {
  std::string line;
  if (!std::getline(in, line) || line != want) {
    throw ParseError(lineno + 1, "expected '" + want + "'");
  }
  ++lineno;
}

}  // namespace

std::string format_real(float x) { return shortest(x); }
std::string format_real(double x) { return shortest(x); }

template <typename Real>
void write_embeddings(std::ostream& out, const std::vector<std::string>& codes,
                      const ModelParams<Real>& params, VectorSet which) {
  if (codes.size() != params.vocab_size) throw UsageError("codes/parameters size mismatch");
  out << params.vocab_size << ' ' << params.dim << '\n';
  write_rows(out, codes, which == VectorSet::input ? params.input : params.output, params.dim);
}

Embeddings read_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing embedding header");
  std::istringstream header(line);
  std::size_t n = 0, d = 0;
  if (!(header >> n >> d) || d == 0) throw ParseError(1, "expected '<count> <dim>' header");
  Embeddings e{{}, Matrix(n, d)};
  e.codes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw DataError("embedding file truncated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split(line, ' ');
    if (fields.size() != d + 1 || fields[0].empty()) {
      throw ParseError(i + 2, "expected code and " + std::to_string(d) + " values");
    }
    e.codes.emplace_back(fields[0]);
    for (std::size_t j = 0; j < d; ++j) e.vectors.row(i)[j] = parse_real<double>(fields[j + 1], i + 2);
  }
  return e;
}

Embeddings read_embeddings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file '" + path + "'");
  return read_embeddings(in);
}

template <typename Real>
void write_attention_csv(std::ostream& out, const std::vector<std::string>& codes,
                         const ModelParams<Real>& params) {
  if (codes.size() != params.vocab_size) throw UsageError("codes/parameters size mismatch");
  out << "code";
  for (int delta = -params.scope; delta <= params.scope; ++delta) out << ",delta_" << delta;
  out << '\n';
  for (const auto& profile : export_profiles(params)) {
    out << codes[profile.code];
    for (double w : profile.weights) out << ',' << shortest(w);
    out << '\n';
  }
}

void save_model(std::ostream& out, const std::vector<std::string>& codes,
                const ModelParams<float>& params) {
  if (codes.size() != params.vocab_size) throw UsageError("codes/parameters size mismatch");
  out << "mce-model 1\n" << params.vocab_size << ' ' << params.dim << ' ' << params.scope << '\n';
  out << "[input]\n";
  write_rows(out, codes, params.input, params.dim);
  out << "[output]\n";
  write_rows(out, codes, params.output, params.dim);
  out << "[attention]\n";
  write_rows(out, codes, params.attn_score, params.slots());
  out << "[bias]\n";
  write_rows(out, std::vector<std::string>{"b"}, params.attn_bias, params.slots());
}

SavedModel load_model(std::istream& in) {
  std::size_t lineno = 0;
  expect_line(in, lineno, "mce-model 1");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(2, "missing model dimensions");
  ++lineno;
  std::istringstream dims(line);
  std::size_t n = 0, d = 0;
  int s = -1;
  if (!(dims >> n >> d >> s) || n == 0 || d == 0 || s < 0) {
    throw ParseError(lineno, "expected '<count> <dim> <scope>'");
  }
  SavedModel m{{}, ModelParams<float>(n, d, s)};
  expect_line(in, lineno, "[input]");
  read_rows(in, lineno, &m.codes, m.params.input, n, d);
  expect_line(in, lineno, "[output]");
  read_rows(in, lineno, nullptr, m.params.output, n, d);
  expect_line(in, lineno, "[attention]");
  read_rows(in, lineno, nullptr, m.params.attn_score, n, m.params.slots());
  expect_line(in, lineno, "[bias]");
  read_rows(in, lineno, nullptr, m.params.attn_bias, 1, m.params.slots());
  return m;
}

template void write_embeddings<float>(std::ostream&, const std::vector<std::string>&,
                                      const ModelParams<float>&, VectorSet);
template void write_embeddings<double>(std::ostream&, const std::vector<std::string>&,
                                       const ModelParams<double>&, VectorSet);
template void write_attention_csv<float>(std::ostream&, const std::vector<std::string>&,
                                         const ModelParams<float>&);
template void write_attention_csv<double>(std::ostream&, const std::vector<std::string>&,
                                          const ModelParams<double>&);

}  // namespace mce

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mce/eval.hpp"
#include "mce/model.hpp"

namespace mce {

// Shortest decimal text that reads back to the same value.
std::string format_real(float x);
std::string format_real(double x);

enum class VectorSet { input, output };

/// `<|C|> <d>` header then `code v1 ... vd` per line in vocabulary order.
template <typename Real>
void write_embeddings(std::ostream& out, const std::vector<std::string>& codes,
                      const ModelParams<Real>& params, VectorSet which = VectorSet::input);

struct Embeddings {
  std::vector<std::string> codes;
  Matrix vectors;
};

Embeddings read_embeddings(std::istream& in);
Embeddings read_embeddings_file(const std::string& path);

/// CSV with header `code,delta_-S,...,delta_S` and one normalized profile per code.
template <typename Real>
void write_attention_csv(std::ostream& out, const std::vector<std::string>& codes,
                         const ModelParams<Real>& params);

/// Full parameter dump (v, v', m, b) that reloads bit-exactly.
void save_model(std::ostream& out, const std::vector<std::string>& codes,
                const ModelParams<float>& params);

struct SavedModel {
  std::vector<std::string> codes;
  ModelParams<float> params;
};

SavedModel load_model(std::istream& in);

}  // namespace mce

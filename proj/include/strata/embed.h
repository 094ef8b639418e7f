#ifndef STRATA_EMBED_H_
#define STRATA_EMBED_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "strata/lexicon.h"
#include "strata/random.h"
#include "strata/textnorm.h"

namespace strata::embed {

// Skip-gram with negative sampling. Defaults for everything except dim and
// window are the usual word2vec values.
struct EmbedConfig {
  int dim = 200;
  // Context tokens on each side; the full window is always used.
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  // Decays linearly to min_step_size over the whole run.
  double initial_step_size = 0.025;
  double min_step_size = 1e-4;
  // 0 disables frequent-word subsampling.
  double subsample_threshold = 1e-3;
  double noise_power = 0.75;
  uint64_t seed = 1;
  // 1 is deterministic. More workers update shared rows without locking.
  int workers = 1;

  // Throws ConfigError.
  void validate() const;
};

// Samples vocabulary ids with probability proportional to count^power.
class NoiseSampler {
 public:
  NoiseSampler(const textnorm::Vocabulary& vocab, double power);

  int32_t operator()(Rng& rng) { return dist_(rng); }
  std::vector<double> probabilities() const { return dist_.probabilities(); }

 private:
  std::discrete_distribution<int32_t> dist_;
};

NoiseSampler build_noise_table(const textnorm::Vocabulary& vocab,
                               double noise_power);

// loss = -[log s(u.v) + sum_j log s(-u.n_j)] and its exact gradients with
// respect to the center vector u, the context vector v and every negative
// n_j.
struct SgnsResult {
  double loss = 0.0;
  std::vector<double> grad_center;
  std::vector<double> grad_context;
  std::vector<std::vector<double>> grad_negatives;
};

SgnsResult sgns_loss_grad(std::span<const double> center,
                          std::span<const double> context,
                          std::span<const std::vector<double>> negatives);

// Numerically stable log(sigmoid(x)).
double log_sigmoid(double x);

// Row-major float matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  std::span<float> row(size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const float> row(size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<float> data_;
};

struct EmbeddingModel {
  std::vector<std::string> surfaces;
  std::unordered_map<std::string, int32_t> index;
  // The word vectors.
  Matrix input;
  // Output vectors; empty for a model loaded from file.
  Matrix context;
  EmbedConfig config;

  size_t dim() const { return input.cols(); }
  size_t size() const { return surfaces.size(); }
  std::optional<int32_t> id(std::string_view surface) const;
};

// Called after each epoch with the 1-based epoch number.
using EpochCallback = std::function<void(int, const EmbeddingModel&)>;

// Throws ConfigError for invalid configs and DataError for an empty stream
// or a stream that does not match the vocabulary.
EmbeddingModel train(const textnorm::TokenStream& stream,
                     const textnorm::Vocabulary& vocab,
                     const EmbedConfig& config,
                     const EpochCallback& on_epoch = {});

// Word vector for `surface`, resolving lexicon variants to their main
// surface first when a lexicon is given.
std::optional<std::vector<double>> vector(
    const EmbeddingModel& model, std::string_view surface,
    const lexicon::Lexicon* lexicon = nullptr);

// u.v / (|u||v|). Throws UndefinedError for a zero vector.
double cosine(std::span<const double> u, std::span<const double> v);
double cosine(std::span<const float> u, std::span<const float> v);

// Header "dim<TAB>|V|", then "surface<TAB>v1<TAB>...<TAB>vdim" per word.
// Floats are written in shortest round-trip form.
void save_model(const EmbeddingModel& model, std::ostream& out);
void save_model(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_model(std::istream& in);
EmbeddingModel load_model(const std::filesystem::path& path);

}  // namespace strata::embed

#endif  // STRATA_EMBED_H_

#include "strata/embed.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "strata/error.h"

namespace strata::embed {

void EmbedConfig::validate() const {
  if (dim < 1) throw ConfigError("embed.dim must be >= 1");
  if (window < 1) throw ConfigError("embed.window must be >= 1");
  if (negatives < 1) throw ConfigError("embed.negatives must be >= 1");
  if (epochs < 1) throw ConfigError("embed.epochs must be >= 1");
  if (!(initial_step_size > 0) || !(min_step_size >= 0) ||
      min_step_size > initial_step_size) {
    throw ConfigError("embed step sizes must satisfy 0 <= min <= initial, initial > 0");
  }
  if (!(subsample_threshold >= 0)) {
    throw ConfigError("embed.subsample_threshold must be >= 0");
  }
  if (!std::isfinite(noise_power) || noise_power < 0) {
    throw ConfigError("embed.noise_power must be finite and >= 0");
  }
  if (workers < 1) throw ConfigError("embed.workers must be >= 1");
}

NoiseSampler::NoiseSampler(const textnorm::Vocabulary& vocab, double power) {
  if (vocab.empty()) throw DataError("noise table needs a non-empty vocabulary");
  std::vector<double> weights;
  weights.reserve(vocab.size());
  for (const auto& entry : vocab.entries()) {
    weights.push_back(std::pow(static_cast<double>(entry.count), power));
  }
  dist_ = std::discrete_distribution<int32_t>(weights.begin(), weights.end());
}

NoiseSampler build_noise_table(const textnorm::Vocabulary& vocab,
                               double noise_power) {
  return NoiseSampler(vocab, noise_power);
}

double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  double sum = 0;
  for (size_t i = 0; i < a.size(); ++i) sum += static_cast<double>(a[i]) * b[i];
  return sum;
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw DataError(fmt::format("sgns_loss_grad: non-finite {} vector", what));
    }
  }
}

}  // namespace

SgnsResult sgns_loss_grad(std::span<const double> center,
                          std::span<const double> context,
                          std::span<const std::vector<double>> negatives) {
  const size_t dim = center.size();
  if (context.size() != dim) throw DataError("sgns_loss_grad: length mismatch");
  require_finite(center, "center");
  require_finite(context, "context");
  for (const auto& n : negatives) {
    if (n.size() != dim) throw DataError("sgns_loss_grad: length mismatch");
    require_finite(n, "negative");
  }

  SgnsResult result;
  result.grad_center.assign(dim, 0.0);
  result.grad_context.assign(dim, 0.0);

  // d/dx -log s(x) = -(1 - s(x)); d/dx -log s(-x) = s(x).
  const double pos = dot(center, context);
  result.loss = -log_sigmoid(pos);
  const double pos_coef = -(1.0 - sigmoid(pos));
  for (size_t k = 0; k < dim; ++k) {
    result.grad_center[k] += pos_coef * context[k];
    result.grad_context[k] = pos_coef * center[k];
  }
  for (const auto& n : negatives) {
    const double neg = dot(center, std::span<const double>(n));
    result.loss -= log_sigmoid(-neg);
    const double neg_coef = sigmoid(neg);
    std::vector<double> grad(dim);
    for (size_t k = 0; k < dim; ++k) {
      result.grad_center[k] += neg_coef * n[k];
      grad[k] = neg_coef * center[k];
    }
    result.grad_negatives.push_back(std::move(grad));
  }
  return result;
}

std::optional<int32_t> EmbeddingModel::id(std::string_view surface) const {
  auto it = index.find(std::string(surface));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

namespace {

// Element access for the training kernel. The shared variant is used when
// several workers update the same rows without locks.
template <bool kShared>
struct Cell {
  static float load(float& x) {
    if constexpr (kShared) {
      return std::atomic_ref<float>(x).load(std::memory_order_relaxed);
    } else {
      return x;
    }
  }
  static void add(float& x, float delta) {
    if constexpr (kShared) {
      std::atomic_ref<float> ref(x);
      ref.store(ref.load(std::memory_order_relaxed) + delta,
                std::memory_order_relaxed);
    } else {
      x += delta;
    }
  }
};

class Trainer {
 public:
  Trainer(const textnorm::TokenStream& stream, const textnorm::Vocabulary& vocab,
          const EmbedConfig& config, EmbeddingModel& model)
      : stream_(stream), config_(config), model_(model),
        noise_(vocab, config.noise_power) {
    uint64_t stream_tokens = 0;
    for (const auto& sentence : stream) stream_tokens += sentence.size();
    total_work_ = stream_tokens * static_cast<uint64_t>(config.epochs);

    uint64_t vocab_total = 0;
    for (const auto& entry : vocab.entries()) vocab_total += entry.count;
    keep_prob_.assign(vocab.size(), 1.0);
    if (config.subsample_threshold > 0) {
      const double t = config.subsample_threshold;
      for (size_t i = 0; i < vocab.size(); ++i) {
        const double f =
            static_cast<double>(vocab.count(static_cast<int32_t>(i))) / vocab_total;
        keep_prob_[i] = std::min(1.0, (std::sqrt(f / t) + 1.0) * t / f);
      }
    }
  }

  template <bool kShared>
  void run(size_t begin, size_t end, uint64_t seed) {
    Rng rng(seed);
    NoiseSampler noise = noise_;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const size_t dim = model_.dim();
    const int window = config_.window;
    std::vector<int32_t> kept;
    std::vector<float> hidden_grad(dim);

    for (size_t s = begin; s < end; ++s) {
      const auto& sentence = stream_[s];
      const double progress =
          total_work_ == 0 ? 0.0
                           : static_cast<double>(processed_.load(std::memory_order_relaxed)) /
                                 static_cast<double>(total_work_);
      const float lr = static_cast<float>(std::max(
          config_.min_step_size,
          config_.initial_step_size -
              (config_.initial_step_size - config_.min_step_size) * progress));

      kept.clear();
      for (int32_t id : sentence) {
        if (keep_prob_[id] >= 1.0 || uniform(rng) < keep_prob_[id]) kept.push_back(id);
      }
      const int n = static_cast<int>(kept.size());
      for (int i = 0; i < n; ++i) {
        auto center = model_.input.row(kept[i]);
        const int lo = std::max(0, i - window);
        const int hi = std::min(n - 1, i + window);
        for (int j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const int32_t target = kept[j];
          std::fill(hidden_grad.begin(), hidden_grad.end(), 0.0f);
          update<kShared>(center, target, 1.0f, lr, hidden_grad);
          for (int k = 0; k < config_.negatives; ++k) {
            const int32_t negative = noise(rng);
            if (negative == target) continue;
            update<kShared>(center, negative, 0.0f, lr, hidden_grad);
          }
          for (size_t d = 0; d < dim; ++d) Cell<kShared>::add(center[d], hidden_grad[d]);
        }
      }
      processed_.fetch_add(sentence.size(), std::memory_order_relaxed);
    }
  }

 private:
  // One logistic term of the SGNS objective: moves the output row and
  // accumulates the center-row step into hidden_grad.
  template <bool kShared>
  void update(std::span<float> center, int32_t output_id, float label, float lr,
              std::vector<float>& hidden_grad) {
    auto output = model_.context.row(output_id);
    const size_t dim = center.size();
    double f = 0;
    for (size_t d = 0; d < dim; ++d) {
      f += static_cast<double>(Cell<kShared>::load(center[d])) *
           Cell<kShared>::load(output[d]);
    }
    const float g = static_cast<float>((label - sigmoid(f)) * lr);
    for (size_t d = 0; d < dim; ++d) {
      const float c = Cell<kShared>::load(center[d]);
      hidden_grad[d] += g * Cell<kShared>::load(output[d]);
      Cell<kShared>::add(output[d], g * c);
    }
  }

  const textnorm::TokenStream& stream_;
  const EmbedConfig& config_;
  EmbeddingModel& model_;
  NoiseSampler noise_;
  std::vector<double> keep_prob_;
  uint64_t total_work_ = 0;
  std::atomic<uint64_t> processed_{0};
};

}  // namespace

EmbeddingModel train(const textnorm::TokenStream& stream,
                     const textnorm::Vocabulary& vocab,
                     const EmbedConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  size_t tokens = 0;
  for (const auto& sentence : stream) {
    for (int32_t id : sentence) {
      if (id < 0 || static_cast<size_t>(id) >= vocab.size()) {
        throw DataError(fmt::format("token id {} outside vocabulary of size {}",
                                    id, vocab.size()));
      }
    }
    tokens += sentence.size();
  }
  if (tokens == 0) throw DataError("cannot train embeddings on an empty stream");

  EmbeddingModel model;
  model.config = config;
  model.surfaces.reserve(vocab.size());
  for (size_t i = 0; i < vocab.size(); ++i) {
    model.surfaces.push_back(vocab.surface(static_cast<int32_t>(i)));
    model.index.emplace(model.surfaces.back(), static_cast<int32_t>(i));
  }
  const auto dim = static_cast<size_t>(config.dim);
  model.input = Matrix(vocab.size(), dim);
  model.context = Matrix(vocab.size(), dim);
  {
    Rng rng(split_mix(config.seed, 0));
    const float bound = 0.5f / static_cast<float>(dim);
    std::uniform_real_distribution<float> init(-bound, bound);
    for (float& x : model.input.data()) x = init(rng);
  }

  Trainer trainer(stream, vocab, config, model);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const uint64_t epoch_seed = split_mix(config.seed, static_cast<uint64_t>(epoch));
    if (config.workers == 1) {
      trainer.run<false>(0, stream.size(), split_mix(epoch_seed, 0));
    } else {
      const size_t workers = static_cast<size_t>(config.workers);
      std::vector<std::jthread> threads;
      for (size_t w = 0; w < workers; ++w) {
        const size_t begin = stream.size() * w / workers;
        const size_t end = stream.size() * (w + 1) / workers;
        threads.emplace_back([&trainer, begin, end, epoch_seed, w] {
          trainer.run<true>(begin, end, split_mix(epoch_seed, w));
        });
      }
    }
    if (on_epoch) on_epoch(epoch, model);
  }
  for (float x : model.input.data()) {
    if (!std::isfinite(x)) throw std::runtime_error("embedding training diverged");
  }
  return model;
}

std::optional<std::vector<double>> vector(const EmbeddingModel& model,
                                          std::string_view surface,
                                          const lexicon::Lexicon* lexicon) {
  std::optional<int32_t> id;
  if (lexicon != nullptr) {
    id = model.id(lexicon->canonical(surface));
  } else {
    id = model.id(surface);
  }
  if (!id) return std::nullopt;
  const auto row = model.input.row(*id);
  return std::vector<double>(row.begin(), row.end());
}

namespace {

template <typename T>
double cosine_impl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) throw DataError("cosine: length mismatch");
  const double uu = dot(u, u);
  const double vv = dot(v, v);
  if (!(uu > 0) || !(vv > 0)) {
    throw UndefinedError("cosine similarity is undefined for a zero vector");
  }
  const double c = dot(u, v) / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
  return cosine_impl(u, v);
}

double cosine(std::span<const float> u, std::span<const float> v) {
  return cosine_impl(u, v);
}

void save_model(const EmbeddingModel& model, std::ostream& out) {
  out << model.dim() << '\t' << model.size() << '\n';
  std::string line;
  for (size_t i = 0; i < model.size(); ++i) {
    line = model.surfaces[i];
    for (float x : model.input.row(i)) fmt::format_to(std::back_inserter(line), "\t{}", x);
    line += '\n';
    out << line;
  }
}

void save_model(const EmbeddingModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  save_model(model, out);
}

EmbeddingModel load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("model file: missing header");
  size_t dim = 0;
  size_t rows = 0;
  {
    std::istringstream header(line);
    if (!(header >> dim >> rows) || dim == 0) {
      throw DataError("model file: header must be 'dim<TAB>|V|'");
    }
  }
  EmbeddingModel model;
  model.config.dim = static_cast<int>(dim);
  model.input = Matrix(rows, dim);
  model.surfaces.reserve(rows);
  for (size_t i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw DataError(fmt::format("model file: expected {} rows, got {}", rows, i));
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(fmt::format("model file: row {} has no vector", i + 1));
    }
    std::string surface = line.substr(0, tab);
    auto row = model.input.row(i);
    const char* p = line.c_str() + tab + 1;
    for (size_t d = 0; d < dim; ++d) {
      char* next = nullptr;
      row[d] = std::strtof(p, &next);
      if (next == p) {
        throw DataError(fmt::format("model file: row {} has fewer than {} values",
                                    i + 1, dim));
      }
      p = next;
    }
    if (!model.index.emplace(surface, static_cast<int32_t>(i)).second) {
      throw DataError(fmt::format("model file: duplicate surface '{}'", surface));
    }
    model.surfaces.push_back(std::move(surface));
  }
  return model;
}

EmbeddingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open model {}", path.string()));
  return load_model(in);
}

}  // namespace strata::embed

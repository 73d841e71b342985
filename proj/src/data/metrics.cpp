#include "rsak/data/metrics.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include "rsak/data/scenario.hpp"
#include "rsak/model/model.hpp"
#include "rsak/training/loss.hpp"

namespace rsak::data {

Metrics compute_metrics(std::span<const VQASample> samples, std::span<const int> predictions,
                        std::size_t n_answers) {
  if (samples.size() != predictions.size())
    throw std::invalid_argument("compute_metrics: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(samples.size()) +
                                " samples");
  Metrics m;
  m.confusion.assign(n_answers, std::vector<std::size_t>(n_answers, 0));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int truth = samples[i].answer;
    const int pred = predictions[i];
    if (truth < 0 || static_cast<std::size_t>(truth) >= n_answers ||
        pred < 0 || static_cast<std::size_t>(pred) >= n_answers)
      throw std::out_of_range("compute_metrics: class id outside [0, " +
                              std::to_string(n_answers) + ") at sample " + std::to_string(i));
    ++m.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
    TypeTally& t = m.per_type[static_cast<std::size_t>(samples[i].qtype)];
    ++t.total;
    ++m.total;
    if (truth == pred) {
      ++t.correct;
      ++m.correct;
    }
  }
  std::size_t types = 0;
  double sum = 0.0;
  for (const TypeTally& t : m.per_type) {
    if (t.total == 0) continue;
    ++types;
    sum += t.accuracy();
  }
  m.average_accuracy = types ? sum / static_cast<double>(types) : 0.0;
  m.overall_accuracy = m.total ? static_cast<double>(m.correct) / m.total : 0.0;
  return m;
}

namespace {

std::size_t thread_budget() {
  const char* env = std::getenv("RSAK_THREADS");
  if (!env) return 1;
  const long n = std::strtol(env, nullptr, 10);
  return n > 1 ? static_cast<std::size_t>(n) : 1;
}

}  // namespace

std::vector<int> predict(const model::Model& model, std::span<const VQASample> samples,
                         std::size_t chunk) {
  chunk = std::max<std::size_t>(chunk, 1);
  std::vector<int> out(samples.size());
  const std::size_t n_chunks = (samples.size() + chunk - 1) / chunk;
  auto run = [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t len = std::min(chunk, samples.size() - begin);
    const auto pred = train::argmax_rows(model.forward(samples.subspan(begin, len)).logits);
    std::copy(pred.begin(), pred.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
  };
  const std::size_t workers = std::min(thread_budget(), n_chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run(c);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < n_chunks; c += workers) run(c);
    });
  for (auto& t : pool) t.join();
  return out;
}

Metrics evaluate(const model::Model& model, std::span<const VQASample> samples) {
  const auto pred = predict(model, samples);
  return compute_metrics(samples, pred, model.config().n_answers);
}

Metrics evaluate(const model::Model& model, const Dataset& samples, Scenario scenario,
                 std::uint64_t seed) {
  const Dataset view = apply_scenario(samples, scenario, seed);
  return evaluate(model, view);
}

std::string format_metrics(const Metrics& m) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  for (QuestionType t : kQuestionTypes)
    if (m.has_type(t))
      os << to_string(t) << '\t' << m.tally(t).accuracy() << '\t' << m.tally(t).correct << '/'
         << m.tally(t).total << '\n';
  os << "AA\t" << m.average_accuracy << '\n';
  os << "OA\t" << m.overall_accuracy << '\t' << m.correct << '/' << m.total << '\n';
  return os.str();
}

}  // namespace rsak::data

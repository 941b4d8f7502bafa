#include "expressml/ranking.hpp"

#include <algorithm>
#include <numeric>

#include "expressml/error.hpp"

namespace expressml {

const char* to_string(RankingSource source) noexcept {
  switch (source) {
    case RankingSource::RF: return "RF";
    case RankingSource::GBM: return "GBM";
    case RankingSource::Combined: return "COMBINED";
  }
  return "?";
}

std::vector<std::string> ImportanceRanking::top(std::size_t k) const {
  std::vector<std::string> names;
  const std::size_t take = std::min(k, entries.size());
  names.reserve(take);
  for (std::size_t i = 0; i < take; ++i) names.push_back(entries[i].first);
  return names;
}

void normalize_scores(std::span<double> scores) {
  double total = 0.0;
  for (double s : scores) total += s;
  if (total <= 0.0) return;
  for (double& s : scores) s /= total;
}

ImportanceRanking make_ranking(RankingSource source, std::span<const std::string> gene_names,
                               std::span<const double> raw_scores) {
  if (gene_names.size() != raw_scores.size()) {
    throw Error(ErrorCode::LengthMismatch, "importance vector does not match the gene table");
  }
  std::vector<double> scores(raw_scores.begin(), raw_scores.end());
  normalize_scores(scores);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return gene_names[a] < gene_names[b];
  });
  ImportanceRanking ranking;
  ranking.source = source;
  ranking.entries.reserve(order.size());
  for (std::size_t i : order) ranking.entries.emplace_back(gene_names[i], scores[i]);
  return ranking;
}

}  // namespace expressml

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace expressml {

enum class RankingSource { RF, GBM, Combined };

const char* to_string(RankingSource source) noexcept;

/// Genes ordered by normalized importance (descending, ties alphabetical).
/// Scores are nonnegative and sum to 1, or are all zero when no split used
/// any gene.
struct ImportanceRanking {
  RankingSource source = RankingSource::RF;
  std::vector<std::pair<std::string, double>> entries;

  std::vector<std::string> top(std::size_t k) const;

  friend bool operator==(const ImportanceRanking&, const ImportanceRanking&) = default;
};

/// Normalizes raw per-gene scores and sorts them into a ranking.
ImportanceRanking make_ranking(RankingSource source, std::span<const std::string> gene_names,
                               std::span<const double> raw_scores);

/// Rescales `scores` in place to sum to 1; leaves an all-zero vector alone.
void normalize_scores(std::span<double> scores);

}  // namespace expressml

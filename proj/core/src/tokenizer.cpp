#include "drivelab/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "drivelab/error.hpp"
#include "drivelab/rng.hpp"

namespace drivelab {
namespace {

// Mean pointwise distance that gives up once the partial sum exceeds
// `bound` (scaled by the segment length). Returns +inf in that case.
double bounded_distance(const Segment& a, const Segment& b, double bound) {
  const double limit = bound * static_cast<double>(kSegmentLength);
  double total = 0.0;
  for (std::size_t k = 0; k < kSegmentLength; ++k) {
    const double dx = a[k].x - b[k].x;
    const double dy = a[k].y - b[k].y;
    total += std::sqrt(dx * dx + dy * dy);
    if (total > limit) return std::numeric_limits<double>::infinity();
  }
  return total / static_cast<double>(kSegmentLength);
}

std::array<double, 3 * kSegmentLength> key_of(const Segment& seg) {
  std::array<double, 3 * kSegmentLength> key{};
  for (std::size_t k = 0; k < kSegmentLength; ++k) {
    key[3 * k] = seg[k].x;
    key[3 * k + 1] = seg[k].y;
    key[3 * k + 2] = seg[k].yaw;
  }
  return key;
}

std::size_t count_distinct(const std::vector<Segment>& segments) {
  std::vector<std::array<double, 3 * kSegmentLength>> keys;
  keys.reserve(segments.size());
  for (const auto& s : segments) keys.push_back(key_of(s));
  std::sort(keys.begin(), keys.end());
  return static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
}

struct Assignment {
  std::vector<std::size_t> cluster;
  std::vector<double> distance;
  double total = 0.0;
};

Assignment assign(const std::vector<Segment>& segments, const std::vector<Segment>& centers) {
  Assignment out;
  out.cluster.resize(segments.size());
  out.distance.resize(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_id = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = bounded_distance(segments[i], centers[c], best);
      if (d < best) {
        best = d;
        best_id = c;
      }
    }
    out.cluster[i] = best_id;
    out.distance[i] = best;
    out.total += best;
  }
  return out;
}

Segment waypoint_mean(const std::vector<Segment>& segments, const std::vector<std::size_t>& members) {
  Segment mean{};
  const double n = static_cast<double>(members.size());
  for (std::size_t k = 0; k < kSegmentLength; ++k) {
    double sx = 0.0, sy = 0.0, sc = 0.0, ss = 0.0;
    for (std::size_t m : members) {
      const Waypoint& wp = segments[m][k];
      sx += wp.x;
      sy += wp.y;
      sc += std::cos(wp.yaw);
      ss += std::sin(wp.yaw);
    }
    mean[k] = {sx / n, sy / n, std::atan2(ss, sc)};
  }
  return canonicalize(mean);
}

std::vector<Segment> seed_centers(const std::vector<Segment>& segments, std::size_t k, Rng& rng) {
  std::vector<Segment> centers;
  centers.reserve(k);
  std::uniform_int_distribution<std::size_t> pick(0, segments.size() - 1);
  centers.push_back(segments[pick(rng)]);
  std::vector<double> nearest(segments.size(), std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      nearest[i] = std::min(nearest[i], mean_pointwise_distance(segments[i], centers.back()));
      total += nearest[i] * nearest[i];
    }
    // D^2 sampling; duplicates of chosen centers carry zero weight.
    double target = unit(rng) * total;
    std::size_t chosen = segments.size();
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const double w = nearest[i] * nearest[i];
      if (w <= 0.0) continue;
      chosen = i;
      if (target < w) break;
      target -= w;
    }
    centers.push_back(segments[chosen]);
  }
  return centers;
}

// Moves every empty cluster's center onto the segment currently farthest
// from its own center. Returns the number of clusters re-seeded.
std::size_t reseed_empty(const std::vector<Segment>& segments, std::vector<Segment>& centers,
                         Assignment& assignment) {
  std::vector<std::size_t> counts(centers.size(), 0);
  for (std::size_t c : assignment.cluster) ++counts[c];
  std::size_t reseeded = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (counts[c] != 0) continue;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (assignment.distance[i] > far_d) {
        far_d = assignment.distance[i];
        far = i;
      }
    }
    centers[c] = segments[far];
    --counts[assignment.cluster[far]];
    assignment.total -= assignment.distance[far];
    assignment.cluster[far] = c;
    assignment.distance[far] = 0.0;
    counts[c] = 1;
    ++reseeded;
  }
  return reseeded;
}

}  // namespace

Codebook::Codebook(std::vector<Segment> prototypes) : prototypes_(std::move(prototypes)) {
  if (prototypes_.empty() || prototypes_.size() > kMaxVocabulary) {
    throw VocabularyError("codebook size " + std::to_string(prototypes_.size()) +
                          " outside [1, " + std::to_string(kMaxVocabulary) + "]");
  }
  for (const Segment& p : prototypes_) {
    if (!is_canonical(p)) throw ContractError("codebook prototype is not canonical");
  }
  if (count_distinct(prototypes_) != prototypes_.size()) {
    throw ContractError("codebook prototypes are not pairwise distinct");
  }
  advances_.reserve(prototypes_.size());
  for (const Segment& p : prototypes_) advances_.push_back(segment_successor(p));
}

TokenId Codebook::nearest(const Segment& seg) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_id = 0;
  for (std::size_t c = 0; c < prototypes_.size(); ++c) {
    const double d = bounded_distance(seg, prototypes_[c], best);
    if (d < best) {
      best = d;
      best_id = c;
    }
  }
  return static_cast<TokenId>(best_id);
}

CodebookFit fit_codebook_traced(const std::vector<Segment>& segments, std::size_t k,
                                std::uint64_t seed, std::size_t max_iters) {
  if (k == 0 || k > kMaxVocabulary) {
    throw VocabularyError("vocabulary size " + std::to_string(k) + " outside [1, " +
                          std::to_string(kMaxVocabulary) + "]");
  }
  for (const Segment& s : segments) {
    if (!is_canonical(s)) throw ContractError("fit_codebook requires canonical segments");
  }
  if (segments.size() < k || count_distinct(segments) < k) {
    throw InsufficientDataError("need at least " + std::to_string(k) +
                                " distinct segments, got " + std::to_string(segments.size()));
  }

  Rng rng = make_rng(seed, {0x6b646973ULL});
  std::vector<Segment> centers = seed_centers(segments, k, rng);

  std::vector<double> objective;
  std::size_t reseeded = 0;
  Assignment assignment = assign(segments, centers);
  reseeded += reseed_empty(segments, centers, assignment);
  objective.push_back(assignment.total);

  std::size_t iter = 0;
  for (; iter < max_iters; ++iter) {
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < segments.size(); ++i) members[assignment.cluster[i]].push_back(i);

    bool moved = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (members[c].empty()) continue;
      Segment candidate = waypoint_mean(segments, members[c]);
      if (candidate == centers[c]) continue;
      // The mean is not the exact minimizer of a sum of unsquared distances,
      // so only take it when it does not raise this cluster's cost.
      double old_cost = 0.0, new_cost = 0.0;
      for (std::size_t m : members[c]) {
        old_cost += mean_pointwise_distance(segments[m], centers[c]);
        new_cost += mean_pointwise_distance(segments[m], candidate);
      }
      if (new_cost <= old_cost) {
        centers[c] = candidate;
        moved = true;
      }
    }

    Assignment next = assign(segments, centers);
    reseeded += reseed_empty(segments, centers, next);
    const bool same = next.cluster == assignment.cluster;
    assignment = std::move(next);
    objective.push_back(assignment.total);
    if (!moved && same) {
      ++iter;
      break;
    }
  }

  return CodebookFit{Codebook(std::move(centers)), std::move(objective), iter, reseeded};
}

Codebook fit_codebook(const std::vector<Segment>& segments, std::size_t k, std::uint64_t seed,
                      std::size_t max_iters) {
  return fit_codebook_traced(segments, k, seed, max_iters).codebook;
}

TokenSequence encode(const Trajectory& traj, const Codebook& codebook) {
  if (traj.empty()) throw ContractError("cannot encode an empty trajectory");
  const std::vector<Segment> segments = segment(traj);
  TokenSequence ids;
  ids.reserve(segments.size());
  Waypoint anchor = traj[0];
  for (const Segment& seg : segments) {
    Segment local;
    for (std::size_t k = 0; k < kSegmentLength; ++k) local[k] = relative(anchor, seg[k]);
    const TokenId id = codebook.nearest(local);
    ids.push_back(id);
    anchor = compose(anchor, codebook.advance(static_cast<std::size_t>(id)));
  }
  return ids;
}

Trajectory decode(const TokenSequence& ids, const Codebook& codebook, const Waypoint& start) {
  Trajectory out;
  out.waypoints.reserve(ids.size() * kSegmentLength);
  Waypoint anchor = start;
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= codebook.size()) {
      throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(codebook.size()));
    }
    const auto idx = static_cast<std::size_t>(id);
    for (const Waypoint& wp : codebook[idx]) out.waypoints.push_back(compose(anchor, wp));
    anchor = compose(anchor, codebook.advance(idx));
  }
  return out;
}

std::string serialize(const TokenSequence& ids) {
  std::string out;
  out.reserve(ids.size() * 10);
  char buf[16];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    std::snprintf(buf, sizeof buf, "TRAJ_%04d", static_cast<int>(ids[i]));
    out += buf;
  }
  return out;
}

ParseResult parse(std::string_view text) {
  ParseResult result;
  auto fail = [&](std::string_view token, std::string reason) {
    result.ids.clear();
    result.error = FormatError{std::string(token), std::move(reason)};
    return result;
  };
  if (text.empty()) return fail("", "empty prediction");

  std::size_t pos = 0;
  while (true) {
    const std::size_t end = std::min(text.find(' ', pos), text.size());
    const std::string_view token = text.substr(pos, end - pos);
    constexpr std::string_view kPrefix = "TRAJ_";
    if (token.size() != kPrefix.size() + 4 || token.substr(0, kPrefix.size()) != kPrefix) {
      return fail(token, "expected TRAJ_ followed by exactly 4 digits");
    }
    int value = 0;
    for (char ch : token.substr(kPrefix.size())) {
      if (ch < '0' || ch > '9') return fail(token, "non-digit in token id");
      value = value * 10 + (ch - '0');
    }
    if (value >= static_cast<int>(kMaxVocabulary)) {
      return fail(token, "token id above 2047");
    }
    result.ids.push_back(value);
    if (end == text.size()) break;
    pos = end + 1;
    if (pos == text.size()) return fail("", "trailing separator");
  }
  return result;
}

}  // namespace drivelab

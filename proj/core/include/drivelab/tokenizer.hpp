#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drivelab/geometry.hpp"

namespace drivelab {

// Largest vocabulary the `TRAJ_####` wire form can address.
inline constexpr std::size_t kMaxVocabulary = 2048;
inline constexpr std::size_t kDefaultVocabulary = 128;

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// Immutable set of canonical trajectory-segment prototypes. Token id i
// decodes to prototypes()[i].
class Codebook {
 public:
  // Throws ContractError unless every prototype is canonical and no two are
  // identical, and VocabularyError if the size is outside [1, kMaxVocabulary].
  explicit Codebook(std::vector<Segment> prototypes);

  std::size_t size() const { return prototypes_.size(); }
  const Segment& operator[](std::size_t id) const { return prototypes_[id]; }
  const std::vector<Segment>& prototypes() const { return prototypes_; }
  // Pose at which the segment following prototype `id` starts.
  const Waypoint& advance(std::size_t id) const { return advances_[id]; }

  // Nearest prototype by mean pointwise distance; ties go to the lowest id.
  TokenId nearest(const Segment& seg) const;

  friend bool operator==(const Codebook& a, const Codebook& b) {
    return a.prototypes_ == b.prototypes_;
  }

 private:
  std::vector<Segment> prototypes_;
  std::vector<Waypoint> advances_;
};

struct CodebookFit {
  Codebook codebook;
  // Total within-cluster contour distance after each Lloyd iteration,
  // starting with the seeded initialization.
  std::vector<double> objective;
  std::size_t iterations = 0;
  // Empty clusters that were re-seeded from the farthest segment.
  std::size_t reseeded = 0;
};

// Lloyd-style k-means under contour distance with k-means++ seeding.
// Deterministic in `seed`. Throws InsufficientDataError when fewer than k
// distinct segments are supplied.
CodebookFit fit_codebook_traced(const std::vector<Segment>& segments, std::size_t k,
                                std::uint64_t seed, std::size_t max_iters = 50);
Codebook fit_codebook(const std::vector<Segment>& segments, std::size_t k,
                      std::uint64_t seed, std::size_t max_iters = 50);

// Closed-loop greedy encoding: each ground-truth segment is matched in the
// frame of the pose the decoder will actually reach, so errors do not
// accumulate. The first waypoint anchors the sequence.
TokenSequence encode(const Trajectory& traj, const Codebook& codebook);

// Composes prototypes head-to-tail from `start`. Output has 5 * ids.size()
// waypoints. Throws VocabularyError on an out-of-range id.
Trajectory decode(const TokenSequence& ids, const Codebook& codebook, const Waypoint& start);

// `TRAJ_0042 TRAJ_2047`-style text.
std::string serialize(const TokenSequence& ids);

struct FormatError {
  std::string token;   // first offending token, possibly empty
  std::string reason;
};

struct ParseResult {
  TokenSequence ids;
  std::optional<FormatError> error;

  bool ok() const { return !error.has_value(); }
};

// Accepts one or more single-space-separated `TRAJ_dddd` tokens with value
// at most 2047. Anything else, including leading, trailing or doubled
// whitespace, yields a FormatError naming the first offending token.
ParseResult parse(std::string_view text);

}  // namespace drivelab

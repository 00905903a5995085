#include <drivelab/codebook_io.hpp>
#include <drivelab/error.hpp>
#include <drivelab/experiment.hpp>
#include <drivelab/sim.hpp>
#include <drivelab/tokenizer.hpp>

#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "support.hpp"

using namespace drivelab;

namespace {

Segment arc_segment(double speed, double yaw_rate) {
  Segment s;
  Waypoint p{};
  s[0] = p;
  for (std::size_t k = 1; k < kSegmentLength; ++k) {
    p = compose(p, {speed * kStepSeconds, 0.0, yaw_rate * kStepSeconds});
    s[k] = p;
  }
  return s;
}

Codebook separated_codebook() {
  std::vector<Segment> protos;
  for (double v : {2.0, 6.0, 10.0, 14.0}) {
    for (double w : {-0.4, 0.0, 0.4}) protos.push_back(arc_segment(v, w));
  }
  return Codebook(protos);
}

std::vector<Segment> canonical_segments(const std::vector<Trajectory>& corpus) {
  std::vector<Segment> out;
  for (const auto& t : corpus) {
    for (const auto& s : segment(t)) out.push_back(canonicalize(s));
  }
  return out;
}

}  // namespace

TEST(Codebook, RejectsBadPrototypes) {
  EXPECT_THROW(Codebook(std::vector<Segment>{}), VocabularyError);
  Segment s = arc_segment(5, 0);
  EXPECT_THROW(Codebook({s, s}), ContractError);
  Segment shifted = s;
  shifted[0].x = 0.5;
  EXPECT_THROW(Codebook({shifted}), ContractError);
}

TEST(FitCodebook, SingleClusterIsCanonicalMean) {
  Rng rng(1);
  std::vector<Segment> segs;
  for (int i = 0; i < 30; ++i) segs.push_back(canonicalize(test::random_segment(rng)));
  const Codebook cb = fit_codebook(segs, 1, 9);
  Segment mean{};
  for (const auto& s : segs) {
    for (std::size_t k = 0; k < 5; ++k) {
      mean[k].x += s[k].x / 30.0;
      mean[k].y += s[k].y / 30.0;
    }
  }
  // Yaw of the mean is not compared; only the contour matters.
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_NEAR(cb[0][k].x, mean[k].x, 1e-9);
    EXPECT_NEAR(cb[0][k].y, mean[k].y, 1e-9);
  }
}

TEST(FitCodebook, KEqualsCountGivesZeroObjective) {
  Rng rng(2);
  std::vector<Segment> segs;
  for (int i = 0; i < 12; ++i) segs.push_back(canonicalize(test::random_segment(rng)));
  const CodebookFit fit = fit_codebook_traced(segs, 12, 4);
  EXPECT_NEAR(fit.objective.back(), 0.0, 1e-12);
}

TEST(FitCodebook, RecoversSeparatedArchetypes) {
  std::vector<Segment> archetypes;
  for (double v : {1.0, 5.0, 9.0, 13.0}) {
    for (double w : {-0.3, 0.3}) archetypes.push_back(arc_segment(v, w));
  }
  Rng rng(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<Segment> segs;
  for (int i = 0; i < 200; ++i) {
    Segment s = archetypes[static_cast<std::size_t>(i) % 8];
    for (std::size_t k = 1; k < 5; ++k) {
      s[k].x += noise(rng);
      s[k].y += noise(rng);
    }
    segs.push_back(s);
  }
  const Codebook cb = fit_codebook(segs, 8, 11);
  for (const auto& proto : cb.prototypes()) {
    double best = 1e9;
    for (const auto& a : archetypes) best = std::min(best, contour_distance(proto, a));
    EXPECT_LT(best, 0.05);
  }
  // And every archetype is claimed by some prototype.
  for (const auto& a : archetypes) {
    double best = 1e9;
    for (const auto& proto : cb.prototypes()) best = std::min(best, contour_distance(proto, a));
    EXPECT_LT(best, 0.05);
  }
}

TEST(FitCodebook, ObjectiveNonIncreasingAndDeterministic) {
  const auto corpus = synthetic_corpus(21, 120);
  const auto segs = canonical_segments(corpus);
  const CodebookFit a = fit_codebook_traced(segs, 24, 5, 30);
  for (std::size_t i = 1; i < a.objective.size(); ++i) {
    EXPECT_LE(a.objective[i], a.objective[i - 1]) << "iteration " << i;
  }
  const CodebookFit b = fit_codebook_traced(segs, 24, 5, 30);
  EXPECT_EQ(a.codebook, b.codebook);
  EXPECT_EQ(a.objective, b.objective);
}

TEST(FitCodebook, InsufficientData) {
  Rng rng(4);
  std::vector<Segment> segs;
  for (int i = 0; i < 5; ++i) segs.push_back(canonicalize(test::random_segment(rng)));
  EXPECT_THROW(fit_codebook(segs, 6, 1), InsufficientDataError);
  std::vector<Segment> dup(10, segs[0]);
  EXPECT_THROW(fit_codebook(dup, 2, 1), InsufficientDataError);
}

TEST(Encode, RoundTripOnCodebookPoints) {
  const Codebook cb = separated_codebook();
  Rng rng(5);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(cb.size()) - 1);
  for (int trial = 0; trial < 50; ++trial) {
    TokenSequence ids(8);
    for (auto& id : ids) id = pick(rng);
    const Waypoint start{1.0, -2.0, 0.3};
    EXPECT_EQ(encode(decode(ids, cb, start), cb), ids);
  }
  const TokenSequence five{5, 5, 5};
  EXPECT_EQ(encode(decode(five, cb, Waypoint{}), cb), five);
}

TEST(Decode, EmptyAndSingleAndOutOfRange) {
  const Codebook cb = separated_codebook();
  EXPECT_TRUE(decode({}, cb, Waypoint{}).empty());
  const Trajectory one = decode({4}, cb, Waypoint{});
  ASSERT_EQ(one.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(one[k], cb[4][k]);
  EXPECT_THROW(decode({static_cast<TokenId>(cb.size())}, cb, Waypoint{}), VocabularyError);
  EXPECT_THROW(decode({-1}, cb, Waypoint{}), VocabularyError);
  EXPECT_THROW(encode(Trajectory{}, cb), ContractError);
}

TEST(Encode, LargerVocabularyReconstructsBetter) {
  const auto corpus = synthetic_corpus(33, 300);
  const auto segs = canonical_segments(corpus);
  const Codebook small = fit_codebook(segs, 8, 2, 30);
  const Codebook large = fit_codebook(segs, 32, 2, 30);
  const double e_small = reconstruction_error(corpus, small).mean_endpoint_error;
  const double e_large = reconstruction_error(corpus, large).mean_endpoint_error;
  EXPECT_LT(e_large, e_small);
}

TEST(Serialize, Examples) {
  EXPECT_EQ(serialize({242, 150, 172}), "TRAJ_0242 TRAJ_0150 TRAJ_0172");
  EXPECT_EQ(serialize({0}), "TRAJ_0000");
  EXPECT_EQ(serialize({2047}), "TRAJ_2047");
  EXPECT_EQ(serialize({}), "");
}

TEST(Parse, Examples) {
  auto r = parse("TRAJ_0042 TRAJ_2047");
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.ids, (TokenSequence{42, 2047}));
  r = parse("TRAJ_42");
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error->token, "TRAJ_42");
  r = parse("TRAJ_0001 TRAJ_2048 TRAJ_x");
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error->token, "TRAJ_2048");
  EXPECT_TRUE(r.ids.empty());
  EXPECT_FALSE(parse("").ok());
  EXPECT_FALSE(parse("TRAJ_0001 ").ok());
  EXPECT_FALSE(parse(" TRAJ_0001").ok());
  EXPECT_FALSE(parse("TRAJ_0001  TRAJ_0002").ok());
}

TEST(Parse, SerializeRoundTrip) {
  Rng rng(6);
  std::uniform_int_distribution<int> id(0, 2047);
  std::uniform_int_distribution<int> len(1, 12);
  for (int trial = 0; trial < 2000; ++trial) {
    TokenSequence ids(static_cast<std::size_t>(len(rng)));
    for (auto& x : ids) x = id(rng);
    const auto r = parse(serialize(ids));
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.ids, ids);
  }
}

// Regex oracle for the wire grammar; values are range-checked separately.
TEST(Parse, FuzzAgainstRegexOracle) {
  const std::regex grammar("TRAJ_([0-9]{4})( TRAJ_[0-9]{4})*");
  const std::regex token("TRAJ_([0-9]{4})");
  auto oracle = [&](const std::string& s) -> std::optional<TokenSequence> {
    if (!std::regex_match(s, grammar)) return std::nullopt;
    TokenSequence ids;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), token); it != std::sregex_iterator();
         ++it) {
      const int v = std::stoi((*it)[1].str());
      if (v > 2047) return std::nullopt;
      ids.push_back(v);
    }
    return ids;
  };
  const std::string alphabet = "TRAJ_traj0123456789 \t-x";
  Rng rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> coin(0, 9);
  std::uniform_int_distribution<int> id(0, 2300);
  std::uniform_int_distribution<int> ntok(1, 4);
  std::size_t accepted = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    std::string s;
    if (coin(rng) < 5) {
      // Near-valid strings: well-formed tokens with occasional mutations.
      const int n = ntok(rng);
      for (int i = 0; i < n; ++i) {
        if (i) s += ' ';
        char buf[16];
        std::snprintf(buf, sizeof buf, "TRAJ_%04d", id(rng));
        s += buf;
      }
      if (coin(rng) < 4 && !s.empty()) {
        std::uniform_int_distribution<std::size_t> where(0, s.size() - 1);
        switch (coin(rng) % 3) {
          case 0: s[where(rng)] = alphabet[pick(rng)]; break;
          case 1: s.erase(where(rng), 1); break;
          default: s.insert(where(rng), 1, alphabet[pick(rng)]); break;
        }
      }
    } else {
      std::uniform_int_distribution<int> len(0, 24);
      const int n = len(rng);
      for (int i = 0; i < n; ++i) s += alphabet[pick(rng)];
    }
    const auto expect = oracle(s);
    const auto got = parse(s);
    ASSERT_EQ(got.ok(), expect.has_value()) << '"' << s << '"';
    if (expect) {
      EXPECT_EQ(got.ids, *expect);
      ++accepted;
    }
  }
  EXPECT_GT(accepted, 1000u);
}

TEST(CodebookIo, BitExactRoundTrip) {
  const auto segs = canonical_segments(synthetic_corpus(3, 40));
  const Codebook cb = fit_codebook(segs, 16, 1, 10);
  std::stringstream ss;
  write_codebook(ss, cb);
  EXPECT_EQ(ss.str().substr(0, 13), "kdisc v1 K=16");
  const Codebook back = read_codebook(ss);
  EXPECT_EQ(back, cb);
  std::stringstream bad("kdisc v2 K=1\n0 0 0\n");
  EXPECT_THROW(read_codebook(bad), ParseError);
}

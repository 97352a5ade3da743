// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include <doctest.h>

#include <cmath>
#include <set>

#include "mfm/corpus.hpp"

using namespace mfm;

namespace {

const std::filesystem::path kData = MFM_TEST_DATA;

std::set<std::string> set_of(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("ingest reads the 3 user fixture") {
  auto r = ingest(kData / "fixture_interactions.tsv", kData / "fixture_features.txt");
  CHECK(r.corpus.users().size() == 3);
  CHECK(r.corpus.items().size() == 4);
  CHECK(r.corpus.interactions().size() == 12);
  CHECK(r.corpus.d_v() == 4);
  CHECK(r.dropped_users == 0);
  CHECK(r.corpus.item("i1").has_image);
  CHECK_FALSE(r.corpus.item("i4").has_image);
  CHECK(r.corpus.item("i4").image_feature.isZero());
  // Tie at t=220 keeps input order.
  CHECK(r.corpus.item_sequence("u3") == std::vector<std::string>{"i3", "i1", "i2", "i4"});
  const auto& first = r.corpus.interactions()[r.corpus.history("u1")[0]];
  CHECK(first.rating == 5);
  CHECK(first.explanation == "great color and soft feel");
  CHECK(first.hint_word == "color");
  CHECK_FALSE(r.corpus.interactions()[r.corpus.history("u1")[1]].rating.has_value());
}

TEST_CASE("ingest drops short users with a warning") {
  auto r = ingest_text("a\tx\t1\na\ty\t2\na\tz\t3\nb\tx\t1\nb\ty\t2\n", "d_v=2\nx 1 0\n");
  CHECK(r.corpus.users() == std::vector<std::string>{"a"});
  CHECK(r.dropped_users == 1);
  CHECK(r.dropped_interactions == 2);
  REQUIRE_FALSE(r.warnings.empty());
}

TEST_CASE("ingest errors") {
  SUBCASE("feature length mismatch names the item") {
    try {
      ingest_text("a\tx\t1\na\tx\t2\na\tx\t3\n", "d_v=4\nx 1 2 3 4 5\n");
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      CHECK(std::string(e.what()).find("x") != std::string::npos);
    }
  }
  SUBCASE("malformed line carries its number") {
    try {
      ingest_text("a\tx\t1\na\tx\n", "d_v=1\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("rating out of range") {
    CHECK_THROWS_AS(ingest_text("a\tx\t1\t9\n", "d_v=1\n"), ParseError);
  }
  SUBCASE("bad timestamp") { CHECK_THROWS_AS(ingest_text("a\tx\tnoon\n", "d_v=1\n"), ParseError); }
  SUBCASE("missing header") { CHECK_THROWS_AS(ingest_text("a\tx\t1\n", "x 1\n"), ParseError); }
}

TEST_CASE("ingest, write, ingest is a fixed point") {
  auto a = ingest(kData / "fixture_interactions.tsv", kData / "fixture_features.txt").corpus;
  auto b = ingest_text(format_interactions(a), format_features(a)).corpus;
  CHECK(a == b);
  CHECK(format_interactions(a) == format_interactions(b));
  CHECK(format_features(a) == format_features(b));
}

TEST_CASE("leave-one-out splits on the 5 user fixture") {
  auto r = ingest(kData / "split_interactions.tsv", kData / "split_features.txt");
  CHECK(r.dropped_users == 1);  // uF has two records
  const auto& c = r.corpus;
  REQUIRE(c.users().size() == 5);
  auto s = build_sequential_splits(c);
  CHECK(s.user("uA").train == std::vector<std::string>{"a1"});
  CHECK(s.user("uA").validation == "a2");
  CHECK(s.user("uA").test == "a3");
  CHECK(s.user("uB").train == std::vector<std::string>{"b1", "b2", "b3"});
  CHECK(s.user("uB").validation == "b4");
  CHECK(s.user("uB").test == "b5");
  CHECK(s.user("uC").train == std::vector<std::string>{"c1", "c3"});
  CHECK(s.user("uC").validation == "c2");
  CHECK(s.user("uC").test == "c4");
  CHECK(s.user("uD").train == std::vector<std::string>{"d1", "d2", "d3", "d4"});
  CHECK(s.user("uE").train == std::vector<std::string>{"e1"});
  CHECK(s.user("uE").validation == "e2");
  CHECK(s.user("uE").test == "e3");
  for (const auto& u : s.sequential) {
    auto all = u.train;
    all.push_back(u.validation);
    all.push_back(u.test);
    CHECK(all == c.item_sequence(u.user_id));
  }
}

TEST_CASE("explanation split proportions") {
  for (std::size_t n : {10u, 100u, 101u}) {
    std::vector<ItemRecord> items{{"x", "", Eigen::VectorXd::Zero(1), false}};
    std::vector<Interaction> inter;
    for (std::size_t i = 0; i < n; ++i) {
      Interaction rec;
      rec.user_id = "u" + std::to_string(i / 5);
      rec.item_id = "x";
      rec.timestamp = static_cast<std::int64_t>(i);
      rec.explanation = "text " + std::to_string(i);
      inter.push_back(rec);
    }
    // Records without text keep every user at three or more.
    for (int pad = 0; pad < 3; ++pad) {
      Interaction rec = inter.back();
      rec.explanation.reset();
      inter.push_back(rec);
    }
    Corpus c(items, inter, 1);
    auto s = build_explanation_splits(c, 42);
    const double total = double(n);
    CHECK(s.explanation_train.size() + s.explanation_validation.size() + s.explanation_test.size() == n);
    CHECK(std::abs(double(s.explanation_train.size()) - 0.8 * total) <= 1.0);
    CHECK(std::abs(double(s.explanation_validation.size()) - 0.1 * total) <= 1.0);
    CHECK(std::abs(double(s.explanation_test.size()) - 0.1 * total) <= 1.0);
    if (n == 10) CHECK(s.explanation_train.size() == 8);
    if (n == 100) CHECK(s.explanation_validation.size() == 10);
    auto again = build_explanation_splits(c, 42);
    CHECK(again.explanation_train == s.explanation_train);
  }
  auto plain = ingest(kData / "split_interactions.tsv", kData / "split_features.txt").corpus;
  CHECK_THROWS_AS(build_explanation_splits(plain, 1), ConfigError);
}

TEST_CASE("candidate sets") {
  GeneratorParams gp;
  gp.users = 12;
  gp.items = 30;
  auto c = synthesize(gp, 5);
  auto s = build_sequential_splits(c);
  auto sets = build_candidate_sets(c, s, Split::Test, 9, 10);
  REQUIRE(sets.size() == c.users().size());
  for (const auto& cs : sets) {
    CHECK(cs.item_ids.size() == 10);
    CHECK(set_of(cs.item_ids).size() == 10);
    CHECK(std::count(cs.item_ids.begin(), cs.item_ids.end(), cs.ground_truth) == 1);
    CHECK(cs.ground_truth == s.user(cs.user_id).test);
    // Brute-force eligibility by set difference.
    std::set<std::string> eligible;
    for (const auto& [id, item] : c.items()) eligible.insert(id);
    for (const auto& id : c.item_sequence(cs.user_id)) eligible.erase(id);
    for (const auto& id : cs.item_ids) {
      if (id != cs.ground_truth) CHECK(eligible.count(id) == 1);
    }
  }
  auto again = build_candidate_sets(c, s, Split::Test, 9, 10);
  for (std::size_t i = 0; i < sets.size(); ++i) CHECK(again[i].item_ids == sets[i].item_ids);

  SUBCASE("forced sample takes every eligible item") {
    Rng rng(1);
    const auto& user = c.users()[0];
    const auto seen = set_of(c.item_sequence(user));
    const auto eligible = c.items().size() - seen.size();
    auto cs = sample_candidate_set(c, user, s.user(user).test, eligible + 1, rng);
    std::set<std::string> negatives(cs.item_ids.begin(), cs.item_ids.end());
    negatives.erase(cs.ground_truth);
    CHECK(negatives.size() == eligible);
    CHECK_THROWS_AS(sample_candidate_set(c, user, s.user(user).test, eligible + 2, rng), ConfigError);
  }
}

TEST_CASE("synthesize") {
  GeneratorParams gp;
  gp.period = 3;
  gp.pattern_strength = 1.0;
  auto c = synthesize(gp, 11);
  CHECK(c.users().size() == 50);
  CHECK(c.items().size() == 20);
  for (const auto& u : c.users()) {
    auto seq = c.item_sequence(u);
    CHECK(seq.size() >= gp.min_length);
    CHECK(seq.size() <= gp.max_length);
    for (std::size_t t = 3; t < seq.size(); ++t) CHECK(seq[t] == seq[t - 3]);
    CHECK(set_of(seq).size() == 3);
  }
  for (const auto& [id, item] : c.items()) CHECK(item.image_feature.norm() == doctest::Approx(1.0));
  CHECK(format_interactions(c) == format_interactions(synthesize(gp, 11)));
  CHECK(format_features(c) == format_features(synthesize(gp, 11)));

  GeneratorParams bad;
  bad.items = 15;
  bad.candidate_size = 10;
  bad.max_length = 8;
  CHECK_THROWS_AS(synthesize(bad, 1), ConfigError);
}

TEST_CASE("p=0 next items are uniform") {
  GeneratorParams gp;
  gp.users = 2000;
  gp.items = 20;
  gp.pattern_strength = 0.0;
  gp.explanations = false;
  auto c = synthesize(gp, 3);
  std::map<std::string, double> counts;
  double draws = 0;
  for (const auto& u : c.users()) {
    auto seq = c.item_sequence(u);
    for (std::size_t t = 1; t < seq.size(); ++t) {
      counts[seq[t]] += 1;
      draws += 1;
    }
  }
  REQUIRE(draws >= 10000);
  double chi2 = 0;
  const double expected = draws / double(gp.items);
  for (const auto& [id, item] : c.items()) chi2 += std::pow(counts[id] - expected, 2) / expected;
  // 19 degrees of freedom, alpha = 0.01.
  CHECK(chi2 < 36.191);
}

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include <doctest.h>

#include <set>

#include "mfm/decode.hpp"
#include "toy_decode.hpp"

using namespace mfm;

namespace {

// The same log-probabilities at every step.
StepScorer fixed(std::vector<double> probs) {
  Eigen::VectorXd lp(static_cast<Eigen::Index>(probs.size()));
  for (std::size_t i = 0; i < probs.size(); ++i) lp[Eigen::Index(i)] = std::log(probs[i]);
  return [lp](const std::vector<int>&) { return lp; };
}

}  // namespace

TEST_CASE("config validation") {
  DecodeConfig c;
  c.beam_size = 0;
  CHECK_THROWS_AS(c.validate(), DecodeError);
  CHECK_THROWS_AS(beam_search(fixed({0.5, 0.5}), c), DecodeError);
  CHECK(parse_decode_mode("greedy") == DecodeMode::Greedy);
  CHECK_THROWS_AS(parse_decode_mode("sample"), ConfigError);
}

TEST_CASE("greedy decoding") {
  DecodeConfig c;
  c.max_length = 4;
  // Vocab {pad, eos, a}: mass peaks at eos.
  auto h = greedy_decode(fixed({0.0, 0.7, 0.3}), c);
  CHECK(h.tokens == std::vector<int>{kEosId});

  // "a" first, then eos.
  StepScorer two = [](const std::vector<int>& p) {
    Eigen::VectorXd lp(3);
    if (p.empty()) {
      lp << std::log(0.1), std::log(0.2), std::log(0.7);
    } else {
      lp << std::log(0.1), std::log(0.6), std::log(0.3);
    }
    return lp;
  };
  CHECK(greedy_decode(two, c).tokens == std::vector<int>{2, kEosId});

  // Ties go to the lower id.
  CHECK(greedy_decode(fixed({0.2, 0.0, 0.4, 0.4}), c).tokens.front() == 2);
}

TEST_CASE("beam search matches enumeration on a 2-step toy") {
  // Vocab {pad, eos, b} with pad standing in for a second symbol.
  StepScorer s = [](const std::vector<int>& p) {
    Eigen::VectorXd lp(3);
    if (p.empty()) {
      lp << std::log(0.45), std::log(0.35), std::log(0.2);
    } else if (p[0] == 0) {
      lp << std::log(0.1), std::log(0.3), std::log(0.6);
    } else {
      lp << std::log(0.45), std::log(0.1), std::log(0.45);
    }
    return lp;
  };
  DecodeConfig c;
  c.beam_size = 2;
  c.max_length = 2;
  auto beam = beam_search(s, c);
  auto all = toy::enumerate(s, 3, 2);
  REQUIRE(beam.size() == 2);
  CHECK(beam[0].tokens == all[0].tokens);
  CHECK(beam[1].tokens == all[1].tokens);
  CHECK(beam[0].tokens == std::vector<int>{kEosId});
  CHECK(beam[1].tokens == std::vector<int>{0, 2});
  CHECK(beam[1].log_prob == doctest::Approx(std::log(0.27)));
}

TEST_CASE("full-width beam equals exhaustive enumeration") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int vocab = 2 + int(seed % 3);
    const int len = 1 + int(seed % 3);
    toy::TableScorer table(vocab, seed);
    auto scorer = table.scorer();
    DecodeConfig c;
    c.max_length = len;
    c.beam_size = int(toy::sequence_count(vocab, len));
    auto beam = beam_search(scorer, c);
    auto all = toy::enumerate(scorer, vocab, len);
    REQUIRE(all.size() == toy::sequence_count(vocab, len));
    REQUIRE(beam.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(beam[i].tokens == all[i].tokens);
      CHECK(beam[i].log_prob == doctest::Approx(all[i].log_prob).epsilon(1e-12));
    }
    c.beam_size = 1;
    CHECK(beam_search(scorer, c)[0].tokens == greedy_decode(scorer, c).tokens);
  }
}

TEST_CASE("item trie") {
  auto vocab = build_vocab({"item_1 item_12 item_2"}, 40);
  auto one = build_item_trie(std::vector<std::string>{"item_1"}, vocab);
  CHECK(one.items() == 1);
  CHECK(one.nodes() == encode(vocab, "item_1").size() + 1);

  auto trie = build_item_trie(std::vector<std::string>{"item_12", "item_1", "item_2"}, vocab);
  CHECK(trie.items() == 3);
  const auto a = encode(vocab, "item_1").token_ids;
  const auto b = encode(vocab, "item_12").token_ids;
  CHECK(trie.lookup(a) == std::optional<std::string>("item_1"));
  CHECK(trie.lookup(b) == std::optional<std::string>("item_12"));
  CHECK_FALSE(trie.lookup({3, 3, 3, 3}).has_value());
  // item_1 is a prefix of item_12 unless the tokenizer merged "12".
  if (b.size() > a.size() && std::equal(a.begin(), a.end(), b.begin())) {
    int node = ItemTrie::root();
    for (int t : a) node = trie.child(node, t);
    auto legal = trie.legal(node);
    CHECK(legal.front() == kEosId);
    CHECK(legal.size() >= 2);
  }

  ItemTrie clash;
  clash.insert({5, 6}, "x");
  try {
    clash.insert({5, 6}, "y");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("'x'") != std::string::npos);
    CHECK(what.find("'y'") != std::string::npos);
  }
}

TEST_CASE("constrained beam emits only items") {
  auto vocab = build_vocab({"item_1 item_12 item_2 item_30"}, 40);
  auto trie = build_item_trie(std::vector<std::string>{"item_1", "item_2", "item_30"}, vocab);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    toy::TableScorer table(vocab.size(), seed, 4.0);
    DecodeConfig c;
    c.beam_size = 5;
    c.max_length = 12;
    auto out = beam_search(table.scorer(), c, &trie);
    CHECK(out.size() == 3);
    std::set<std::string> seen;
    for (const auto& h : out) {
      auto item = trie.lookup(h.tokens);
      REQUIRE(item.has_value());
      seen.insert(*item);
    }
    CHECK(seen.size() == 3);
    auto g = greedy_decode(table.scorer(), c, &trie);
    CHECK(trie.lookup(g.tokens).has_value());
  }
  // No room to finish any item.
  DecodeConfig tight;
  tight.max_length = 1;
  toy::TableScorer table(vocab.size(), 1);
  for (const auto& h : beam_search(table.scorer(), tight, &trie)) CHECK(trie.lookup(h.tokens).has_value());
}

TEST_CASE("decode records") {
  std::vector<DecodeRecord> r{{"u1", "A-3", 1, "item_4", -0.5}};
  CHECK(format_decode_records(r) == "u1\tA-3\t1\titem_4\t-0.500000\n");
}

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <random>

#include "df_oracle.hpp"
#include "mrsession/df_analysis.hpp"

using namespace mrsession;
using dforacle::brute_force;
using dforacle::enumerate;
using dforacle::forest;

namespace {

ChannelSetCollection C(const char* text) { return parse_collection(text); }

ChannelSetCollection random_regular(std::mt19937_64& rng, int max_pairs, int max_sets) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  int pairs = uni(0, max_pairs), nsets = uni(1, max_sets);
  std::vector<ChannelSet> sets(static_cast<std::size_t>(nsets));
  // Bias toward forests so both answers show up.
  bool tree_like = uni(0, 1) == 1;
  for (int p = 1; p <= pairs; ++p) {
    int a = uni(0, nsets - 1), b = uni(0, nsets - 1);
    if (tree_like && nsets > 1 && p < nsets) {
      a = p % nsets;
      b = uni(0, p - 1);
    }
    sets[static_cast<std::size_t>(a)].push_back({static_cast<std::uint64_t>(p), true});
    sets[static_cast<std::size_t>(b)].push_back({static_cast<std::uint64_t>(p), false});
  }
  return ChannelSetCollection(std::move(sets));
}

}  // namespace

TEST_CASE("collection text form") {
  auto m = C("[{1+,2-},{2+,1-}]");
  REQUIRE(m.sets.size() == 2);
  CHECK(format_collection(m) == "[{1+,2-},{1-,2+}]");
  CHECK(format_collection(C("[ {} , { 3- } ]")) == "[{},{3-}]");
  CHECK_THROWS_AS(C("[{1*}]"), Error);
  CHECK_THROWS_AS(C("{1+}"), Error);
  CHECK(parse_half("12-") == ChannelHalf{12, false});
}

TEST_CASE("is_regular examples") {
  CHECK(is_regular(C("[{},{}]")));
  CHECK_FALSE(is_regular(C("[{1+},{1+}]")));
  CHECK_FALSE(is_regular(C("[{1+}]")));
  CHECK(is_regular(C("[{1+},{1-}]")));
  CHECK_FALSE(is_regular(C("[{1+,1+,1-}]")));
}

TEST_CASE("df_reduce examples") {
  CHECK(df_reduce(C("[{1+},{1-}]"), {1, true}) == C("[{}]"));
  CHECK(df_reduce(C("[{1+,2+},{1-},{2-}]"), {1, true}) == C("[{2-},{2+}]"));
  try {
    df_reduce(C("[{1+,1-}]"), {1, true});
    FAIL("expected NotEnabled");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NotEnabled);
  }
  CHECK_THROWS_AS(df_reduce(C("[{1+},{1-}]"), {2, true}), Error);
  CHECK_THROWS_AS(df_reduce(C("[{1+},{1-}]"), {1, false}), Error);
  try {
    df_reduce(C("[{1+}]"), {1, true});
    FAIL("expected IrregularInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IrregularInput);
  }
}

TEST_CASE("is_df_reducible examples") {
  CHECK(is_df_reducible(C("[{},{},{}]")));
  CHECK_FALSE(is_df_reducible(C("[{1+,1-}]")));
  CHECK_FALSE(is_df_reducible(C("[{1+,2-},{2+,1-}]")));
  CHECK(is_df_reducible(C("[{1+,2+},{1-},{2-}]")));
  CHECK_FALSE(is_df_reducible(C("[{1-,2-},{1+,2+}]")));
  try {
    is_df_reducible(ChannelSetCollection{});
    FAIL("expected IrregularInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IrregularInput);
  }
  CHECK_THROWS_AS(is_df_reducible(C("[{1+}]")), Error);
}

TEST_CASE("decision agrees with brute force and the forest oracle, exhaustively") {
  std::size_t checked = 0, reducible = 0;
  for (int pairs = 0; pairs <= 3; ++pairs) {
    for (int nsets = 1; nsets <= 4; ++nsets) {
      enumerate(pairs, nsets, [&](const ChannelSetCollection& m) {
        REQUIRE(is_regular(m));
        bool got = is_df_reducible(m);
        bool want = brute_force(m.sets);
        REQUIRE(got == want);
        REQUIRE(forest(m.sets) == want);
        ++checked;
        reducible += got ? 1 : 0;
      });
    }
  }
  CHECK(checked > 4000);
  CHECK(reducible > 0);
  CHECK(reducible < checked);
}

TEST_CASE("n sets holding at least n pairs never reduce") {
  for (int n = 1; n <= 4; ++n) {
    for (int pairs = n; pairs <= std::min(n + 1, 4); ++pairs) {
      if (n == 4 && pairs > 4) continue;
      enumerate(pairs, n, [&](const ChannelSetCollection& m) { REQUIRE_FALSE(is_df_reducible(m)); });
    }
  }
}

TEST_CASE("canonical key: invariance and soundness") {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 2000; ++k) {
    auto m = random_regular(rng, 5, 5);
    std::vector<std::uint64_t> ids{1, 2, 3, 4, 5};
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<ChannelSet> renamed = m.sets;
    for (auto& s : renamed) {
      for (auto& h : s) h = {ids[h.id - 1] + 10, h.positive};
    }
    std::shuffle(renamed.begin(), renamed.end(), rng);
    renamed.push_back({});
    ChannelSetCollection r(std::move(renamed));
    CHECK(canonical_key(r) == canonical_key(m));
    CHECK(is_df_reducible(r) == forest(m.sets));
  }
  // Equal keys never disagree on the verdict.
  std::map<std::string, bool> verdict;
  for (int pairs = 0; pairs <= 3; ++pairs) {
    for (int nsets = 1; nsets <= 4; ++nsets) {
      enumerate(pairs, nsets, [&](const ChannelSetCollection& m) {
        auto [it, fresh] = verdict.emplace(canonical_key(m), forest(m.sets));
        if (!fresh) REQUIRE(it->second == forest(m.sets));
      });
    }
  }
  CHECK(verdict.size() > 40);
  CHECK(canonical_key(C("[{2+},{2-,1+},{},{1-}]")) == canonical_key(C("[{1+},{1-,2+},{2-}]")));
}

TEST_CASE("dropping empty sets, expanding reducts and deleting split pairs") {
  std::mt19937_64 rng(22);
  for (int k = 0; k < 1500; ++k) {
    auto m = random_regular(rng, 5, 5);
    bool base = is_df_reducible(m);
    CHECK(base == forest(m.sets));

    std::vector<ChannelSet> nonempty;
    for (const auto& s : m.sets) if (!s.empty()) nonempty.push_back(s);
    if (!nonempty.empty()) CHECK(is_df_reducible(ChannelSetCollection(nonempty)) == base);

    for (const auto& h : enabled_reductions(m)) {
      auto r = df_reduce(m, h);
      CHECK(is_regular(r));
      if (is_df_reducible(r)) CHECK(base);
      // A reducible collection stays reducible without a split pair.
      std::vector<ChannelSet> without = m.sets;
      for (auto& s : without) std::erase_if(s, [&](const ChannelHalf& x) { return x.id == h.id; });
      if (base) CHECK(is_df_reducible(ChannelSetCollection(without)));
    }
    CHECK(is_df_normal(m) == enabled_reductions(m).empty());
  }
}

TEST_CASE("trace preservation reports") {
  CHECK(check_trace_preservation({}).clean());
  auto ok = check_trace_preservation({C("[{}]"), C("[{1-},{1+}]"), C("[{},{}]")});
  CHECK(ok.clean());
  CHECK(ok.checked == 3);
  auto bad = check_trace_preservation({C("[{},{}]"), C("[{1-,2-},{1+,2+}]"), C("[{},{}]")});
  REQUIRE_FALSE(bad.clean());
  CHECK(*bad.first_violation == 1);
  auto irregular = check_trace_preservation({C("[{1+}]")});
  CHECK_FALSE(irregular.clean());
}

#pragma once

// Reference deciders for DF-reducibility and an exhaustive enumerator of
// regular collections, shared by the unit and acceptance tests.

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>

#include "mrsession/df_analysis.hpp"

namespace dforacle {

using mrsession::ChannelSet;
using mrsession::ChannelSetCollection;

// Memo-free recursion over the definition, with its own reduction step.
inline bool brute_force(const std::vector<ChannelSet>& sets) {
  bool all_empty = std::all_of(sets.begin(), sets.end(), [](const ChannelSet& s) { return s.empty(); });
  if (all_empty) return true;
  bool any = false;
  for (std::size_t a = 0; a < sets.size(); ++a) {
    for (const auto& h : sets[a]) {
      if (!h.positive) continue;
      for (std::size_t b = 0; b < sets.size(); ++b) {
        if (b == a || std::find(sets[b].begin(), sets[b].end(), h.dual()) == sets[b].end()) continue;
        any = true;
        std::vector<ChannelSet> next;
        ChannelSet merged;
        for (std::size_t k = 0; k < sets.size(); ++k) {
          if (k != a && k != b) next.push_back(sets[k]);
        }
        for (const auto& x : sets[a]) if (x.id != h.id) merged.push_back(x);
        for (const auto& x : sets[b]) if (x.id != h.id) merged.push_back(x);
        next.push_back(merged);
        if (!brute_force(next)) return false;
      }
    }
  }
  return any;
}

// Independent characterization: sets are vertices, channels are edges; the
// collection reduces iff that multigraph is a forest.
inline bool forest(const std::vector<ChannelSet>& sets) {
  std::map<std::uint64_t, std::vector<std::size_t>> ends;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    for (const auto& h : sets[k]) ends[h.id].push_back(k);
  }
  std::vector<std::size_t> parent(sets.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (const auto& [id, e] : ends) {
    std::size_t a = find(e[0]), b = find(e[1]);
    if (a == b) return false;
    parent[a] = b;
  }
  return true;
}

// Every regular collection with `pairs` channels over `nsets` sets.
inline void enumerate(int pairs, int nsets, const std::function<void(const ChannelSetCollection&)>& f) {
  int halves = 2 * pairs;
  std::vector<int> where(static_cast<std::size_t>(halves), 0);
  while (true) {
    std::vector<ChannelSet> sets(static_cast<std::size_t>(nsets));
    for (int h = 0; h < halves; ++h) {
      sets[static_cast<std::size_t>(where[static_cast<std::size_t>(h)])].push_back(
          {static_cast<std::uint64_t>(h / 2 + 1), h % 2 == 0});
    }
    f(ChannelSetCollection(std::move(sets)));
    int k = 0;
    while (k < halves && ++where[static_cast<std::size_t>(k)] == nsets) where[static_cast<std::size_t>(k++)] = 0;
    if (k == halves) break;
  }
}

}  // namespace dforacle

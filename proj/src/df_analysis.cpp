#include "mrsession/df_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

namespace mrsession {

std::string format_half(ChannelHalf h) {
  return std::to_string(h.id) + (h.positive ? "+" : "-");
}

ChannelHalf parse_half(std::string_view text) {
  std::size_t i = 0;
  std::uint64_t id = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    id = id * 10 + static_cast<std::uint64_t>(text[i] - '0');
    ++i;
  }
  if (i == 0) throw SyntaxError(0, "expected channel id");
  if (i + 1 != text.size() || (text[i] != '+' && text[i] != '-')) {
    throw SyntaxError(i, "expected '+' or '-' after channel id");
  }
  return {id, text[i] == '+'};
}

ChannelSetCollection::ChannelSetCollection(std::vector<ChannelSet> s) : sets(std::move(s)) {
  for (auto& set : sets) std::sort(set.begin(), set.end());
}

std::string format_collection(const ChannelSetCollection& m) {
  std::string out = "[";
  for (std::size_t i = 0; i < m.sets.size(); ++i) {
    if (i) out += ',';
    out += '{';
    for (std::size_t j = 0; j < m.sets[i].size(); ++j) {
      if (j) out += ',';
      out += format_half(m.sets[i][j]);
    }
    out += '}';
  }
  return out + "]";
}

ChannelSetCollection parse_collection(std::string_view text) {
  std::size_t pos = 0;
  auto ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  auto expect = [&](char c) {
    ws();
    if (pos >= text.size() || text[pos] != c) {
      throw SyntaxError(pos, std::string("expected '") + c + "'");
    }
    ++pos;
  };
  auto at = [&](char c) {
    ws();
    return pos < text.size() && text[pos] == c;
  };
  std::vector<ChannelSet> sets;
  expect('[');
  if (!at(']')) {
    while (true) {
      expect('{');
      ChannelSet set;
      if (!at('}')) {
        while (true) {
          ws();
          std::size_t start = pos;
          while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
          if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
          try {
            set.push_back(parse_half(text.substr(start, pos - start)));
          } catch (const SyntaxError& e) {
            throw SyntaxError(start + e.position(), "malformed channel half");
          }
          if (at(',')) {
            ++pos;
            continue;
          }
          break;
        }
      }
      expect('}');
      sets.push_back(std::move(set));
      if (at(',')) {
        ++pos;
        continue;
      }
      break;
    }
  }
  expect(']');
  ws();
  if (pos != text.size()) throw SyntaxError(pos, "trailing input after collection");
  return ChannelSetCollection(std::move(sets));
}

bool is_regular(const ChannelSetCollection& m) {
  std::set<ChannelHalf> seen;
  for (const auto& set : m.sets) {
    for (const auto& h : set) {
      if (!seen.insert(h).second) return false;
    }
  }
  for (const auto& h : seen) {
    if (!seen.count(h.dual())) return false;
  }
  return true;
}

namespace {

// Index of the set holding h, or npos.
std::size_t holder(const ChannelSetCollection& m, ChannelHalf h) {
  for (std::size_t i = 0; i < m.sets.size(); ++i) {
    if (std::binary_search(m.sets[i].begin(), m.sets[i].end(), h)) return i;
  }
  return static_cast<std::size_t>(-1);
}

bool has_self_loop(const ChannelSetCollection& m) {
  for (const auto& set : m.sets) {
    for (const auto& h : set) {
      if (h.positive && std::binary_search(set.begin(), set.end(), h.dual())) return true;
    }
  }
  return false;
}

ChannelSetCollection reduce_unchecked(const ChannelSetCollection& m, std::size_t a,
                                      std::size_t b, ChannelHalf via) {
  ChannelSetCollection out;
  out.sets.reserve(m.sets.size() - 1);
  for (std::size_t i = 0; i < m.sets.size(); ++i) {
    if (i != a && i != b) out.sets.push_back(m.sets[i]);
  }
  ChannelSet merged;
  for (std::size_t i : {a, b}) {
    for (const auto& h : m.sets[i]) {
      if (h.id != via.id) merged.push_back(h);
    }
  }
  std::sort(merged.begin(), merged.end());
  out.sets.push_back(std::move(merged));
  return out;
}

}  // namespace

std::vector<ChannelHalf> enabled_reductions(const ChannelSetCollection& m) {
  std::vector<ChannelHalf> out;
  for (std::size_t i = 0; i < m.sets.size(); ++i) {
    for (const auto& h : m.sets[i]) {
      if (!h.positive) continue;
      std::size_t j = holder(m, h.dual());
      if (j != static_cast<std::size_t>(-1) && j != i) out.push_back(h);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_df_normal(const ChannelSetCollection& m) { return enabled_reductions(m).empty(); }

ChannelSetCollection df_reduce(const ChannelSetCollection& m, ChannelHalf via) {
  if (!is_regular(m)) throw Error(Errc::IrregularInput, format_collection(m));
  if (!via.positive) {
    throw Error(Errc::NotEnabled, "reduction must go via a positive half, got " + format_half(via));
  }
  std::size_t a = holder(m, via);
  std::size_t b = holder(m, via.dual());
  if (a == static_cast<std::size_t>(-1) || b == static_cast<std::size_t>(-1)) {
    throw Error(Errc::NotEnabled, format_half(via) + " is absent");
  }
  if (a == b) throw Error(Errc::NotEnabled, format_half(via) + " sits in a self-looping set");
  return reduce_unchecked(m, a, b, via);
}

std::string canonical_key(const ChannelSetCollection& m) {
  std::vector<const ChannelSet*> live;
  for (const auto& set : m.sets) {
    if (!set.empty()) live.push_back(&set);
  }
  if (!is_regular(m)) {
    // Irregular input never reaches the decider; keep the key lossless.
    std::vector<ChannelSet> sets;
    for (const auto* s : live) sets.push_back(*s);
    std::sort(sets.begin(), sets.end());
    return "r" + format_collection(ChannelSetCollection(std::move(sets)));
  }

  // Regular collections are directed multigraphs: sets are vertices and each
  // channel an edge from its positive holder to its negative holder.
  std::size_t n = live.size();
  std::map<std::uint64_t, std::pair<std::size_t, std::size_t>> ends;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& h : *live[i]) (h.positive ? ends[h.id].first : ends[h.id].second) = i;
  }
  std::vector<std::vector<int>> edges(n, std::vector<int>(n, 0));
  for (const auto& [id, e] : ends) ++edges[e.first][e.second];

  using Sig = std::tuple<int, int, int>;  // (self-loops, out, in)
  std::vector<Sig> sig(n);
  for (std::size_t i = 0; i < n; ++i) {
    int out = 0, in = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      out += edges[i][j];
      in += edges[j][i];
    }
    sig[i] = {edges[i][i], out, in};
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sig[x] < sig[y]; });

  auto encode = [&](const std::vector<std::size_t>& ord) {
    std::string key = "g" + std::to_string(n);
    for (std::size_t i : ord) {
      key += '|';
      for (std::size_t j : ord) key += std::to_string(edges[i][j]) + ',';
    }
    return key;
  };

  // Minimize over orderings that permute vertices with equal signatures,
  // unless that would be too many to try.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  double perms = 1;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sig[order[j]] == sig[order[i]]) ++j;
    for (std::size_t k = 2; k <= j - i; ++k) perms *= static_cast<double>(k);
    groups.emplace_back(i, j);
    i = j;
  }
  if (perms > 40320) return encode(order);

  std::string best;
  std::function<void(std::size_t)> search = [&](std::size_t g) {
    if (g == groups.size()) {
      std::string key = encode(order);
      if (best.empty() || key < best) best = std::move(key);
      return;
    }
    auto [lo, hi] = groups[g];
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi));
    do {
      search(g + 1);
    } while (std::next_permutation(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                   order.begin() + static_cast<std::ptrdiff_t>(hi)));
  };
  search(0);
  return best;
}

namespace {

class Decider {
 public:
  bool reducible(const ChannelSetCollection& m) {
    ChannelSetCollection live;
    for (const auto& s : m.sets) {
      if (!s.empty()) live.sets.push_back(s);
    }
    if (live.sets.empty()) return true;
    if (has_self_loop(live)) return false;
    std::string key = canonical_key(live);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    bool result = true;
    bool any = false;
    for (std::size_t i = 0; i < live.sets.size() && result; ++i) {
      for (const auto& h : live.sets[i]) {
        if (!h.positive) continue;
        std::size_t j = holder(live, h.dual());
        any = true;
        if (!reducible(reduce_unchecked(live, i, j, h))) {
          result = false;
          break;
        }
      }
    }
    result = result && any;
    memo_.emplace(std::move(key), result);
    return result;
  }

 private:
  std::unordered_map<std::string, bool> memo_;
};

}  // namespace

bool is_df_reducible(const ChannelSetCollection& m) {
  if (m.sets.empty()) throw Error(Errc::IrregularInput, "empty collection");
  if (!is_regular(m)) throw Error(Errc::IrregularInput, format_collection(m));
  return Decider{}.reducible(m);
}

PreservationReport check_trace_preservation(const std::vector<ChannelSetCollection>& snapshots) {
  PreservationReport report;
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    ++report.checked;
    const auto& m = snapshots[i];
    if (m.sets.empty() || !is_regular(m)) {
      report.first_violation = i;
      report.reason = "irregular snapshot " + format_collection(m);
      return report;
    }
    if (!is_df_reducible(m)) {
      report.first_violation = i;
      report.reason = "not DF-reducible: " + format_collection(m);
      return report;
    }
  }
  return report;
}

}  // namespace mrsession

#pragma once

// Deterministic session drivers for runtime tests. Every party derives the
// payload and the choice at global step k from (seed, k), so parties agree on
// the path without sharing state. `expected` computes what a party should
// observe straight from the session syntax.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mrsession/runtime/runtime.hpp"

namespace scripted {

using namespace mrsession;
using namespace mrsession::rt;

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + k * 0xBF58476D1CE4E5B9ull + 0x94D049BB133111EBull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline DynValue payload_for(const PayloadSort& s, std::uint64_t seed, std::uint64_t k) {
  std::uint64_t h = mix(seed, k);
  if (std::holds_alternative<sort::Int>(s.node().v)) return DynValue::integer(static_cast<std::int64_t>(h % 1000));
  if (std::holds_alternative<sort::Bool>(s.node().v)) return DynValue::boolean(h & 1);
  if (std::holds_alternative<sort::Str>(s.node().v)) return DynValue::str("s" + std::to_string(h % 97));
  if (const auto* t = std::get_if<sort::Tuple>(&s.node().v)) {
    DynValue::Tuple parts;
    for (std::size_t i = 0; i < t->parts.size(); ++i) parts.push_back(payload_for(t->parts[i], seed, k * 31 + i + 1));
    return DynValue::tuple(std::move(parts));
  }
  return DynValue::unit();
}

inline CTag choice_for(std::uint64_t seed, std::uint64_t k) {
  return (mix(seed ^ 0x5555, k) & 1) ? CTag::Right : CTag::Left;
}

inline std::string tag_text(CTag t) { return t == CTag::Left ? "L" : "R"; }

inline std::string msg_text(Role i, Role j, const std::string& v) {
  return std::to_string(i) + ">" + std::to_string(j) + ":" + v;
}

inline std::string choice_text(Role d, CTag t) { return "choose" + std::to_string(d) + ":" + tag_text(t); }

/// Runs ep to completion and returns the messages and choices it observed.
inline std::vector<std::string> drive(Endpoint ep, std::uint64_t seed) {
  std::vector<std::string> log;
  std::uint64_t k = 0;
  for (;;) {
    HeadAction h = next_action(ep);
    if (std::holds_alternative<head::Close>(h)) {
      close(std::move(ep));
      return log;
    }
    ++k;
    if (const auto* s = std::get_if<head::Send>(&h)) {
      DynValue v = payload_for(s->sort, seed, k);
      log.push_back(msg_text(s->from, s->to, format_value(v)));
      ep = send(std::move(ep), s->from, s->to, std::move(v));
    } else if (const auto* r = std::get_if<head::Recv>(&h)) {
      auto [v, next] = recv(std::move(ep), r->from, r->to);
      log.push_back(msg_text(r->from, r->to, format_value(v)));
      ep = std::move(next);
    } else if (std::holds_alternative<head::Skip>(h)) {
      ep = skip(std::move(ep));
    } else if (const auto* c = std::get_if<head::ChooseSend>(&h)) {
      CTag t = choice_for(seed, k);
      log.push_back(choice_text(c->decider, t));
      ep = choose(std::move(ep), t);
    } else {
      Role d = std::get<head::ChooseRecv>(h).decider;
      auto [t, next] = choose_tag(std::move(ep));
      log.push_back(choice_text(d, t));
      ep = std::move(next);
    }
  }
}

/// What a party with `group` must observe on a repeat-free session.
inline std::vector<std::string> expected(const SessionType& s, RoleSet group, std::uint64_t seed) {
  std::vector<std::string> log;
  std::uint64_t k = 0;
  std::vector<SessionType> pending{s};
  while (!pending.empty()) {
    SessionType cur = pending.back();
    pending.pop_back();
    for (bool more = true; more;) {
      more = false;
      const auto& v = cur.node().v;
      if (const auto* m = std::get_if<st::Msg>(&v)) {
        ++k;
        bool in_from = group.contains(m->from), in_to = group.contains(m->to);
        if (in_from != in_to) log.push_back(msg_text(m->from, m->to, format_value(payload_for(m->sort, seed, k))));
        cur = m->rest;
        more = true;
      } else if (const auto* c = std::get_if<st::Choose>(&v)) {
        ++k;
        CTag t = choice_for(seed, k);
        log.push_back(choice_text(c->decider, t));
        cur = t == CTag::Left ? c->left : c->right;
        more = true;
      } else if (const auto* a = std::get_if<st::Append>(&v)) {
        pending.push_back(a->second);
        cur = a->first;
        more = true;
      } else if (std::holds_alternative<st::Repeat>(v)) {
        throw std::logic_error("expected() handles repeat-free sessions only");
      }
    }
  }
  return log;
}

struct PartyLogs {
  std::vector<RoleSet> groups;
  std::vector<std::vector<std::string>> logs;
  std::vector<TraceRecord> events;
};

enum class Wiring { Direct, Chan2Link, Splice };

/// Two parties with groups G and Ḡ, connected directly or through a link.
inline PartyLogs run_pair(RoleUniverse u, RoleSet g, const SessionType& s, std::uint64_t seed, Wiring w) {
  PartyLogs out;
  Group G(u, g);
  out.groups = {G.members(), G.complement().members()};
  out.logs.resize(2);
  {
    Runtime rt(RuntimeOptions{u});
    if (w == Wiring::Direct) {
      Endpoint b = rt.chan_create(G, s, [&](Endpoint e) { out.logs[0] = drive(std::move(e), seed); });
      out.logs[1] = drive(std::move(b), seed);
    } else {
      Endpoint e0 = rt.chan_create(G.complement(), s, [&](Endpoint e) { out.logs[1] = drive(std::move(e), seed); });
      Endpoint e1 = rt.chan_create(G, s, [&](Endpoint e) { out.logs[0] = drive(std::move(e), seed); });
      if (w == Wiring::Chan2Link) {
        chan2_link(std::move(e0), std::move(e1));
      } else {
        splice_link(std::move(e0), std::move(e1));
      }
    }
    rt.join_all();
    out.events = rt.events();
  }
  return out;
}

/// Three parties with groups Ḡ0, Ḡ1 and G0∩G1 joined by chan2_link_create.
inline PartyLogs run_triple(RoleUniverse u, RoleSet g0, RoleSet g1, const SessionType& s, std::uint64_t seed) {
  PartyLogs out;
  Group G0(u, g0), G1(u, g1);
  out.groups = {G0.complement().members(), G1.complement().members(), (G0.intersect(G1)).members()};
  out.logs.resize(3);
  {
    Runtime rt(RuntimeOptions{u});
    Endpoint e0 = rt.chan_create(G0.complement(), s, [&](Endpoint e) { out.logs[0] = drive(std::move(e), seed); });
    Endpoint e1 = rt.chan_create(G1.complement(), s, [&](Endpoint e) { out.logs[1] = drive(std::move(e), seed); });
    Endpoint e2 = chan2_link_create(std::move(e0), std::move(e1));
    out.logs[2] = drive(std::move(e2), seed);
    rt.join_all();
    out.events = rt.events();
  }
  return out;
}

/// A random split of 0..n-1 into three non-empty blocks, returned as (G0, G1)
/// with Ḡ0 and Ḡ1 the first two blocks.
inline std::pair<RoleSet, RoleSet> random_triple_split(std::mt19937_64& rng, int nrole) {
  for (;;) {
    std::vector<int> block(static_cast<std::size_t>(nrole));
    for (auto& b : block) b = static_cast<int>(rng() % 3);
    RoleSet parts[3];
    for (int r = 0; r < nrole; ++r) parts[block[static_cast<std::size_t>(r)]].insert(r);
    if (parts[0].empty() || parts[1].empty() || parts[2].empty()) continue;
    RoleSet full = RoleSet::from_bits((std::uint64_t{1} << nrole) - 1);
    return {full.minus(parts[0]), full.minus(parts[1])};
  }
}

}  // namespace scripted

#include "mrsession/roles.hpp"

#include <bit>
#include <cctype>

namespace mrsession {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::UniverseMismatch: return "UniverseMismatch";
    case Errc::RoleOutOfRange: return "RoleOutOfRange";
    case Errc::SelfMessage: return "SelfMessage";
    case Errc::PreconditionViolated: return "PreconditionViolated";
    case Errc::Syntax: return "SyntaxError";
    case Errc::IllFormedSession: return "IllFormedSession";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::ProtocolViolation: return "ProtocolViolation";
    case Errc::UseAfterConsume: return "UseAfterConsume";
    case Errc::InconsistentBroadcast: return "InconsistentBroadcast";
    case Errc::SegmentIdentityViolation: return "SegmentIdentityViolation";
    case Errc::SegmentIncomplete: return "SegmentIncomplete";
    case Errc::SessionMismatch: return "SessionMismatch";
    case Errc::ComplementsNotDisjoint: return "ComplementsNotDisjoint";
    case Errc::DeadlockDetected: return "DeadlockDetected";
    case Errc::NotEnabled: return "NotEnabled";
    case Errc::IrregularInput: return "IrregularInput";
    case Errc::TypeError: return "TypeError";
    case Errc::Stuck: return "Stuck";
    case Errc::ChoiceNotEnabled: return "ChoiceNotEnabled";
    case Errc::ScriptViolation: return "ScriptViolation";
    case Errc::UnsafeDisabled: return "UnsafeDisabled";
    case Errc::Io: return "IoError";
  }
  return "Error";
}

RoleUniverse::RoleUniverse(int nrole) : nrole_(nrole) {
  if (nrole < 2 || nrole > kMaxRoles) {
    throw Error(Errc::RoleOutOfRange,
                "nrole must lie in [2," + std::to_string(kMaxRoles) + "], got " +
                    std::to_string(nrole));
  }
}

RoleSet::RoleSet(std::initializer_list<Role> roles) {
  for (Role r : roles) insert(r);
}

void RoleSet::insert(Role r) {
  if (r < 0 || r >= RoleUniverse::kMaxRoles) {
    throw Error(Errc::RoleOutOfRange, "role " + std::to_string(r));
  }
  bits_ |= std::uint64_t{1} << r;
}

int RoleSet::size() const noexcept { return std::popcount(bits_); }

int RoleSet::bound() const noexcept { return 64 - std::countl_zero(bits_); }

std::vector<Role> RoleSet::members() const {
  std::vector<Role> out;
  for (Role r = 0; r < bound(); ++r) {
    if (contains(r)) out.push_back(r);
  }
  return out;
}

std::string format_role_set(RoleSet s) {
  std::string out = "{";
  bool first = true;
  for (Role r : s.members()) {
    if (!first) out += ',';
    first = false;
    out += std::to_string(r);
  }
  out += '}';
  return out;
}

namespace {

void skip_ws(std::string_view text, std::size_t& pos) {
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
}

}  // namespace

RoleSet parse_role_set(std::string_view text, std::size_t& pos) {
  skip_ws(text, pos);
  if (pos >= text.size() || text[pos] != '{') throw SyntaxError(pos, "expected '{'");
  ++pos;
  RoleSet out;
  skip_ws(text, pos);
  if (pos < text.size() && text[pos] == '}') {
    ++pos;
    return out;
  }
  while (true) {
    skip_ws(text, pos);
    std::size_t start = pos;
    Role value = 0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      value = value * 10 + (text[pos] - '0');
      if (value >= RoleUniverse::kMaxRoles) throw SyntaxError(start, "role index too large");
      ++pos;
    }
    if (pos == start) throw SyntaxError(pos, "expected role index");
    out.insert(value);
    skip_ws(text, pos);
    if (pos < text.size() && text[pos] == ',') {
      ++pos;
      continue;
    }
    if (pos < text.size() && text[pos] == '}') {
      ++pos;
      return out;
    }
    throw SyntaxError(pos, "expected ',' or '}'");
  }
}

RoleSet parse_role_set(std::string_view text) {
  std::size_t pos = 0;
  RoleSet s = parse_role_set(text, pos);
  skip_ws(text, pos);
  if (pos != text.size()) throw SyntaxError(pos, "trailing input after role set");
  return s;
}

Group::Group(RoleUniverse u, RoleSet members) : universe_(u), members_(members) {
  if (members.bound() > u.nrole()) {
    throw Error(Errc::RoleOutOfRange, "group " + format_role_set(members) +
                                          " exceeds nrole=" + std::to_string(u.nrole()));
  }
}

Group Group::full(RoleUniverse u) {
  std::uint64_t bits =
      u.nrole() == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << u.nrole()) - 1);
  return Group(u, RoleSet::from_bits(bits));
}

bool Group::is_proper() const noexcept {
  return !members_.empty() && members_.size() < universe_.nrole();
}

Group Group::complement() const {
  return Group(universe_, full(universe_).members_.minus(members_));
}

namespace {

void require_same_universe(const Group& a, const Group& b) {
  if (a.universe() != b.universe()) {
    throw Error(Errc::UniverseMismatch, "nrole " + std::to_string(a.universe().nrole()) +
                                            " vs " + std::to_string(b.universe().nrole()));
  }
}

}  // namespace

Group Group::unite(const Group& o) const {
  require_same_universe(*this, o);
  return Group(universe_, members_ | o.members_);
}

Group Group::intersect(const Group& o) const {
  require_same_universe(*this, o);
  return Group(universe_, members_ & o.members_);
}

bool Group::disjoint(const Group& o) const {
  require_same_universe(*this, o);
  return (members_ & o.members_).empty();
}

bool complements_disjoint(const Group& g0, const Group& g1) {
  require_same_universe(g0, g1);
  return g0.complement().disjoint(g1.complement());
}

RolePartition::Block RolePartition::block_of(Role r) const {
  if (outside_g0.contains(r)) return Block::OutsideG0;
  if (outside_g1.contains(r)) return Block::OutsideG1;
  if (shared.contains(r)) return Block::Shared;
  throw Error(Errc::RoleOutOfRange, "role " + std::to_string(r));
}

RolePartition role_block(const Group& g0, const Group& g1) {
  if (!complements_disjoint(g0, g1)) {
    throw Error(Errc::PreconditionViolated,
                "complements of " + g0.to_string() + " and " + g1.to_string() + " overlap");
  }
  return RolePartition{g0.complement(), g1.complement(), g0.intersect(g1)};
}

}  // namespace mrsession

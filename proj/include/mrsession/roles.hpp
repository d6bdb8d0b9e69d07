#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mrsession/error.hpp"

namespace mrsession {

using Role = int;

/// Number of roles available to one session context; roles are 0..nrole-1.
class RoleUniverse {
 public:
  static constexpr int kMaxRoles = 64;
  static constexpr int kDefaultRoles = 3;

  RoleUniverse() : RoleUniverse(kDefaultRoles) {}
  explicit RoleUniverse(int nrole);

  int nrole() const noexcept { return nrole_; }
  bool contains(Role r) const noexcept { return r >= 0 && r < nrole_; }

  friend bool operator==(RoleUniverse, RoleUniverse) = default;

 private:
  int nrole_;
};

/// A bare set of role indices, not tied to a universe. Session types carry
/// these (inside chan payload sorts) because they are parsed without one.
class RoleSet {
 public:
  constexpr RoleSet() = default;
  RoleSet(std::initializer_list<Role> roles);
  static constexpr RoleSet from_bits(std::uint64_t bits) {
    RoleSet s;
    s.bits_ = bits;
    return s;
  }

  std::uint64_t bits() const noexcept { return bits_; }
  bool contains(Role r) const noexcept {
    return r >= 0 && r < RoleUniverse::kMaxRoles && ((bits_ >> r) & 1u) != 0;
  }
  void insert(Role r);
  bool empty() const noexcept { return bits_ == 0; }
  int size() const noexcept;
  /// One past the largest member, 0 when empty.
  int bound() const noexcept;
  std::vector<Role> members() const;

  RoleSet operator|(RoleSet o) const noexcept { return from_bits(bits_ | o.bits_); }
  RoleSet operator&(RoleSet o) const noexcept { return from_bits(bits_ & o.bits_); }
  RoleSet minus(RoleSet o) const noexcept { return from_bits(bits_ & ~o.bits_); }

  friend bool operator==(RoleSet, RoleSet) = default;
  friend auto operator<=>(RoleSet a, RoleSet b) { return a.bits_ <=> b.bits_; }

 private:
  std::uint64_t bits_ = 0;
};

/// `{0,2}`
std::string format_role_set(RoleSet s);
/// Parses `{...}` starting at `pos`, advancing it. Whitespace is allowed
/// between tokens.
RoleSet parse_role_set(std::string_view text, std::size_t& pos);
RoleSet parse_role_set(std::string_view text);

/// A set of roles inside a fixed universe; the G of chan(G,S).
class Group {
 public:
  Group(RoleUniverse u, RoleSet members);
  Group(RoleUniverse u, std::initializer_list<Role> members)
      : Group(u, RoleSet(members)) {}

  static Group full(RoleUniverse u);

  RoleUniverse universe() const noexcept { return universe_; }
  RoleSet members() const noexcept { return members_; }
  bool contains(Role r) const noexcept { return members_.contains(r); }
  bool empty() const noexcept { return members_.empty(); }
  int size() const noexcept { return members_.size(); }
  /// members ≠ ∅ and complement ≠ ∅, as channel typing requires.
  bool is_proper() const noexcept;

  Group complement() const;
  Group unite(const Group& o) const;
  Group intersect(const Group& o) const;
  bool disjoint(const Group& o) const;

  std::string to_string() const { return format_role_set(members_); }

  friend bool operator==(const Group&, const Group&) = default;

 private:
  RoleUniverse universe_;
  RoleSet members_;
};

inline Group complement(const Group& g) { return g.complement(); }

/// True iff the complements of g0 and g1 share no role.
bool complements_disjoint(const Group& g0, const Group& g1);

/// The three-way split (Ḡ₀, Ḡ₁, G₀∩G₁) that classifies chan3_link cases.
struct RolePartition {
  Group outside_g0;
  Group outside_g1;
  Group shared;

  enum class Block { OutsideG0, OutsideG1, Shared };
  Block block_of(Role r) const;
};

RolePartition role_block(const Group& g0, const Group& g1);

}  // namespace mrsession

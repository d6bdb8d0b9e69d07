#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mrsession {

enum class Errc {
  UniverseMismatch,
  RoleOutOfRange,
  SelfMessage,
  PreconditionViolated,
  Syntax,
  IllFormedSession,
  EmptyGroup,
  ProtocolViolation,
  UseAfterConsume,
  InconsistentBroadcast,
  SegmentIdentityViolation,
  SegmentIncomplete,
  SessionMismatch,
  ComplementsNotDisjoint,
  DeadlockDetected,
  NotEnabled,
  IrregularInput,
  TypeError,
  Stuck,
  ChoiceNotEnabled,
  ScriptViolation,
  UnsafeDisabled,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t pos, const std::string& what)
      : Error(Errc::Syntax, "at offset " + std::to_string(pos) + ": " + what), pos_(pos) {}

  std::size_t position() const noexcept { return pos_; }

 private:
  std::size_t pos_;
};

}  // namespace mrsession

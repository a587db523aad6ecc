#pragma once

#include <stdexcept>
#include <string>

namespace dwpkit {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DWPKIT_DEFINE_ERROR(Name)            \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

DWPKIT_DEFINE_ERROR(FactorizationFailure);
DWPKIT_DEFINE_ERROR(RankDeficiency);
DWPKIT_DEFINE_ERROR(Singular);
DWPKIT_DEFINE_ERROR(NonPositiveDiagonal);
DWPKIT_DEFINE_ERROR(DomainError);
DWPKIT_DEFINE_ERROR(ShapeMismatch);
DWPKIT_DEFINE_ERROR(SupportError);
DWPKIT_DEFINE_ERROR(SingularJacobian);
DWPKIT_DEFINE_ERROR(NonFiniteGradient);
DWPKIT_DEFINE_ERROR(NonConvergence);
DWPKIT_DEFINE_ERROR(ConfigError);
DWPKIT_DEFINE_ERROR(ConstantColumn);

#undef DWPKIT_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row, long column)
      : Error(what + " (row " + std::to_string(row) + ", column " +
              std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  long row() const { return row_; }
  long column() const { return column_; }

 private:
  long row_;
  long column_;
};

}  // namespace dwpkit

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace prodisc {

// Failure categories. The CLI maps them to exit codes 2, 3 and 4.
enum class ErrorKind { Config, Degeneracy, Residual };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string code, const std::string& detail,
        std::optional<std::pair<int, int>> site = std::nullopt)
      : std::runtime_error(compose(code, detail, site)),
        kind_(kind), code_(std::move(code)), detail_(detail), site_(site) {}

  ErrorKind kind() const { return kind_; }
  const std::string& code() const { return code_; }
  const std::string& detail() const { return detail_; }
  const std::optional<std::pair<int, int>>& site() const { return site_; }

private:
  static std::string compose(const std::string& code, const std::string& detail,
                             const std::optional<std::pair<int, int>>& site) {
    std::string s = code;
    if (site) s += " at (" + std::to_string(site->first) + "," + std::to_string(site->second) + ")";
    if (!detail.empty()) s += ": " + detail;
    return s;
  }

  ErrorKind kind_;
  std::string code_;
  std::string detail_;
  std::optional<std::pair<int, int>> site_;
};

inline Error degeneracy(const std::string& code, const std::string& detail, int i, int j) {
  return Error(ErrorKind::Degeneracy, code, detail, std::make_pair(i, j));
}

inline Error degeneracy(const std::string& code, const std::string& detail) {
  return Error(ErrorKind::Degeneracy, code, detail);
}

inline Error config_error(const std::string& code, const std::string& detail) {
  return Error(ErrorKind::Config, code, detail);
}

// Attaches a site to an error raised without one.
inline Error at_site(const Error& e, int i, int j) {
  if (e.site()) return e;
  return Error(e.kind(), e.code(), e.detail(), std::make_pair(i, j));
}

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Degeneracy: return 3;
    case ErrorKind::Residual: return 4;
  }
  return 1;
}

}  // namespace prodisc

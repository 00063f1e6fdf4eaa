#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace psf {

struct SourceLoc {
  std::string file;
  int line = 0;
  int column = 0;

  bool valid() const { return line > 0; }
};

enum class Severity { error, warning };

struct Diagnostic {
  SourceLoc loc;
  std::string message;
  Severity severity = Severity::error;
};

// Renders "file:line:col: message"; location parts are omitted when unknown.
std::string format_diagnostic(const Diagnostic& d);

/// Exception carrying one or more diagnostics. Every module reports hard
/// failures through this type so the CLI can render them uniformly.
class Error : public std::runtime_error {
 public:
  explicit Error(Diagnostic d);
  explicit Error(std::vector<Diagnostic> ds);
  Error(const SourceLoc& loc, const std::string& message);
  explicit Error(const std::string& message);

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

}  // namespace psf

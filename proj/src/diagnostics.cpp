#include "psf/diagnostics.hpp"

namespace psf {

std::string format_diagnostic(const Diagnostic& d) {
  std::string out;
  if (!d.loc.file.empty()) out += d.loc.file + ":";
  if (d.loc.valid()) out += std::to_string(d.loc.line) + ":" + std::to_string(d.loc.column) + ":";
  if (!out.empty()) out += " ";
  if (d.severity == Severity::warning) out += "warning: ";
  return out + d.message;
}

namespace {

std::string join_messages(const std::vector<Diagnostic>& ds) {
  std::string out;
  for (const auto& d : ds) {
    if (!out.empty()) out += "\n";
    out += format_diagnostic(d);
  }
  return out;
}

}  // namespace

Error::Error(Diagnostic d) : Error(std::vector<Diagnostic>{std::move(d)}) {}

Error::Error(std::vector<Diagnostic> ds)
    : std::runtime_error(join_messages(ds)), diagnostics_(std::move(ds)) {}

Error::Error(const SourceLoc& loc, const std::string& message)
    : Error(Diagnostic{loc, message, Severity::error}) {}

Error::Error(const std::string& message) : Error(Diagnostic{{}, message, Severity::error}) {}

}  // namespace psf

#pragma once

namespace psf::detail {

extern const char* const kClientServerLibrary;
extern const char* const kArchitectureLibrary;
extern const char* const kCalculatorDemo;
extern const char* const kCalculatorManifest;

}  // namespace psf::detail

#pragma once

#include <functional>
#include <iostream>
#include <string_view>

namespace lsvos {

using WarningSink = std::function<void(std::string_view)>;

/// Receives library warnings (e.g. covariance regularization). Defaults to
/// stderr; tests and the CLI may replace it.
inline WarningSink& warning_sink() {
  static WarningSink sink = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

inline void warn(std::string_view msg) {
  if (auto& sink = warning_sink()) sink(msg);
}

}  // namespace lsvos

#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace skycompass::harness {

enum class ErrorMode { Wrapped360, Folded180 };

std::string_view to_token(ErrorMode mode);  // "wrapped" / "folded"
ErrorMode error_mode_from_token(std::string_view token);

struct MetricsSummary {
  double mae = 0.0;
  double rmse = 0.0;
  double me = 0.0;
  std::size_t count = 0;
  ErrorMode mode = ErrorMode::Wrapped360;
};

/// MAE, RMSE and maximum of absolute angular errors (degrees). Empty input gives zeros.
MetricsSummary summarize(std::span<const double> errors_deg, ErrorMode mode);

}  // namespace skycompass::harness

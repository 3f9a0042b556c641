#pragma once

// Text reports of a stored run: environment and phases 1-2, then phase 3.

#include <string>

#include "aml/service/store.hpp"

namespace aml::service {

struct ReportOptions {
  bool mask = true;                  // hide client, agency and account
  std::optional<std::string> rule;   // phase 3 suspect blocks for one rule only
};

/// 1234567 -> "1.234.567"
std::string group_thousands(long long v);
/// Half-up integer percent of part over whole, 0 when whole is 0.
long long percent_half_up(std::size_t part, std::size_t whole);
/// Four decimals, half-up: 287 of 42532 -> "0.6748".
std::string percent_4dp(std::size_t part, std::size_t whole);
std::string_view class_label(ProfileClass c);

std::string render_capture_report(const AnalysisRun& run);
std::string render_analysis_report(const AnalysisRun& run, const ReportOptions& options = {});
/// Both reports, separated by a blank line.
std::string render_reports(const AnalysisRun& run, const ReportOptions& options = {});

}  // namespace aml::service

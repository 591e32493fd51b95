#pragma once

#include <filesystem>
#include <string>

namespace driftnet {

// Report kinds: loss-vs-noise | accuracy-vs-tasks | uncertainty-box |
// drift-rate-vs-noise | pc-scatter. Reads metrics.csv (and per-run artifact
// files where needed) under `records_dir`, writes report_<kind>.svg and
// report_<kind>.json next to it. Throws ReportError for unusable records.
void emit_report(const std::filesystem::path& records_dir, const std::string& kind);

}  // namespace driftnet

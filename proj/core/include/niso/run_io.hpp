#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "niso/trainer.hpp"

namespace niso {

inline constexpr const char* kMetricsHeader = "step,lr,total,recon,equiv,mult,commutator,orth";

/// Appends one CSV row per training step. Values use round-trip precision so
/// identical runs produce identical files.
class MetricsWriter {
 public:
  /// Truncates `path` and writes the header, or with `append` keeps existing
  /// rows (the header is written only if the file is empty).
  explicit MetricsWriter(const std::filesystem::path& path, bool append = false);
  void write(const StepMetrics& m);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

std::string format_metrics_row(const StepMetrics& m);

std::string eval_report_to_json(const EvalReport& r);
EvalReport eval_report_from_json(const std::string& text);
std::string eval_report_schema();

}  // namespace niso

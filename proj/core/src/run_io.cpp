#include "niso/run_io.hpp"

#include <cstdio>

#include <json.hpp>

#include "niso/error.hpp"

namespace niso {

using nlohmann::json;

std::string format_metrics_row(const StepMetrics& m) {
  const LossReport& r = m.report;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", m.step, m.lr, r.total,
                r.reconstruction, r.equivariance, r.multiplicity, r.commutator_residual, r.orthogonality_residual);
  return buf;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, bool append) {
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw InputError("cannot open metrics file " + path.string());
  if (fresh) out_ << kMetricsHeader << '\n';
}

void MetricsWriter::write(const StepMetrics& m) { out_ << format_metrics_row(m) << '\n'; }

std::string eval_report_to_json(const EvalReport& r) {
  const json j = {
      {"equivariance_error_pct", r.equivariance_error_pct},
      {"commutator_residual", r.commutator_residual},
      {"orthogonality_residual", r.orthogonality_residual},
      {"distinct_eigenvalues", r.distinct_eigenvalues},
      {"distinct_tolerance", r.distinct_tolerance},
      {"off_diagonal_fraction", r.off_diagonal_fraction},
      {"off_block_fraction", r.off_block_fraction},
      {"block_tolerance", r.block_tolerance},
      {"pairs", r.pairs},
  };
  return j.dump(2);
}

EvalReport eval_report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.equivariance_error_pct = j.at("equivariance_error_pct").get<double>();
    r.commutator_residual = j.at("commutator_residual").get<double>();
    r.orthogonality_residual = j.at("orthogonality_residual").get<double>();
    r.distinct_eigenvalues = j.at("distinct_eigenvalues").get<std::size_t>();
    r.off_diagonal_fraction = j.at("off_diagonal_fraction").get<double>();
    r.off_block_fraction = j.at("off_block_fraction").get<double>();
    r.pairs = j.at("pairs").get<std::size_t>();
    r.distinct_tolerance = j.at("distinct_tolerance").get<double>();
    r.block_tolerance = j.at("block_tolerance").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed evaluation report: ") + e.what());
  }
}

std::string eval_report_schema() {
  const json num = {{"type", "number"}};
  const json count = {{"type", "integer"}, {"minimum", 0}};
  const json schema = {
      {"$schema", "https://json-schema.org/draft/2020-12/schema"},
      {"title", "niso evaluation report"},
      {"type", "object"},
      {"additionalProperties", false},
      {"required",
       {"equivariance_error_pct", "commutator_residual", "orthogonality_residual", "distinct_eigenvalues",
        "distinct_tolerance", "off_diagonal_fraction", "off_block_fraction", "block_tolerance", "pairs"}},
      {"properties",
       {{"equivariance_error_pct", num},
        {"commutator_residual", num},
        {"orthogonality_residual", num},
        {"distinct_eigenvalues", count},
        {"distinct_tolerance", num},
        {"off_diagonal_fraction", num},
        {"off_block_fraction", num},
        {"block_tolerance", num},
        {"pairs", count}}},
  };
  return schema.dump(2);
}

}  // namespace niso

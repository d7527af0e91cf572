#pragma once
//
// Experiment harness: spec files, sweep expansion, per-run execution and
// CSV/summary output.
//

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mplab/generate.hpp"
#include "mplab/prec.hpp"

namespace mplab {

enum class ExperimentKind { ir, gmres_ir, lsq, qilu, eig, spmv_compress, block_jacobi };

std::string_view to_string(ExperimentKind k) noexcept;
std::optional<ExperimentKind> parse_kind(std::string_view name);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::ir;
  std::vector<std::uint64_t> seeds;

  // Matrix source: a generator sweep, or a Matrix Market file.
  Family family = Family::uniform;
  std::vector<std::size_t> sizes;
  std::size_t m = 0;  // rows for lsq; 0 means 2n
  std::vector<double> kappas{1.0};
  double density = 1.0;
  std::optional<std::filesystem::path> file;

  std::vector<Format> fact{fp32};
  std::vector<Format> work{fp64};
  std::vector<Format> resid{fp64};
  std::vector<Format> xfmt{fp64};

  // Every value list takes part in the sweep.
  std::map<std::string, std::vector<std::string>> params;

  /// Checks seeds, sizes, kind-specific params and their values.
  /// Throws Error(spec_error).
  void validate() const;
};

/// Parses the key = value format with [experiment], [matrix], [precisions]
/// and [params] sections. Values may be comma lists; integer lists accept
/// a..b ranges. `overrides` are "section.key=value" strings applied after
/// the file. Relative file paths resolve against `base_dir`.
/// Throws Error(spec_error) with the line number in index().
ExperimentSpec parse_spec(std::istream& in, const std::filesystem::path& base_dir = {},
                          const std::vector<std::string>& overrides = {});

/// Throws Error(io_error) when the file cannot be read.
ExperimentSpec load_spec(const std::filesystem::path& path,
                         const std::vector<std::string>& overrides = {});

struct RunRow {
  std::string kind;
  std::size_t n = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::string config;  // swept kappa and multi-valued params, key=value;...
  std::string fact, work, resid, xfmt;
  std::string status;  // solver outcome, or an error code name
  bool failed = false;  // the run threw
  std::size_t iterations = 0;
  std::optional<double> backward_error;
  std::optional<double> forward_error;
  std::optional<double> baseline;
  std::string extra;
  std::optional<double> wall_time;
};

struct RunOptions {
  std::size_t jobs = 1;
  bool timing = false;  // fill wall_time; off keeps the CSV reproducible
};

/// Executes every (size, kappa, precisions, params, seed) point in spec
/// order. Per-run failures become rows with failed = true.
std::vector<RunRow> run_experiment(const ExperimentSpec& spec, const RunOptions& opt = {});

void write_csv(std::ostream& out, const std::vector<RunRow>& rows);
std::string csv_header();
std::string csv_line(const RunRow& row);

struct SummaryRow {
  std::string kind;
  std::size_t n = 0;
  std::string config;
  std::string precisions;  // fact/work/resid/x
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::optional<double> geomean;  // of backward_error, or forward_error if absent
  std::optional<double> p15, p85;
  std::optional<double> baseline_geomean;
  double mean_iterations = 0.0;
};

/// Groups rows by (n, config, precisions) in first-seen order.
std::vector<SummaryRow> summarize(const std::vector<RunRow>& rows);
void print_summary(std::ostream& out, const std::vector<SummaryRow>& summary);

/// Linear interpolation between order statistics; q in [0, 1].
double percentile(std::vector<double> v, double q);
/// exp(mean(log v)) over positive entries; nullopt when there are none.
std::optional<double> geometric_mean(const std::vector<double>& v);

}  // namespace mplab

// mplab: experiment runner, matrix generator and format table.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "mplab/error.hpp"
#include "mplab/experiment.hpp"
#include "mplab/generate.hpp"
#include "mplab/matrix_market.hpp"
#include "mplab/prec.hpp"

namespace {

constexpr int kExitSpec = 1;
constexpr int kExitIo = 2;
constexpr int kExitAllFailed = 3;

int exit_code_for(const mplab::Error& e) {
  switch (e.code()) {
    case mplab::ErrorCode::io_error:
    case mplab::ErrorCode::parse_error:
    case mplab::ErrorCode::unsupported_field:
      return kExitIo;
    default:
      return kExitSpec;
  }
}

int cmd_run(const std::string& spec_path, const std::string& out_path,
            std::optional<std::uint64_t> seed, std::size_t jobs, bool timing,
            const std::vector<std::string>& overrides, bool quiet) {
  std::vector<std::string> all = overrides;
  if (seed) all.push_back("experiment.seeds=" + std::to_string(*seed));
  const mplab::ExperimentSpec spec = mplab::load_spec(spec_path, all);

  mplab::RunOptions opt;
  opt.jobs = jobs;
  opt.timing = timing;
  const auto rows = mplab::run_experiment(spec, opt);

  if (out_path.empty() || out_path == "-") {
    mplab::write_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw mplab::Error(mplab::ErrorCode::io_error, "cannot write " + out_path);
    mplab::write_csv(out, rows);
    out.close();
    if (!out) throw mplab::Error(mplab::ErrorCode::io_error, "write failed for " + out_path);
  }
  if (!quiet) {
    // Keep stdout clean for CSV when no --out is given.
    std::ostream& s = out_path.empty() || out_path == "-" ? std::cerr : std::cout;
    mplab::print_summary(s, mplab::summarize(rows));
  }
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.failed ? 1 : 0;
  return !rows.empty() && failed == rows.size() ? kExitAllFailed : 0;
}

int cmd_gen(const std::string& family_name, std::size_t n, double kappa, std::size_t m,
            double density, std::uint64_t seed, const std::string& mm_path) {
  const auto family = mplab::parse_family(family_name);
  if (!family) {
    throw mplab::Error(mplab::ErrorCode::spec_error, "unknown family '" + family_name + "'");
  }
  mplab::MatrixGenerator gen;
  gen.family = *family;
  gen.n = n;
  gen.m = m;
  gen.kappa = kappa;
  gen.density = density;
  mplab::Rng rng(seed);
  const auto g = mplab::generate(gen, rng);
  const mplab::CsrMatrix a = std::holds_alternative<mplab::CsrMatrix>(g)
                                 ? std::get<mplab::CsrMatrix>(g)
                                 : mplab::CsrMatrix::from_dense(std::get<mplab::DenseMatrix>(g));
  if (mm_path.empty() || mm_path == "-") {
    mplab::write_matrix_market(std::cout, a);
  } else {
    mplab::save_matrix_market(mm_path, a);
    std::cerr << "wrote " << a.rows() << "x" << a.cols() << " (" << a.nnz() << " nonzeros) to "
              << mm_path << "\n";
  }
  return 0;
}

int cmd_formats() {
  std::printf("%-6s %4s %4s %12s %12s %12s %12s\n", "name", "exp", "sig", "u", "x_max", "x_min",
              "x_min_sub");
  for (const auto& f : {mplab::fp16, mplab::bf16, mplab::fp32, mplab::fp64}) {
    std::printf("%-6s %4d %4d %12.6e %12.6e %12.6e %12.6e\n", mplab::format_name(f).c_str(),
                f.exp_bits, f.sig_bits, f.unit_roundoff(), f.x_max(), f.x_min(),
                f.x_min_positive());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mplab: multiprecision linear algebra experiments"};
  app.require_subcommand(1);

  std::string spec_path, out_path;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool timing = false, quiet = false;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run an experiment spec and write CSV");
  run->add_option("spec", spec_path, "Spec file")->required();
  run->add_option("--out,-o", out_path, "CSV output path (default stdout)");
  run->add_option("--seed", seed, "Run this single seed instead of the spec's list");
  run->add_option("--jobs,-j", jobs, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--set", overrides, "Override a spec entry, section.key=value");
  run->add_flag("--timing", timing, "Fill the wall_time column (output is then not reproducible)");
  run->add_flag("--quiet,-q", quiet, "Skip the summary table");

  std::string family;
  std::size_t n = 0, m = 0;
  double kappa = 1.0, density = 1.0;
  std::uint64_t gen_seed = 0;
  std::string mm_path;
  auto* gen = app.add_subcommand("gen", "Generate a matrix as Matrix Market");
  gen->add_option("family", family, "uniform, randsvd, laplacian2d or spd-shifted")->required();
  gen->add_option("n", n, "Columns (grid side for laplacian2d)")->required();
  gen->add_option("--kappa", kappa, "randsvd condition number");
  gen->add_option("--m", m, "Rows for rectangular families");
  gen->add_option("--density", density, "spd-shifted density");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--mm", mm_path, "Output .mtx path (default stdout)");

  app.add_subcommand("formats", "Print the format constant table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitSpec;
  }

  try {
    if (*run) return cmd_run(spec_path, out_path, seed, jobs, timing, overrides, quiet);
    if (*gen) return cmd_gen(family, n, kappa, m, density, gen_seed, mm_path);
    return cmd_formats();
  } catch (const mplab::Error& e) {
    std::cerr << "mplab: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

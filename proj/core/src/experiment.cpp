#include "mplab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

#include "mplab/dense.hpp"
#include "mplab/eig.hpp"
#include "mplab/error.hpp"
#include "mplab/matrix_market.hpp"
#include "mplab/qilu.hpp"
#include "mplab/refine.hpp"
#include "mplab/sparse.hpp"

namespace mplab {

std::string_view to_string(ExperimentKind k) noexcept {
  switch (k) {
    case ExperimentKind::ir:
      return "ir";
    case ExperimentKind::gmres_ir:
      return "gmres-ir";
    case ExperimentKind::lsq:
      return "lsq";
    case ExperimentKind::qilu:
      return "qilu";
    case ExperimentKind::eig:
      return "eig";
    case ExperimentKind::spmv_compress:
      return "spmv-compress";
    case ExperimentKind::block_jacobi:
      return "block-jacobi";
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_kind(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), '_', '-');
  for (auto k : {ExperimentKind::ir, ExperimentKind::gmres_ir, ExperimentKind::lsq,
                 ExperimentKind::qilu, ExperimentKind::eig, ExperimentKind::spmv_compress,
                 ExperimentKind::block_jacobi}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void spec_fail(const std::string& what, std::optional<std::size_t> line = {}) {
  std::string msg = "spec";
  if (line) msg += " line " + std::to_string(*line);
  throw Error(ErrorCode::spec_error, msg + ": " + what, line);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(',', start);
    std::string t = trim(s.substr(start, p == std::string_view::npos ? s.npos : p - start));
    if (!t.empty()) out.push_back(std::move(t));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

template <class T>
std::optional<T> parse_int(std::string_view s) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

template <class T>
std::vector<T> int_list(const std::string& value, std::optional<std::size_t> line) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) {
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const auto lo = parse_int<T>(trim(item.substr(0, dots)));
      const auto hi = parse_int<T>(trim(item.substr(dots + 2)));
      if (!lo || !hi || *lo > *hi) spec_fail("bad range '" + item + "'", line);
      for (T v = *lo;; ++v) {
        out.push_back(v);
        if (v == *hi) break;
      }
    } else {
      const auto v = parse_int<T>(item);
      if (!v) spec_fail("bad integer '" + item + "'", line);
      out.push_back(*v);
    }
  }
  if (out.empty()) spec_fail("empty list", line);
  return out;
}

std::vector<Format> format_list(const std::string& value, std::optional<std::size_t> line) {
  std::vector<Format> out;
  for (const auto& item : split_list(value)) {
    const auto f = parse_format(item);
    if (!f) spec_fail("unknown format '" + item + "'", line);
    out.push_back(*f);
  }
  if (out.empty()) spec_fail("empty format list", line);
  return out;
}

std::string fmt_num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void apply_entry(ExperimentSpec& spec, const std::string& section, const std::string& key,
                 const std::string& value, const std::filesystem::path& base_dir,
                 std::optional<std::size_t> line) {
  if (section == "experiment") {
    if (key == "kind") {
      const auto k = parse_kind(value);
      if (!k) spec_fail("unknown kind '" + value + "'", line);
      spec.kind = *k;
    } else if (key == "seeds") {
      spec.seeds = int_list<std::uint64_t>(value, line);
    } else {
      spec_fail("unknown key '" + key + "' in [experiment]", line);
    }
  } else if (section == "matrix") {
    if (key == "family") {
      const auto f = parse_family(value);
      if (!f) spec_fail("unknown family '" + value + "'", line);
      spec.family = *f;
    } else if (key == "n" || key == "sizes") {
      spec.sizes = int_list<std::size_t>(value, line);
    } else if (key == "m") {
      spec.m = int_list<std::size_t>(value, line).front();
    } else if (key == "kappa") {
      spec.kappas.clear();
      for (const auto& item : split_list(value)) {
        const auto v = parse_double(item);
        if (!v) spec_fail("bad kappa '" + item + "'", line);
        spec.kappas.push_back(*v);
      }
      if (spec.kappas.empty()) spec_fail("empty kappa list", line);
    } else if (key == "density") {
      const auto v = parse_double(value);
      if (!v) spec_fail("bad density '" + value + "'", line);
      spec.density = *v;
    } else if (key == "file") {
      std::filesystem::path p(value);
      spec.file = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    } else {
      spec_fail("unknown key '" + key + "' in [matrix]", line);
    }
  } else if (section == "precisions") {
    if (key == "fact") {
      spec.fact = format_list(value, line);
    } else if (key == "work") {
      spec.work = format_list(value, line);
    } else if (key == "resid") {
      spec.resid = format_list(value, line);
    } else if (key == "x") {
      spec.xfmt = format_list(value, line);
    } else {
      spec_fail("unknown key '" + key + "' in [precisions]", line);
    }
  } else if (section == "params") {
    auto list = split_list(value);
    if (list.empty()) spec_fail("empty value for '" + key + "'", line);
    spec.params[key] = std::move(list);
  } else {
    spec_fail("unknown section [" + section + "]", line);
  }
}

// --- typed per-run parameters -------------------------------------------

struct Params {
  double tol = 0.0;
  std::size_t max_iters = 50;
  double theta = 0.1;
  bool escalate = false;
  long c0 = 2;
  double inner_tol = 0.0;
  std::size_t inner_maxit = 0;
  std::size_t restart = 0;
  bool tri_fact = false;

  int r = -1;
  ProductRounding rounding = ProductRounding::truncate;

  std::size_t steps = 4;
  NormChoice norm = NormChoice::frobenius;

  std::size_t k = kMaxClusters;
  double tau = 0x1p-24;
  std::optional<Format> residual;
  std::string values = "source";
  double width = 2e-3;
  std::size_t kmeans_iters = 50;

  std::size_t block_size = 32;
  double digit_tau = 0.1;
  Regularity regularity = Regularity::frobenius;
  std::size_t maxit = 0;
};

const std::map<ExperimentKind, std::set<std::string>>& known_params() {
  static const std::map<ExperimentKind, std::set<std::string>> table{
      {ExperimentKind::ir, {"tol", "max_iters", "theta", "escalate"}},
      {ExperimentKind::gmres_ir,
       {"tol", "max_iters", "theta", "escalate", "inner_tol", "inner_maxit", "restart",
        "tri_fact"}},
      {ExperimentKind::lsq,
       {"tol", "max_iters", "theta", "c0", "inner_tol", "inner_maxit", "restart"}},
      {ExperimentKind::qilu, {"r", "rounding"}},
      {ExperimentKind::eig, {"steps", "tol", "norm"}},
      {ExperimentKind::spmv_compress, {"k", "tau", "residual", "values", "width", "kmeans_iters"}},
      {ExperimentKind::block_jacobi, {"block_size", "digit_tau", "regularity", "tol", "maxit"}},
  };
  return table;
}

double need_double(const std::string& key, const std::string& v) {
  const auto d = parse_double(v);
  if (!d) spec_fail("param " + key + ": bad number '" + v + "'");
  return *d;
}

std::size_t need_size(const std::string& key, const std::string& v) {
  const auto d = parse_int<std::size_t>(v);
  if (!d) spec_fail("param " + key + ": bad integer '" + v + "'");
  return *d;
}

bool need_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  spec_fail("param " + key + ": bad boolean '" + v + "'");
}

Params typed_params(ExperimentKind kind, const std::map<std::string, std::string>& p) {
  Params out;
  if (kind == ExperimentKind::eig) out.tol = 1e-13;
  if (kind == ExperimentKind::block_jacobi) out.tol = 1e-10;
  for (const auto& [key, v] : p) {
    if (key == "tol") {
      out.tol = need_double(key, v);
      if (!(out.tol >= 0.0)) spec_fail("param tol must be >= 0");
    } else if (key == "max_iters") {
      out.max_iters = need_size(key, v);
    } else if (key == "theta") {
      out.theta = need_double(key, v);
    } else if (key == "escalate") {
      out.escalate = need_bool(key, v);
    } else if (key == "c0") {
      out.c0 = static_cast<long>(need_size(key, v));
    } else if (key == "inner_tol") {
      out.inner_tol = need_double(key, v);
    } else if (key == "inner_maxit") {
      out.inner_maxit = need_size(key, v);
    } else if (key == "restart") {
      out.restart = need_size(key, v);
    } else if (key == "tri_fact") {
      out.tri_fact = need_bool(key, v);
    } else if (key == "r") {
      const auto r = need_size(key, v);
      if (r > 31) spec_fail("param r must lie in [0, 31]");
      out.r = static_cast<int>(r);
    } else if (key == "rounding") {
      if (v == "truncate") {
        out.rounding = ProductRounding::truncate;
      } else if (v == "nearest") {
        out.rounding = ProductRounding::nearest;
      } else {
        spec_fail("param rounding: expected truncate or nearest");
      }
    } else if (key == "steps") {
      out.steps = need_size(key, v);
    } else if (key == "norm") {
      if (v == "frobenius") {
        out.norm = NormChoice::frobenius;
      } else if (v == "two-norm" || v == "2") {
        out.norm = NormChoice::two_norm_estimate;
      } else {
        spec_fail("param norm: expected frobenius or two-norm");
      }
    } else if (key == "k") {
      out.k = need_size(key, v);
      if (out.k < 1 || out.k > kMaxClusters) spec_fail("param k must lie in [1, 256]");
    } else if (key == "tau") {
      out.tau = need_double(key, v);
      if (!(out.tau >= 0.0)) spec_fail("param tau must be >= 0");
    } else if (key == "residual") {
      out.residual = parse_format(v);
      if (!out.residual) spec_fail("param residual: unknown format '" + v + "'");
    } else if (key == "values") {
      if (v != "source" && v != "lobes") spec_fail("param values: expected source or lobes");
      out.values = v;
    } else if (key == "width") {
      out.width = need_double(key, v);
    } else if (key == "kmeans_iters") {
      out.kmeans_iters = need_size(key, v);
    } else if (key == "block_size") {
      out.block_size = need_size(key, v);
      if (out.block_size == 0) spec_fail("param block_size must be >= 1");
    } else if (key == "digit_tau") {
      out.digit_tau = need_double(key, v);
    } else if (key == "regularity") {
      if (v == "frobenius") {
        out.regularity = Regularity::frobenius;
      } else if (v == "condition") {
        out.regularity = Regularity::condition;
      } else {
        spec_fail("param regularity: expected frobenius or condition");
      }
    } else if (key == "maxit") {
      out.maxit = need_size(key, v);
    }
  }
  if (kind == ExperimentKind::qilu && out.r < 0) spec_fail("qilu needs param r");
  return out;
}

// --- sweep expansion ----------------------------------------------------

struct Point {
  std::size_t n = 0;  // generator size (grid side for laplacian2d)
  double kappa = 1.0;
  Format fact, work, resid, xfmt;
  std::string config;
  Params params;
  std::uint64_t seed = 0;
};

std::vector<std::map<std::string, std::string>> param_grid(
    const std::map<std::string, std::vector<std::string>>& params) {
  std::vector<std::map<std::string, std::string>> grid{{}};
  for (const auto& [key, values] : params) {
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& g : grid) {
      for (const auto& v : values) {
        auto h = g;
        h[key] = v;
        next.push_back(std::move(h));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

std::vector<Point> expand(const ExperimentSpec& spec) {
  std::vector<Point> pts;
  const auto grid = param_grid(spec.params);
  const std::vector<std::size_t> sizes = spec.file ? std::vector<std::size_t>{0} : spec.sizes;
  const bool kappa_swept = spec.kappas.size() > 1 || spec.family == Family::randsvd;
  for (std::size_t n : sizes) {
    for (double kappa : spec.kappas) {
      for (const auto& f : spec.fact)
        for (const auto& w : spec.work)
          for (const auto& r : spec.resid)
            for (const auto& x : spec.xfmt)
              for (const auto& g : grid) {
                const Params typed = typed_params(spec.kind, g);
                std::string config;
                if (kappa_swept && !spec.file) config = "kappa=" + fmt_num(kappa);
                for (const auto& [key, v] : g) {
                  if (spec.params.at(key).size() < 2) continue;
                  if (!config.empty()) config += ';';
                  config += key + "=" + v;
                }
                for (auto seed : spec.seeds) pts.push_back({n, kappa, f, w, r, x, config, typed, seed});
              }
    }
  }
  return pts;
}

// --- execution ----------------------------------------------------------

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Vector random_vector(std::size_t n, Rng& rng) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

DenseMatrix as_dense(const GeneratedMatrix& g) {
  if (const auto* d = std::get_if<DenseMatrix>(&g)) return *d;
  return std::get<CsrMatrix>(g).to_dense();
}

CsrMatrix as_csr(const GeneratedMatrix& g) {
  if (const auto* c = std::get_if<CsrMatrix>(&g)) return *c;
  return CsrMatrix::from_dense(std::get<DenseMatrix>(g));
}

void require_square(std::size_t rows, std::size_t cols, ExperimentKind kind) {
  if (rows != cols) {
    throw Error(ErrorCode::dimension_mismatch,
                std::string(to_string(kind)) + " needs a square matrix");
  }
}

struct Context {
  const ExperimentSpec* spec = nullptr;
  std::shared_ptr<const GeneratedMatrix> file_matrix;
};

GeneratedMatrix make_matrix(const Context& ctx, const Point& pt, std::size_t rows, Rng& rng) {
  if (ctx.file_matrix) return *ctx.file_matrix;
  MatrixGenerator gen;
  gen.family = ctx.spec->family;
  gen.n = pt.n;
  gen.m = rows;
  gen.kappa = pt.kappa;
  gen.density = ctx.spec->density;
  return generate(gen, rng);
}

IrConfig ir_config(const Point& pt) {
  IrConfig cfg;
  cfg.fact_fmt = pt.fact;
  cfg.work_fmt = pt.work;
  cfg.resid_fmt = pt.resid;
  cfg.x_fmt = pt.xfmt;
  cfg.tol = pt.params.tol;
  cfg.max_iters = pt.params.max_iters;
  cfg.theta = pt.params.theta;
  cfg.escalate = pt.params.escalate;
  return cfg;
}

GmresOptions gmres_options(const Params& p) {
  GmresOptions g;
  g.inner_tol = p.inner_tol;
  g.inner_maxit = p.inner_maxit;
  g.restart = p.restart;
  g.tri_solves_in_fact_fmt = p.tri_fact;
  return g;
}

void run_ir(const Context& ctx, const Point& pt, RunRow& row, bool use_gmres) {
  Rng rng(mix(pt.seed, pt.n));
  const DenseMatrix a = as_dense(make_matrix(ctx, pt, 0, rng));
  require_square(a.rows(), a.cols(), ctx.spec->kind);
  row.n = a.cols();
  row.m = a.rows();
  const Vector x_true = random_vector(a.cols(), rng);
  const Vector b = matvec(a, x_true);
  IrConfig cfg = ir_config(pt);
  if (use_gmres) cfg.inner = gmres_options(pt.params);
  const IrResult res = use_gmres ? gmres_ir_solve(a, b, cfg, x_true) : ir_solve(a, b, cfg, x_true);
  const auto& rep = res.report;
  row.status = std::string(to_string(rep.status));
  row.iterations = rep.iterations;
  row.backward_error = rep.backward_errors.back();
  if (!rep.forward_errors.empty()) row.forward_error = rep.forward_errors.back();
  row.baseline = rep.backward_errors.front();
  row.extra = std::string("scaled=") + (rep.scaled ? "1" : "0");
  if (rep.rescales) row.extra += ";rescales=" + std::to_string(rep.rescales);
  if (use_gmres) {
    std::size_t inner = 0;
    for (auto v : rep.inner_iterations) inner += v;
    row.extra += ";inner=" + std::to_string(inner);
  }
  if (cfg.x_fmt != pt.xfmt) row.extra += ";x=" + format_name(cfg.x_fmt);
}

void run_lsq(const Context& ctx, const Point& pt, RunRow& row) {
  Rng rng(mix(pt.seed, pt.n));
  const std::size_t rows = ctx.spec->m ? ctx.spec->m : 2 * pt.n;
  const DenseMatrix a = as_dense(make_matrix(ctx, pt, rows, rng));
  row.n = a.cols();
  row.m = a.rows();
  const Vector b = random_vector(a.rows(), rng);
  IrConfig cfg = ir_config(pt);
  cfg.inner = gmres_options(pt.params);
  const LsqResult res = lsq_gmres_ir(a, b, cfg, pt.params.theta, pt.params.c0);
  row.status = std::string(to_string(res.report.status));
  row.iterations = res.report.iterations;
  row.backward_error = normal_equations_backward_error(a, res.x, b);

  // Binary64 normal equations via Cholesky as the reference point.
  const DenseMatrix g = matmul(a.transpose(), a);
  const Vector atb = matvec_transposed(a, b);
  try {
    const DenseMatrix r = chol_emulated(g, fp64);
    const Vector y = tri_solve_emulated(r, atb, Triangle::upper, false, fp64, true);
    const Vector x = tri_solve_emulated(r, y, Triangle::upper, false, fp64);
    row.baseline = normal_equations_backward_error(a, x, b);
    row.forward_error = forward_error(res.x, x);
  } catch (const Error&) {
    // A Gram matrix that is indefinite in binary64 has no baseline.
  }
  std::size_t inner = 0;
  for (auto v : res.report.inner_iterations) inner += v;
  row.extra = "inner=" + std::to_string(inner) + ";flops=" + std::to_string(res.flops_per_apply);
  if (res.report.shift_c) row.extra += ";c=" + std::to_string(*res.report.shift_c);
}

void run_qilu(const Context& ctx, const Point& pt, RunRow& row) {
  Rng rng(mix(pt.seed, pt.n));
  const DenseMatrix a = as_dense(make_matrix(ctx, pt, 0, rng));
  require_square(a.rows(), a.cols(), ctx.spec->kind);
  row.n = a.cols();
  row.m = a.rows();
  const Vector x_true = random_vector(a.cols(), rng);
  const Vector b = matvec(a, x_true);

  // Baseline first: it is informative even when the integer factorization fails.
  try {
    const LuFactors f = lu_emulated(a, pt.fact);
    const Vector xb = lu_solve(f, b, pt.fact);
    row.baseline = normalized_residual(a, xb, b);
  } catch (const Error&) {
  }
  const QiluFactors f = qilu_factor(a, pt.params.r, pt.params.rounding);
  const Vector x = qilu_solve(f, b);
  row.status = "ok";
  row.backward_error = normalized_residual(a, x, b);
  row.forward_error = forward_error(x, x_true);
  row.extra = "m=" + fmt_num(f.m);
}

void run_eig(const Context& ctx, const Point& pt, RunRow& row) {
  Rng rng(mix(pt.seed, pt.n));
  DenseMatrix a = as_dense(make_matrix(ctx, pt, 0, rng));
  require_square(a.rows(), a.cols(), ctx.spec->kind);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
  row.n = a.cols();
  row.m = a.rows();
  const double a2 = norm2_symmetric(a);
  EigenPairs pairs = jacobi_eig(a, pt.fact, pt.fact.unit_roundoff());
  auto max_of = [](const Vector& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); };
  double res = max_of(eigen_residuals(a, pairs, a2));
  row.baseline = res;
  std::string history = fmt_num(res);
  std::size_t steps = 0;
  while (res >= pt.params.tol && steps < pt.params.steps) {
    RefineResult r = refine_syev(a, pairs, pt.params.norm);
    pairs = std::move(r.pairs);
    res = max_of(r.step.residuals);
    history += "/" + fmt_num(res);
    ++steps;
  }
  row.iterations = steps;
  row.status = res < pt.params.tol ? "converged" : "max_iters";
  row.backward_error = res;
  row.extra = "history=" + history;
}

void run_spmv(const Context& ctx, const Point& pt, RunRow& row) {
  Rng rng(mix(pt.seed, pt.n));
  CsrMatrix a = as_csr(make_matrix(ctx, pt, 0, rng));
  if (pt.params.values == "lobes") {
    // Two narrow lobes around -1.5 and +1.5 on the existing pattern.
    std::vector<double> v(a.nnz());
    for (double& x : v) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      x = sign * (1.5 + pt.params.width * rng.normal());
    }
    a = a.with_values(std::move(v));
  }
  row.n = a.cols();
  row.m = a.rows();
  const Vector x = random_vector(a.cols(), rng);
  const ClusteredCsr c =
      compress_clustered(a, pt.params.k, pt.params.tau, rng, pt.params.residual, pt.params.kmeans_iters);

  std::vector<double> abs_vals(a.values().begin(), a.values().end());
  for (double& v : abs_vals) v = std::abs(v);
  Vector abs_x(x);
  for (double& v : abs_x) v = std::abs(v);
  const double scale = norm_inf(spmv(a.with_values(abs_vals), abs_x));

  const Vector y = spmv(a, x);
  auto rel = [&](const Vector& z) {
    double m = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) m = std::max(m, std::abs(z[i] - y[i]));
    return scale > 0.0 ? m / scale : m;
  };
  row.forward_error = rel(spmv_clustered(c, x));
  row.baseline = rel(spmv(a.with_values(round_vector(a.values(), fp32)), x));
  row.status = "ok";
  const Footprint fp = footprint_bits(c);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& f : c.residual_fmt) {
    counts[f.same_layout(fp16) ? 0 : f.same_layout(fp32) ? 1 : 2]++;
  }
  row.extra = "bits=" + fmt_num(fp.bits_per_value) + ";clusters=" +
              std::to_string(c.centers.size()) + ";fp16=" + std::to_string(counts[0]) +
              ";fp32=" + std::to_string(counts[1]) + ";fp64=" + std::to_string(counts[2]);
}

void run_block_jacobi(const Context& ctx, const Point& pt, RunRow& row) {
  Rng rng(mix(pt.seed, pt.n));
  const CsrMatrix a = as_csr(make_matrix(ctx, pt, 0, rng));
  require_square(a.rows(), a.cols(), ctx.spec->kind);
  row.n = a.cols();
  row.m = a.rows();
  const Vector b = random_vector(a.rows(), rng);
  const std::size_t maxit = pt.params.maxit ? pt.params.maxit : 10 * a.rows();

  BlockJacobiOptions opt;
  opt.block_size = pt.params.block_size;
  opt.digit_tau = pt.params.digit_tau;
  opt.regularity = pt.params.regularity;
  const BlockJacobiPrecond adaptive = block_jacobi_build(a, opt);
  opt.force_fmt = fp64;
  const BlockJacobiPrecond reference = block_jacobi_build(a, opt);

  const PcgResult res = pcg(a, b, &adaptive, pt.params.tol, maxit);
  const PcgResult ref = pcg(a, b, &reference, pt.params.tol, maxit);
  row.status = std::string(to_string(res.status));
  row.iterations = res.iterations;
  row.backward_error = res.res_history.back();
  row.baseline = static_cast<double>(ref.iterations);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& f : adaptive.block_fmt) {
    counts[f.same_layout(fp16) ? 0 : f.same_layout(fp32) ? 1 : 2]++;
  }
  std::size_t singular = 0;
  for (bool s : adaptive.singular) singular += s ? 1 : 0;
  row.extra = "fp16=" + std::to_string(counts[0]) + ";fp32=" + std::to_string(counts[1]) +
              ";fp64=" + std::to_string(counts[2]) + ";singular=" + std::to_string(singular);
}

RunRow run_point(const Context& ctx, const Point& pt, bool timing) {
  RunRow row;
  row.kind = std::string(to_string(ctx.spec->kind));
  row.n = pt.n;
  row.m = pt.n;
  row.seed = pt.seed;
  row.config = pt.config;
  row.fact = format_name(pt.fact);
  row.work = format_name(pt.work);
  row.resid = format_name(pt.resid);
  row.xfmt = format_name(pt.xfmt);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (ctx.spec->kind) {
      case ExperimentKind::ir:
        run_ir(ctx, pt, row, false);
        break;
      case ExperimentKind::gmres_ir:
        run_ir(ctx, pt, row, true);
        break;
      case ExperimentKind::lsq:
        run_lsq(ctx, pt, row);
        break;
      case ExperimentKind::qilu:
        run_qilu(ctx, pt, row);
        break;
      case ExperimentKind::eig:
        run_eig(ctx, pt, row);
        break;
      case ExperimentKind::spmv_compress:
        run_spmv(ctx, pt, row);
        break;
      case ExperimentKind::block_jacobi:
        run_block_jacobi(ctx, pt, row);
        break;
    }
  } catch (const Error& e) {
    row.status = std::string(to_string(e.code()));
    row.failed = true;
  }
  if (timing) {
    row.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return row;
}

std::string opt_num(const std::optional<double>& v) { return v ? fmt_num(*v) : std::string(); }

}  // namespace

void ExperimentSpec::validate() const {
  if (seeds.empty()) spec_fail("seeds must be non-empty");
  if (!file && sizes.empty()) spec_fail("[matrix] needs n or file");
  if (!file) {
    for (auto n : sizes)
      if (n == 0) spec_fail("matrix sizes must be >= 1");
    for (double k : kappas)
      if (!(k >= 1.0)) spec_fail("kappa must be >= 1");
    if (!(density > 0.0 && density <= 1.0)) spec_fail("density must lie in (0, 1]");
  }
  const auto& allowed = known_params().at(kind);
  for (const auto& [key, values] : params) {
    if (!allowed.count(key)) {
      spec_fail("param '" + key + "' is not used by kind " + std::string(to_string(kind)));
    }
  }
  // Type-check every value, and the kind's required params.
  for (const auto& g : param_grid(params)) typed_params(kind, g);
}

ExperimentSpec parse_spec(std::istream& in, const std::filesystem::path& base_dir,
                          const std::vector<std::string>& overrides) {
  ExperimentSpec spec;
  bool have_kind = false;
  std::string section;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    const std::string t = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') spec_fail("unterminated section header", lineno);
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) spec_fail("expected key = value", lineno);
    if (section.empty()) spec_fail("entry outside a section", lineno);
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) spec_fail("empty key", lineno);
    if (value.empty()) spec_fail("empty value for '" + key + "'", lineno);
    if (section == "experiment" && key == "kind") have_kind = true;
    apply_entry(spec, section, key, value, base_dir, lineno);
  }
  for (const auto& o : overrides) {
    const auto dot = o.find('.');
    const auto eq = o.find('=');
    if (dot == std::string::npos || eq == std::string::npos || dot > eq) {
      spec_fail("override '" + o + "' is not section.key=value");
    }
    const std::string sec = trim(o.substr(0, dot));
    const std::string key = trim(o.substr(dot + 1, eq - dot - 1));
    if (sec == "experiment" && key == "kind") have_kind = true;
    apply_entry(spec, sec, key, trim(o.substr(eq + 1)), {}, std::nullopt);
  }
  if (!have_kind) spec_fail("[experiment] kind is required");
  spec.validate();
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path,
                         const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  return parse_spec(in, path.parent_path(), overrides);
}

std::vector<RunRow> run_experiment(const ExperimentSpec& spec, const RunOptions& opt) {
  spec.validate();
  Context ctx;
  ctx.spec = &spec;
  if (spec.file) {
    auto mm = load_matrix_market(*spec.file);
    std::visit([&](auto&& m) { ctx.file_matrix = std::make_shared<const GeneratedMatrix>(std::move(m)); },
               std::move(mm));
  }
  const std::vector<Point> pts = expand(spec);
  std::vector<RunRow> rows(pts.size());
  const std::size_t jobs = std::max<std::size_t>(1, std::min(opt.jobs, pts.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < pts.size();) rows[i] = run_point(ctx, pts[i], opt.timing);
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

std::string csv_header() {
  return "kind,n,m,seed,config,fact,work,resid,xfmt,status,iterations,backward_error,"
         "forward_error,baseline,extra,wall_time";
}

std::string csv_line(const RunRow& r) {
  std::ostringstream s;
  s << r.kind << ',' << r.n << ',' << r.m << ',' << r.seed << ',' << r.config << ',' << r.fact
    << ',' << r.work << ',' << r.resid << ',' << r.xfmt << ',' << r.status << ',' << r.iterations
    << ',' << opt_num(r.backward_error) << ',' << opt_num(r.forward_error) << ','
    << opt_num(r.baseline) << ',' << r.extra << ',' << opt_num(r.wall_time);
  return s.str();
}

void write_csv(std::ostream& out, const std::vector<RunRow>& rows) {
  out << csv_header() << '\n';
  for (const auto& r : rows) out << csv_line(r) << '\n';
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw Error(ErrorCode::invalid_argument, "percentile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::optional<double> geometric_mean(const std::vector<double>& v) {
  double s = 0.0;
  std::size_t c = 0;
  for (double x : v) {
    if (x > 0.0 && std::isfinite(x)) {
      s += std::log(x);
      ++c;
    }
  }
  if (c == 0) return std::nullopt;
  return std::exp(s / static_cast<double>(c));
}

std::vector<SummaryRow> summarize(const std::vector<RunRow>& rows) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<double>> errs, bases;
  std::vector<double> iters;
  for (const auto& r : rows) {
    const std::string prec = r.fact + "/" + r.work + "/" + r.resid + "/" + r.xfmt;
    std::size_t g = 0;
    while (g < out.size() && !(out[g].n == r.n && out[g].config == r.config && out[g].precisions == prec)) ++g;
    if (g == out.size()) {
      SummaryRow s;
      s.kind = r.kind;
      s.n = r.n;
      s.config = r.config;
      s.precisions = prec;
      out.push_back(std::move(s));
      errs.emplace_back();
      bases.emplace_back();
      iters.push_back(0.0);
    }
    auto& s = out[g];
    ++s.runs;
    if (r.failed) {
      ++s.failed;
      continue;
    }
    const auto& e = r.backward_error ? r.backward_error : r.forward_error;
    if (e) errs[g].push_back(*e);
    if (r.baseline) bases[g].push_back(*r.baseline);
    iters[g] += static_cast<double>(r.iterations);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    auto& s = out[g];
    s.geomean = geometric_mean(errs[g]);
    if (!errs[g].empty()) {
      s.p15 = percentile(errs[g], 0.15);
      s.p85 = percentile(errs[g], 0.85);
    }
    s.baseline_geomean = geometric_mean(bases[g]);
    const std::size_t ok = s.runs - s.failed;
    s.mean_iterations = ok ? iters[g] / static_cast<double>(ok) : 0.0;
  }
  return out;
}

void print_summary(std::ostream& out, const std::vector<SummaryRow>& summary) {
  auto num = [](const std::optional<double>& v) {
    char buf[32];
    if (!v) return std::string("-");
    std::snprintf(buf, sizeof buf, "%.3e", *v);
    return std::string(buf);
  };
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-14s %6s %-24s %-22s %5s %6s %10s %10s %10s %10s %7s\n", "kind",
                "n", "config", "fact/work/resid/x", "runs", "failed", "geomean", "p15", "p85",
                "baseline", "iters");
  out << buf;
  for (const auto& s : summary) {
    std::snprintf(buf, sizeof buf, "%-14s %6zu %-24s %-22s %5zu %6zu %10s %10s %10s %10s %7.2f\n",
                  s.kind.c_str(), s.n, s.config.empty() ? "-" : s.config.c_str(),
                  s.precisions.c_str(), s.runs, s.failed, num(s.geomean).c_str(),
                  num(s.p15).c_str(), num(s.p85).c_str(), num(s.baseline_geomean).c_str(),
                  s.mean_iterations);
    out << buf;
  }
}

}  // namespace mplab

#include "shrimpmorph/unit_regression.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "shrimpmorph/data_io.hpp"
#include "shrimpmorph/errors.hpp"

namespace shrimpmorph {

namespace {

constexpr std::string_view kTableVersion = "# shrimpmorph regression models v1";
constexpr std::string_view kTableHeader = "variable alpha beta epsilon c n_train";

void check_pairs(const std::vector<CalibrationPair>& pairs) {
  for (const auto& [x, y] : pairs) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw InvalidArgument("calibration pairs must be finite");
  }
  const bool distinct = std::any_of(pairs.begin(), pairs.end(),
                                    [&](const CalibrationPair& p) { return p.first != pairs.front().first; });
  if (pairs.size() < 2 || !distinct) {
    throw DegenerateData("regression needs at least two distinct pixel values");
  }
}

struct Breakpoint {
  double value;
  double slope;  // d value / d alpha
};

// Optimal beta for fixed alpha (middle of the flat interval) and the
// derivative of that choice with respect to alpha.
struct BetaChoice {
  double beta;
  double dbeta;
};

BetaChoice best_beta(double alpha, const std::vector<CalibrationPair>& pairs, double eps,
                     std::vector<Breakpoint>& bp) {
  const std::size_t n = pairs.size();
  bp.clear();
  for (const auto& [x, y] : pairs) {
    const double r = y - alpha * x;
    bp.push_back({r - eps, -x});
    bp.push_back({r + eps, -x});
  }
  auto less = [](const Breakpoint& a, const Breakpoint& b) {
    return a.value < b.value || (a.value == b.value && a.slope < b.slope);
  };
  const auto mid = bp.begin() + static_cast<std::ptrdiff_t>(n - 1);
  std::nth_element(bp.begin(), mid, bp.end(), less);
  const Breakpoint lo = *mid;
  const Breakpoint hi = *std::min_element(mid + 1, bp.end(), less);
  return {0.5 * (lo.value + hi.value), 0.5 * (lo.slope + hi.slope)};
}

// A subgradient of the profile g(alpha) = min_beta objective.
double profile_slope(double alpha, const std::vector<CalibrationPair>& pairs, const SvrHyper& h,
                     std::vector<Breakpoint>& bp) {
  const BetaChoice b = best_beta(alpha, pairs, h.epsilon, bp);
  double slope = 0.0;
  for (const auto& [x, y] : pairs) {
    const double r = y - alpha * x - b.beta;
    if (std::abs(r) <= h.epsilon) continue;
    slope += (r > 0.0 ? 1.0 : -1.0) * (-x - b.dbeta);
  }
  return alpha + h.c * slope;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

void ScaleFactor::validate() const {
  if (!(cm_per_px > 0.0) || !std::isfinite(cm_per_px)) {
    throw InvalidArgument("scale factor must be finite and > 0");
  }
}

MeasurementSet baseline_convert(const MeasurementSet& m, const ScaleFactor& s) {
  s.validate();
  if (m.unit() != Unit::Pixels) throw UnitMismatch("baseline conversion expects pixel measurements");
  MeasurementSet out(Unit::Centimeters);
  for (const auto& [name, value] : m.values()) out.set(name, value * s.cm_per_px);
  return out;
}

double svr_objective(double alpha, double beta, const std::vector<CalibrationPair>& pairs,
                     const SvrHyper& hyper) {
  double loss = 0.0;
  for (const auto& [x, y] : pairs) loss += std::max(0.0, std::abs(y - alpha * x - beta) - hyper.epsilon);
  return 0.5 * alpha * alpha + hyper.c * loss;
}

RegressionModel fit_svr(const std::string& variable, const std::vector<CalibrationPair>& pairs,
                        const SvrHyper& hyper) {
  if (!(hyper.epsilon >= 0.0) || !(hyper.c > 0.0) || !std::isfinite(hyper.c) ||
      !std::isfinite(hyper.epsilon)) {
    throw InvalidArgument("SVR needs epsilon >= 0 and c > 0");
  }
  check_pairs(pairs);
  std::vector<Breakpoint> bp;
  bp.reserve(2 * pairs.size());

  // The minimiser satisfies alpha^2 / 2 <= g(0).
  const BetaChoice at_zero = best_beta(0.0, pairs, hyper.epsilon, bp);
  const double g0 = svr_objective(0.0, at_zero.beta, pairs, hyper);
  double lo = -std::sqrt(2.0 * g0) - 1e-12;
  double hi = -lo;
  // Bisection on the sign of a subgradient of the convex profile.
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (profile_slope(mid, pairs, hyper, bp) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  double alpha = 0.5 * (lo + hi);
  double beta = best_beta(alpha, pairs, hyper.epsilon, bp).beta;
  // Keep whichever bracket end scores lowest, so ties resolve deterministically.
  for (double cand : {lo, hi}) {
    const double b = best_beta(cand, pairs, hyper.epsilon, bp).beta;
    if (svr_objective(cand, b, pairs, hyper) < svr_objective(alpha, beta, pairs, hyper)) {
      alpha = cand;
      beta = b;
    }
  }
  return {variable, alpha, beta, hyper, pairs.size()};
}

RegressionModel fit_least_squares(const std::string& variable,
                                  const std::vector<CalibrationPair>& pairs) {
  check_pairs(pairs);
  const auto n = static_cast<double>(pairs.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pairs) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pairs) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  const double alpha = sxy / sxx;
  return {variable, alpha, my - alpha * mx, SvrHyper{0.0, 1.0}, pairs.size()};
}

RegressionSet fit_regression_set(const std::vector<MeasurementPair>& training, const SvrHyper& hyper) {
  std::map<std::string, std::vector<CalibrationPair>> by_var;
  for (const auto& [px, cm] : training) {
    for (const auto& [name, value] : px.values()) {
      if (const auto truth = cm.get(name)) by_var[name].emplace_back(value, *truth);
    }
  }
  RegressionSet out;
  for (const auto& [name, pairs] : by_var) {
    const bool distinct = std::any_of(pairs.begin(), pairs.end(),
                                      [&](const CalibrationPair& p) { return p.first != pairs.front().first; });
    if (pairs.size() >= 2 && distinct) out.emplace(name, fit_svr(name, pairs, hyper));
  }
  return out;
}

Conversion convert(const RegressionSet& models, const MeasurementSet& m) {
  if (m.unit() != Unit::Pixels) throw UnitMismatch("regression conversion expects pixel measurements");
  Conversion out;
  for (const auto& [name, value] : m.values()) {
    const auto it = models.find(name);
    if (it == models.end()) throw MissingModel("no regression model for variable '" + name + "'");
    double cm = it->second.predict(value);
    if (cm < 0.0) {
      cm = 0.0;
      out.clamped.push_back(name);
    }
    out.cm.set(name, cm);
  }
  return out;
}

ErrorStats error_stats(const std::vector<double>& predicted, const std::vector<double>& truth) {
  ErrorStats s;
  s.n = predicted.size();
  if (s.n == 0) return s;
  const auto n = static_cast<double>(s.n);
  double sq = 0.0, pct = 0.0;
  for (std::size_t i = 0; i < s.n; ++i) {
    const double e = std::abs(predicted[i] - truth[i]);
    s.mae += e / n;
    sq += e * e;
    pct += truth[i] > 0.0 ? e / truth[i] : 0.0;
  }
  double var = 0.0;
  for (std::size_t i = 0; i < s.n; ++i) {
    const double d = std::abs(predicted[i] - truth[i]) - s.mae;
    var += d * d;
  }
  s.std = std::sqrt(var / n);
  s.rmse = std::sqrt(sq / n);
  s.mape = 100.0 * pct / n;
  return s;
}

ConversionReport compare_methods(const std::vector<MeasurementPair>& test, const RegressionSet& models,
                                 const ScaleFactor& scale) {
  struct Series {
    std::vector<double> base, reg, truth;
  };
  std::map<std::string, Series> per_var;
  for (const auto& [px, gt] : test) {
    const MeasurementSet base = baseline_convert(px, scale);
    const Conversion reg = convert(models, px);
    for (const auto& [name, value] : px.values()) {
      const auto truth = gt.get(name);
      if (!truth) throw MissingVariable("ground truth lacks variable '" + name + "'");
      auto& s = per_var[name];
      s.base.push_back(*base.get(name));
      s.reg.push_back(*reg.cm.get(name));
      s.truth.push_back(*truth);
      (void)value;
    }
  }

  ConversionReport rep;
  std::array<Series, 4> groups;  // Lengths, Heights, Widths, General
  for (const auto& def : all_measurements()) {
    const auto it = per_var.find(std::string(def.name));
    if (it == per_var.end()) continue;
    const Series& s = it->second;
    rep.variables.push_back({std::string(def.name), error_stats(s.base, s.truth), error_stats(s.reg, s.truth)});
    for (std::size_t g : {static_cast<std::size_t>(def.axis), std::size_t{3}}) {
      groups[g].base.insert(groups[g].base.end(), s.base.begin(), s.base.end());
      groups[g].reg.insert(groups[g].reg.end(), s.reg.begin(), s.reg.end());
      groups[g].truth.insert(groups[g].truth.end(), s.truth.begin(), s.truth.end());
    }
  }
  const std::array<const char*, 4> names = {"Lengths", "Heights", "Widths", "General"};
  for (std::size_t g = 0; g < 4; ++g) {
    if (groups[g].truth.empty()) continue;
    rep.groups.push_back({names[g], error_stats(groups[g].base, groups[g].truth),
                          error_stats(groups[g].reg, groups[g].truth)});
  }
  return rep;
}

std::string format_regression_set(const RegressionSet& models) {
  std::string out = std::string(kTableVersion) + "\n" + std::string(kTableHeader) + "\n";
  for (const auto& [name, m] : models) {
    out += name + " " + format_double(m.alpha) + " " + format_double(m.beta) + " " +
           format_double(m.hyper.epsilon) + " " + format_double(m.hyper.c) + " " +
           std::to_string(m.n_train) + "\n";
  }
  return out;
}

RegressionSet parse_regression_set(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  RegressionSet out;
  bool saw_version = false, saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_version) {
      if (line != kTableVersion) throw ParseError("not a shrimpmorph regression table (bad version line)");
      saw_version = true;
      continue;
    }
    if (!saw_header) {
      if (line != kTableHeader) throw ParseError("line " + std::to_string(line_no) + ": bad header");
      saw_header = true;
      continue;
    }
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    if (f.size() != 6) throw ParseError("line " + std::to_string(line_no) + ": expected 6 fields");
    if (!is_known_variable(f[0])) throw UnknownVariable("unknown variable '" + f[0] + "'");
    RegressionModel m;
    m.variable = f[0];
    m.alpha = parse_double(f[1], line_no);
    m.beta = parse_double(f[2], line_no);
    m.hyper.epsilon = parse_double(f[3], line_no);
    m.hyper.c = parse_double(f[4], line_no);
    std::size_t n = 0;
    const auto [ptr, ec] = std::from_chars(f[5].data(), f[5].data() + f[5].size(), n);
    if (ec != std::errc() || ptr != f[5].data() + f[5].size()) {
      throw ParseError("line " + std::to_string(line_no) + ": bad n_train");
    }
    m.n_train = n;
    if (!std::isfinite(m.alpha) || !std::isfinite(m.beta) || !(m.hyper.epsilon >= 0.0) ||
        !(m.hyper.c > 0.0)) {
      throw ParseError("line " + std::to_string(line_no) + ": model violates its invariants");
    }
    if (!out.emplace(m.variable, m).second) throw ParseError("duplicate variable '" + m.variable + "'");
  }
  if (!saw_header) throw ParseError("regression table is missing its header");
  return out;
}

void save_regression_set(const RegressionSet& models, const std::filesystem::path& path) {
  write_text_file(path, format_regression_set(models));
}

RegressionSet load_regression_set(const std::filesystem::path& path) {
  return parse_regression_set(read_text_file(path));
}

}  // namespace shrimpmorph

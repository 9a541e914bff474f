#include "nf/eval/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

namespace nf::eval {

double angle_error(const Vec3& v, const Vec3& n, AngleMode mode) {
  // Half-angle form: exact 0 for equal vectors, and negating v swaps the two
  // norms exactly.
  const double d = (v - n).norm();
  const double s = (v + n).norm();
  const double half = mode == AngleMode::unoriented ? std::atan2(std::min(d, s), std::max(d, s))
                                                    : std::atan2(d, s);
  return 2.0 * half * 180.0 / std::numbers::pi;
}

std::vector<double> angle_errors(std::span<const Vec3> v, std::span<const Vec3> n, AngleMode mode) {
  if (v.size() != n.size()) throw InvalidArgument("angle_errors: length mismatch");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = angle_error(v[i], n[i], mode);
  return out;
}

double rmse(std::span<const double> errors) {
  if (errors.empty()) throw InvalidArgument("rmse of an empty list");
  double s = 0.0;
  for (double e : errors) s += e * e;
  return std::sqrt(s / static_cast<double>(errors.size()));
}

std::vector<double> pgp_curve(std::span<const double> errors, std::span<const double> thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw InvalidArgument("PGP thresholds must be ascending");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(thresholds.size());
  const double n = static_cast<double>(std::max<std::size_t>(sorted.size(), 1));
  for (double t : thresholds) {
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back(static_cast<double>(count) / n);
  }
  return out;
}

std::vector<double> default_pgp_thresholds() {
  std::vector<double> t;
  for (int d = 1; d <= 180; ++d) t.push_back(d);
  return t;
}

EvalReport evaluate_field(const NormalField& field, std::span<const Vec3> gt, std::string shape,
                          double noise, std::string stage) {
  EvalReport r;
  r.shape = std::move(shape);
  r.noise = noise;
  r.stage = std::move(stage);
  r.oriented_errors = angle_errors(field.vectors, gt, AngleMode::oriented);
  r.unoriented_errors = angle_errors(field.vectors, gt, AngleMode::unoriented);
  r.oriented_rmse = rmse(r.oriented_errors);
  r.unoriented_rmse = rmse(r.unoriented_errors);
  r.thresholds = default_pgp_thresholds();
  r.oriented_pgp = pgp_curve(r.oriented_errors, r.thresholds);
  r.unoriented_pgp = pgp_curve(r.unoriented_errors, r.thresholds);
  return r;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  auto at = [&](const std::vector<double>& pgp, double threshold) {
    for (std::size_t i = 0; i < report.thresholds.size(); ++i)
      if (report.thresholds[i] == threshold) return pgp[i];
    return std::nan("");
  };
  out << "shape = " << report.shape << "\n"
      << "noise = " << format_double(report.noise) << "\n"
      << "stage = " << report.stage << "\n"
      << "points = " << report.oriented_errors.size() << "\n"
      << "oriented_rmse = " << format_double(report.oriented_rmse) << "\n"
      << "unoriented_rmse = " << format_double(report.unoriented_rmse) << "\n"
      << "oriented_mean = " << format_double(mean(report.oriented_errors)) << "\n"
      << "unoriented_mean = " << format_double(mean(report.unoriented_errors)) << "\n"
      << "oriented_pgp_10 = " << format_double(at(report.oriented_pgp, 10)) << "\n"
      << "unoriented_pgp_10 = " << format_double(at(report.unoriented_pgp, 10)) << "\n"
      << "flipped_fraction = "
      << format_double(1.0 - at(report.oriented_pgp, 90)) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

void write_pgp_csv(std::span<const double> thresholds, std::span<const double> fractions,
                   const std::filesystem::path& path) {
  if (thresholds.size() != fractions.size()) throw InvalidArgument("PGP csv: length mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "threshold_deg,fraction\n";
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    out << format_double(thresholds[i]) << "," << format_double(fractions[i]) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

double mean_over_shapes(std::span<const EvalReport> reports, AngleMode mode) {
  if (reports.empty()) throw InvalidArgument("no reports to average");
  double s = 0.0;
  for (const auto& r : reports) s += mode == AngleMode::oriented ? r.oriented_rmse : r.unoriented_rmse;
  return s / static_cast<double>(reports.size());
}

}  // namespace nf::eval

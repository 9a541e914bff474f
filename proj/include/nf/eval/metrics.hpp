#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nf/common.hpp"
#include "nf/ngl/normal_field.hpp"

namespace nf::eval {

enum class AngleMode { oriented, unoriented };

// Degrees; oriented in [0, 180], unoriented in [0, 90]. The dot product is
// clamped to [-1, 1].
double angle_error(const Vec3& v, const Vec3& n, AngleMode mode);

std::vector<double> angle_errors(std::span<const Vec3> v, std::span<const Vec3> n, AngleMode mode);

// sqrt(mean(e^2)); throws InvalidArgument on an empty list.
double rmse(std::span<const double> errors);

// Fraction of errors <= each threshold. Thresholds must be ascending.
std::vector<double> pgp_curve(std::span<const double> errors, std::span<const double> thresholds);

// 1, 2, ..., 180 degrees.
std::vector<double> default_pgp_thresholds();

struct EvalReport {
  std::string shape;
  double noise = 0.0;
  std::string stage;
  std::vector<double> oriented_errors;
  std::vector<double> unoriented_errors;
  double oriented_rmse = 0.0;
  double unoriented_rmse = 0.0;
  std::vector<double> thresholds;
  std::vector<double> oriented_pgp;
  std::vector<double> unoriented_pgp;
};

EvalReport evaluate_field(const NormalField& field, std::span<const Vec3> gt, std::string shape,
                          double noise, std::string stage);

// "key = value" lines; numbers in shortest round-trip form.
void write_report(const EvalReport& report, const std::filesystem::path& path);

// Header "threshold_deg,fraction" then one row per threshold.
void write_pgp_csv(std::span<const double> thresholds, std::span<const double> fractions,
                   const std::filesystem::path& path);

// Mean of per-shape RMSE values.
double mean_over_shapes(std::span<const EvalReport> reports, AngleMode mode);

// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

}  // namespace nf::eval

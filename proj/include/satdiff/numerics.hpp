#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace satdiff {

/// Compensated (Neumaier) accumulator. Used for ledger reductions where the
/// acceptance tolerances sit near machine precision; summation order is fixed,
/// so results are bit-stable across runs.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_total(const Eigen::ArrayXd& v) {
  CompensatedSum s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s.add(v[i]);
  return s.value();
}

/// Piecewise-linear function on strictly increasing knots, with the exact
/// integral of the interpolant available in closed form (piecewise quadratic).
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  PiecewiseLinear(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() < 2 || x_.size() != y_.size())
      throw std::invalid_argument("piecewise-linear table needs >= 2 matching knots");
    for (std::size_t i = 1; i < x_.size(); ++i)
      if (!(x_[i] > x_[i - 1]))
        throw std::invalid_argument("piecewise-linear knots must be strictly increasing");
    cum_.assign(x_.size(), 0.0);
    for (std::size_t i = 1; i < x_.size(); ++i)
      cum_[i] = cum_[i - 1] + 0.5 * (y_[i] + y_[i - 1]) * (x_[i] - x_[i - 1]);
  }

  bool empty() const { return x_.empty(); }
  double front() const { return x_.front(); }
  double back() const { return x_.back(); }
  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return y_; }

  bool covers(double s) const { return !x_.empty() && s >= x_.front() && s <= x_.back(); }

  double operator()(double s) const {
    const std::size_t i = segment(s);
    const double w = (s - x_[i]) / (x_[i + 1] - x_[i]);
    return y_[i] + w * (y_[i + 1] - y_[i]);
  }

  /// Integral of the interpolant from the first knot to s; exact.
  double integral_from_front(double s) const {
    const std::size_t i = segment(s);
    const double ys = (*this)(s);
    return cum_[i] + 0.5 * (y_[i] + ys) * (s - x_[i]);
  }

  double max_value() const { return *std::max_element(y_.begin(), y_.end()); }
  double min_value() const { return *std::min_element(y_.begin(), y_.end()); }

  double max_abs_slope() const {
    double m = 0.0;
    for (std::size_t i = 1; i < x_.size(); ++i)
      m = std::max(m, std::abs((y_[i] - y_[i - 1]) / (x_[i] - x_[i - 1])));
    return m;
  }

 private:
  std::size_t segment(double s) const {
    if (x_.empty()) throw std::logic_error("empty table");
    if (s < x_.front() - 1e-12 || s > x_.back() + 1e-12)
      throw std::domain_error("piecewise-linear evaluation outside table range");
    s = std::clamp(s, x_.front(), x_.back());
    auto it = std::upper_bound(x_.begin(), x_.end(), s);
    std::size_t i = static_cast<std::size_t>(std::distance(x_.begin(), it));
    if (i > 0) --i;
    if (i + 1 >= x_.size()) i = x_.size() - 2;
    return i;
  }

  std::vector<double> x_, y_;
  std::vector<double> cum_;
};

}  // namespace satdiff

#include "hybridest/stats.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "hybridest/errors.hpp"

namespace hybridest::stats {

namespace {
constexpr double kNormalDf = 1e10;
}

double t_quantile(double df, double p) {
  if (!(df > 0)) throw NumericalError("t quantile requires df > 0");
  if (!std::isfinite(df) || df > kNormalDf) return normal_quantile(p);
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

double t_cdf(double df, double x) {
  if (!(df > 0)) throw NumericalError("t distribution requires df > 0");
  if (!std::isfinite(df) || df > kNormalDf) return normal_cdf(x);
  return boost::math::cdf(boost::math::students_t_distribution<double>(df), x);
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }

double normal_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<double>(), x); }

}  // namespace hybridest::stats

#pragma once

namespace hybridest::stats {

// Student t quantile; df = +inf (or very large) falls back to the normal.
double t_quantile(double df, double p);
double t_cdf(double df, double x);

double normal_quantile(double p);
double normal_cdf(double x);

}  // namespace hybridest::stats

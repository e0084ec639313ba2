#pragma once

namespace fjup {

// log(n!) with a cached table for the small arguments the allocation sums hit
// constantly; falls back to lgamma beyond the table.
double log_factorial(int n);

// Regularized lower/upper incomplete gamma P(a,x), Q(a,x).
// Series for x < a+1, continued fraction otherwise; |error| ~ 1e-14.
double reg_gamma_p(double a, double x);
double reg_gamma_q(double a, double x);

// Regularized incomplete beta I_x(a,b) via Lentz's continued fraction.
// a == 0 returns 1 for x > 0, b == 0 returns 0 for x < 1 (the limits the
// allocation walk actually touches).
double reg_inc_beta(double a, double b, double x);

// standard normal CDF
double normal_cdf(double z);

}  // namespace fjup
